#include "doctest.h"

#include "fixtures.hpp"
#include "shctl/model_io.hpp"

#include <cmath>

using namespace shctl;
using namespace shctl::testing;

TEST_CASE("induce_mc on twobranch") {
    const Mdp m = twobranch();
    SUBCASE("deterministic sigma one") {
        const MarkovChain c = induce_mc(m, sigma_one(m));
        CHECK(c.probability(0, 1) == doctest::Approx(0.6).epsilon(1e-15));
        CHECK(c.probability(0, 3) == doctest::Approx(0.4).epsilon(1e-15));
        CHECK(validate_chain(c).empty());
    }
    SUBCASE("uniform") {
        const MarkovChain c = induce_mc(m, uniform_strategy(m));
        // 0.5 * 0.6 + 0.5 * 0.4
        CHECK(std::abs(c.probability(0, 1) - 0.5) < 1e-15);
    }
    SUBCASE("Dirac strategies reproduce the chosen rows") {
        const MarkovChain c = induce_mc(m, sigma_safe(m));
        const Choice* b = m.find_choice(0, kB);
        REQUIRE(c.rows[0].size() == b->successors.size());
        for (std::size_t i = 0; i < c.rows[0].size(); ++i) {
            CHECK(c.rows[0][i].state == b->successors[i].state);
            CHECK(c.rows[0][i].probability == b->successors[i].probability);
        }
    }
}

TEST_CASE("induce_mc rejects disabled actions") {
    const Mdp m = twobranch();
    Strategy bad = uniform_strategy(m);
    bad.set(0, kA, 0.0);
    bad.set(0, kB, 0.5);
    bad.set(0, kC, 0.5);
    try {
        induce_mc(m, bad);
        FAIL("expected rejection");
    } catch (const InvalidInput& e) {
        CHECK(std::string(e.what()).find("(s0,c)") != std::string::npos);
    }
}

TEST_CASE("induce_mc carries expected per-state costs") {
    Mdp m = twobranch();
    m.set_cost(0, kA, 2.0);
    m.set_cost(0, kB, 4.0);
    const MarkovChain c = induce_mc(m, uniform_strategy(m));
    REQUIRE(c.costs);
    CHECK((*c.costs)[0] == doctest::Approx(3.0));
    CHECK((*c.costs)[1] == 0.0);
}

TEST_CASE("blend") {
    const Mdp m = twobranch();
    const Strategy h = uniform_strategy(m);
    const Strategy a = twobranch_strategy(m, 0.08, 0.08);
    CHECK(blend(h, a, BlendingFunction::constant(5, 1.0)) == h);
    CHECK(blend(h, a, BlendingFunction::constant(5, 0.0)) == a);
    CHECK(blend(h, a, BlendingFunction::constant(5, 0.5))(0, kA) == doctest::Approx(0.29));
    const Strategy a2 = twobranch_strategy(m, 0.27, 0.27);
    CHECK(blend(h, a2, BlendingFunction::constant(5, 0.1))(0, kA) == doctest::Approx(0.293));
    CHECK_THROWS_AS(blend(h, Strategy(3), BlendingFunction::constant(5, 0.5)), InvalidInput);
}

TEST_CASE("perturbations") {
    const Mdp m = twobranch();
    const Strategy h = uniform_strategy(m);

    Perturbation zero(5);
    CHECK(apply_perturbation(h, zero) == h);
    CHECK(deviation_inf_norm(zero) == 0.0);

    Perturbation d(5);
    d.set(0, kA, -0.21);
    d.set(0, kB, 0.21);
    const Strategy p = apply_perturbation(h, d);
    CHECK(p(0, kA) == doctest::Approx(0.29));
    CHECK(deviation_inf_norm(d) == doctest::Approx(0.21));

    const Perturbation back = perturbation_between(h, twobranch_strategy(m, 0.29, 0.5));
    CHECK(back(0, kA) == doctest::Approx(-0.21));
    CHECK(deviation_inf_norm(perturbation_between(h, h)) == 0.0);

    Strategy high(1);
    high.set(0, 0, 0.9);
    high.set(0, 1, 0.1);
    Perturbation over(1);
    over.set(0, 0, 0.2);
    over.set(0, 1, -0.2);
    CHECK_THROWS_AS(apply_perturbation(high, over), InvalidInput);

    Perturbation unbalanced(1);
    unbalanced.set(0, 0, 0.05);
    CHECK_THROWS_AS(apply_perturbation(high, unbalanced), InvalidInput);
}

TEST_CASE("strategy algebra invariants on random models") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Mdp m = random_mdp(rng, 12, 3);
        const Strategy h = random_strategy(rng, m);
        const Strategy a = random_strategy(rng, m);
        std::vector<double> w(m.num_states());
        for (auto& x : w) x = unit(rng);
        const BlendingFunction b(w);

        const Strategy ha = blend(h, a, b);
        CHECK(validate_strategy(m, ha).empty());
        CHECK(blend(h, h, b) == h);

        const Perturbation d = perturbation_between(h, ha);
        CHECK(validate_perturbation(d).empty());
        CHECK(max_abs_difference(apply_perturbation(h, d), ha) <= 1e-12);

        // Constant weights: the induced chain is the same mixture of the two chains.
        const double c = unit(rng);
        const MarkovChain mix = induce_mc(m, blend(h, a, BlendingFunction::constant(m.num_states(), c)));
        const MarkovChain ch = induce_mc(m, h);
        const MarkovChain ca = induce_mc(m, a);
        for (StateIndex s = 0; s < m.num_states(); ++s) {
            for (StateIndex t = 0; t < m.num_states(); ++t) {
                CHECK(std::abs(mix.probability(s, t) - (c * ch.probability(s, t) + (1 - c) * ca.probability(s, t))) <
                      1e-12);
            }
        }
    }
}

TEST_CASE("strategy JSON") {
    const Mdp m = twobranch();
    const Strategy h = uniform_strategy(m);
    CHECK(strategy_from_json(to_json(h, m), m) == h);
    CHECK_THROWS_AS(strategy_from_json(Json::parse(R"({"0": {"zz": 1.0}})"), m), InvalidInput);
    CHECK_THROWS_AS(strategy_from_json(Json::parse(R"({"9": {"a": 1.0}})"), m), InvalidInput);
}
