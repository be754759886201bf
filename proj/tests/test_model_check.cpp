#include "doctest.h"

#include "fixtures.hpp"

#include <cmath>

using namespace shctl;
using namespace shctl::testing;

namespace {

MarkovChain chain_from(std::vector<Distribution> rows, StateIndex initial = 0) {
    MarkovChain c;
    c.initial = initial;
    c.rows = std::move(rows);
    return c;
}

/// Monte-Carlo estimate of reaching `target` from the initial state. Runs stop
/// at the target or in a state whose only successor is itself.
double simulate_reach(const MarkovChain& c, const StateSet& target, std::size_t paths, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < paths; ++i) {
        StateIndex s = c.initial;
        for (int step = 0; step < 100000; ++step) {
            if (target[s]) {
                ++hits;
                break;
            }
            const auto& row = c.rows[s];
            if (row.size() == 1 && row[0].state == s) break;
            double u = unit(rng);
            StateIndex next = row.back().state;
            for (const auto& succ : row) {
                if (u < succ.probability) {
                    next = succ.state;
                    break;
                }
                u -= succ.probability;
            }
            s = next;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(paths);
}

}  // namespace

TEST_CASE("reachability on twobranch") {
    const Mdp m = twobranch();
    const StateSet t = bad_set(m);
    CHECK(reach_probabilities(induce_mc(m, sigma_one(m)), t)[0] == doctest::Approx(0.36).epsilon(1e-12));
    CHECK(reach_probabilities(induce_mc(m, uniform_strategy(m)), t)[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(reach_probabilities(induce_mc(m, sigma_safe(m)), t)[0] == doctest::Approx(0.16).epsilon(1e-12));

    StateSet with_initial = t;
    with_initial[0] = true;
    CHECK(reach_probabilities(induce_mc(m, uniform_strategy(m)), with_initial)[0] == 1.0);
}

TEST_CASE("prob0 states") {
    const Mdp m = twobranch();
    const MarkovChain c = induce_mc(m, sigma_one(m));
    // Only s3 and s4 are absorbing away from s2.
    CHECK(members(prob0_states(c, bad_set(m))) == std::vector<StateIndex>{3, 4});
    CHECK(members(prob0_states(c, StateSet(5, true))).empty());
    const MarkovChain line = chain_from({{{1, 1.0}}, {{2, 1.0}}, {{2, 1.0}}});
    CHECK(members(prob0_states(line, make_state_set(3, std::vector<StateIndex>{2}))).empty());
}

TEST_CASE("until probabilities") {
    const MarkovChain c = chain_from({{{1, 0.5}, {2, 0.5}}, {{1, 1.0}}, {{2, 1.0}}});
    const StateSet goal = make_state_set(3, std::vector<StateIndex>{1});
    const StateSet avoid = make_state_set(3, std::vector<StateIndex>{2});
    CHECK(until_probabilities(c, avoid, goal)[0] == doctest::Approx(0.5));
    CHECK(until_probabilities(c, StateSet(3, false), goal) == reach_probabilities(c, goal));
    const StateSet avoid_initial = make_state_set(3, std::vector<StateIndex>{0});
    CHECK(until_probabilities(c, avoid_initial, goal)[0] == 0.0);

    // A state in both sets counts as goal.
    const StateSet both = make_state_set(3, std::vector<StateIndex>{1, 2});
    CHECK(until_probabilities(c, both, both)[0] == doctest::Approx(1.0));
}

TEST_CASE("expected costs") {
    MarkovChain line = chain_from({{{1, 1.0}}, {{2, 1.0}}, {{2, 1.0}}});
    line.costs = std::vector<double>{3.0, 4.0, 0.0};
    const StateSet g = make_state_set(3, std::vector<StateIndex>{2});
    const auto r = expected_costs(line, g);
    CHECK(r[0] == doctest::Approx(7.0));
    CHECK(r[2] == 0.0);

    MarkovChain trap = chain_from({{{1, 0.5}, {2, 0.5}}, {{1, 1.0}}, {{2, 1.0}}});
    trap.costs = std::vector<double>{1.0, 1.0, 0.0};
    const auto rt = expected_costs(trap, g);
    CHECK(std::isinf(rt[0]));
    CHECK(std::isinf(rt[1]));
    CHECK(rt[2] == 0.0);

    MarkovChain geometric = chain_from({{{0, 0.5}, {1, 0.5}}, {{1, 1.0}}});
    geometric.costs = std::vector<double>{1.0, 0.0};
    CHECK(expected_costs(geometric, make_state_set(2, std::vector<StateIndex>{1}))[0] == doctest::Approx(2.0));

    CHECK_THROWS_AS(expected_costs(chain_from({{{0, 1.0}}}), StateSet(1, true)), InvalidInput);
}

TEST_CASE("check against specifications") {
    const Mdp m = twobranch();
    const std::vector<Specification> specs{reach_leq(m, 0.21)};
    const auto unif = check(m, uniform_strategy(m), specs);
    REQUIRE(unif.size() == 1);
    CHECK_FALSE(unif[0].satisfied);
    CHECK(unif[0].value_at_initial == doctest::Approx(0.25));
    CHECK(unif[0].per_state_values[2] == 1.0);
    const auto safe = check(m, sigma_safe(m), specs);
    CHECK(safe[0].satisfied);
    CHECK(safe[0].value_at_initial == doctest::Approx(0.16));
    CHECK(check(m, uniform_strategy(m), {}).empty());
    CHECK(all_satisfied({}));

    const Specification lower = SafetyReach{0.2, Comparison::GreaterEqual, bad_set(m)};
    CHECK(check(m, uniform_strategy(m), {lower})[0].satisfied);
    CHECK_THROWS_AS(check(m, uniform_strategy(m), {SafetyReach{1.5, Comparison::LessEqual, bad_set(m)}}),
                    InvalidInput);
}

TEST_CASE("random chains: backends agree, monotone in target, finite costs iff prob one") {
    std::mt19937_64 rng(11);
    SolverOptions vi;
    vi.backend = Backend::ValueIteration;
    for (int trial = 0; trial < 100; ++trial) {
        const Mdp m = random_mdp(rng, 20, 3, true);
        const MarkovChain c = induce_mc(m, random_strategy(rng, m));
        const StateSet t = m.label_set("target");
        const auto exact = reach_probabilities(c, t);
        const auto iterated = reach_probabilities(c, t, vi);
        for (StateIndex s = 0; s < 20; ++s) CHECK(std::abs(exact[s] - iterated[s]) < 1e-8);

        StateSet bigger = t;
        bigger[rng() % 20] = true;
        const auto enlarged = reach_probabilities(c, bigger);
        for (StateIndex s = 0; s < 20; ++s) CHECK(enlarged[s] >= exact[s] - 1e-12);

        const auto costs = expected_costs(c, t);
        const auto costs_vi = expected_costs(c, t, vi);
        const StateSet sure = prob1_states(c, t);
        for (StateIndex s = 0; s < 20; ++s) {
            CHECK(std::isfinite(costs[s]) == static_cast<bool>(sure[s]));
            CHECK(sure[s] == (exact[s] > 1.0 - 1e-9));
            if (std::isfinite(costs[s])) CHECK(std::abs(costs[s] - costs_vi[s]) < 1e-6 * (1.0 + costs[s]));
        }
    }
}

TEST_CASE("random chains agree with simulation") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const Mdp m = random_mdp(rng, 20, 2);
        const MarkovChain c = induce_mc(m, random_strategy(rng, m));
        const StateSet t = m.label_set("target");
        const double p = reach_probabilities(c, t)[0];
        const std::size_t n = 20000;
        const double freq = simulate_reach(c, t, n, rng);
        const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / static_cast<double>(n));
        CHECK(std::abs(freq - p) <= 4 * se + 1e-12);
    }
}
