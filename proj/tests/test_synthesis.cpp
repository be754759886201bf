#include "doctest.h"

#include "fixtures.hpp"
#include "shctl/synthesis.hpp"

#include <cmath>

using namespace shctl;
using namespace shctl::testing;

namespace {

SynthesisProblem twobranch_problem(const Mdp& m, double b, double bound = 0.21) {
    return SynthesisProblem{&m, uniform_strategy(m), BlendingFunction::constant(5, b), {reach_leq(m, bound)}};
}

// Closed form on twobranch with a uniform human: the reachability probability
// is (0.4 + 0.2x)(0.4 + 0.2y), minimized symmetrically, so x = 0.5 - t with
// (0.5 - 0.2t)^2 = λ.
double optimal_deviation(double bound) { return (0.5 - std::sqrt(bound)) / 0.2; }

void check_consistency(const SynthesisProblem& p, const SynthesisResult& r) {
    CHECK(validate_strategy(p.mdp(), r.blended).empty());
    CHECK(validate_strategy(p.mdp(), r.autonomous).empty());
    CHECK(max_abs_difference(blend(p.human, r.autonomous, r.blending), r.blended) <= 1e-6);
    CHECK(validate_perturbation(r.perturbation).empty());
    CHECK(max_abs_difference(apply_perturbation(p.human, r.perturbation), r.blended) <= 1e-12);
    CHECK(r.objective == doctest::Approx(deviation_inf_norm(r.perturbation)));
    for (StateIndex s = 0; s < p.mdp().num_states(); ++s) {
        const LocalBox box = local_strategy_box(p, s);
        for (std::size_t j = 0; j < box.actions.size(); ++j) {
            CHECK(r.blended(s, box.actions[j]) >= box.lower[j] - 1e-9);
            CHECK(r.blended(s, box.actions[j]) <= box.upper[j] + 1e-9);
        }
    }
}

}  // namespace

TEST_CASE("local strategy box") {
    const Mdp m = twobranch();
    const LocalBox box = local_strategy_box(twobranch_problem(m, 0.5), 0);
    REQUIRE(box.actions == std::vector<ActionIndex>{kA, kB});
    CHECK(box.lower[0] == doctest::Approx(0.25));
    CHECK(box.upper[0] == doctest::Approx(0.75));
    const LocalBox human_only = local_strategy_box(twobranch_problem(m, 1.0), 1);
    CHECK(human_only.lower == human_only.upper);
    const LocalBox free = local_strategy_box(twobranch_problem(m, 0.0), 1);
    CHECK(free.lower[0] == 0.0);
    CHECK(free.upper[0] == 1.0);
}

TEST_CASE("minimum reachability over the blending box") {
    const Mdp m = twobranch();
    const StateSet t = bad_set(m);
    CHECK(min_reach_over_box(twobranch_problem(m, 0.0), t).value == doctest::Approx(0.16));
    CHECK(min_reach_over_box(twobranch_problem(m, 1.0), t).value == doctest::Approx(0.25));
    CHECK(min_reach_over_box(twobranch_problem(m, 0.5), t).value == doctest::Approx(0.45 * 0.45));
    CHECK(min_reach_over_box(twobranch_problem(m, 0.6), t).value == doctest::Approx(0.46 * 0.46));
    // Deviation cap 0.1 at b = 0: (0.5 - 0.02)^2.
    CHECK(min_reach_over_box(twobranch_problem(m, 0.0), t, 0.1).value == doctest::Approx(0.48 * 0.48));
}

TEST_CASE("exact synthesis reproduces the twobranch table") {
    const Mdp m = twobranch();
    const double t_star = optimal_deviation(0.21);
    CHECK(t_star == doctest::Approx(0.2087).epsilon(1e-3));
    struct Row {
        double b;
        double autonomous_a;  // reference value, two digits
    };
    for (const Row row : {Row{0.5, 0.08}, Row{0.1, 0.27}, Row{0.0, 0.29}}) {
        CAPTURE(row.b);
        const SynthesisProblem p = twobranch_problem(m, row.b);
        const SynthesisResult r = synthesize_reachability(p);
        REQUIRE(r.status == SynthesisStatus::Feasible);
        check_consistency(p, r);
        CHECK(std::abs(r.objective - t_star) <= 1e-5);
        const double x = r.blended(0, kA);
        CHECK(std::abs(x - (0.5 - t_star)) <= 1e-5);
        CHECK(std::abs(r.blended(1, kC) - (0.5 - t_star)) <= 1e-5);
        CHECK(std::abs(x - 0.29) <= 0.01);
        const double expected_a = (0.5 - t_star - row.b * 0.5) / (1.0 - row.b);
        CHECK(std::abs(r.autonomous(0, kA) - expected_a) <= 1e-4);
        CHECK(std::abs(r.autonomous(0, kA) - row.autonomous_a) <= 0.01);
        REQUIRE(r.certificates.size() == 1);
        CHECK(r.certificates[0].satisfied);
        CHECK(r.certificates[0].value_at_initial <= 0.21 + 1e-9);
        CHECK(std::abs(r.certificates[0].value_at_initial - 0.209) <= 0.001 + 1e-9);
    }
}

TEST_CASE("exact synthesis detects infeasible blending") {
    const Mdp m = twobranch();
    const SynthesisResult r = synthesize_reachability(twobranch_problem(m, 0.6));
    CHECK(r.status == SynthesisStatus::Infeasible);
    CHECK(r.trace.final_residual == doctest::Approx(0.46 * 0.46 - 0.21));
    CHECK(synthesize_reachability(twobranch_problem(m, 0.0, 0.15)).status == SynthesisStatus::Infeasible);
}

TEST_CASE("satisfied human strategy needs no perturbation") {
    const Mdp m = twobranch();
    const SynthesisProblem p = twobranch_problem(m, 0.5, 0.3);
    for (const auto& r : {synthesize_reachability(p), synthesize_general(p), repair_synthesize(p)}) {
        CHECK(r.status == SynthesisStatus::Feasible);
        CHECK(r.objective == 0.0);
        CHECK(max_abs_difference(r.autonomous, p.human) == 0.0);
    }
}

TEST_CASE("invalid problems are rejected") {
    const Mdp m = twobranch();
    SynthesisProblem p = twobranch_problem(m, 0.5);
    p.blending = BlendingFunction::constant(3, 0.5);
    CHECK_THROWS_AS(synthesize_reachability(p), InvalidInput);
    p = twobranch_problem(m, 0.5);
    p.specs = {UntilProb{0.5, Comparison::GreaterEqual, StateSet(5, false), bad_set(m)}};
    CHECK_THROWS_AS(synthesize_reachability(p), InvalidInput);
    p = twobranch_problem(m, 0.5);
    p.blending = SynthesizeBlending{};
    CHECK_THROWS_AS(synthesize_general(p), InvalidInput);
    p = twobranch_problem(m, 0.5);
    p.human.set(0, kC, 0.5);
    CHECK_THROWS_AS(repair_synthesize(p), InvalidInput);
}

TEST_CASE("general solver agrees with the exact solver") {
    const Mdp m = twobranch();
    for (double b : {0.0, 0.3, 0.5}) {
        CAPTURE(b);
        const SynthesisProblem p = twobranch_problem(m, b);
        const SynthesisResult exact = synthesize_reachability(p);
        const SynthesisResult general = synthesize_general(p);
        REQUIRE(general.status == SynthesisStatus::Feasible);
        check_consistency(p, general);
        CHECK(std::abs(general.objective - exact.objective) <= 1e-3);
    }
    CHECK(synthesize_general(twobranch_problem(m, 0.6)).status == SynthesisStatus::SolverLimit);
}

TEST_CASE("general solver with an unbounded cost specification") {
    Mdp m = twobranch();
    for (StateIndex s = 0; s < 2; ++s)
        for (const auto& c : m.choices(s)) m.set_cost(s, c.action, 1.0);
    const StateSet absorbing = make_state_set(5, std::vector<StateIndex>{2, 3, 4});
    SynthesisProblem p = twobranch_problem(m, 0.5);
    p.specs.push_back(ExpectedCost{std::numeric_limits<double>::infinity(), absorbing});
    const SynthesisResult r = synthesize_general(p);
    REQUIRE(r.status == SynthesisStatus::Feasible);
    CHECK(std::abs(r.objective - optimal_deviation(0.21)) <= 1e-3);

    // Expected cost is 1 + (0.4 + 0.2x), so the bound only excludes x > 0.5.
    p.specs.back() = ExpectedCost{1.5, absorbing};
    const SynthesisResult bounded = synthesize_general(p);
    REQUIRE(bounded.status == SynthesisStatus::Feasible);
    CHECK(bounded.certificates[1].value_at_initial <= 1.5 + 1e-9);
}

TEST_CASE("general solver with until and lower bounds") {
    const Mdp m = twobranch();
    // Reaching s4 while avoiding s2 has probability (0.4 + 0.2x)(0.6 - 0.2y);
    // the symmetric optimum solves (0.5 + 0.2t)^2 = 0.28.
    const StateSet goal = make_state_set(5, std::vector<StateIndex>{4});
    const StateSet avoid = make_state_set(5, std::vector<StateIndex>{2});
    SynthesisProblem p{&m, uniform_strategy(m), BlendingFunction::constant(5, 0.5),
                       {UntilProb{0.28, Comparison::GreaterEqual, avoid, goal}}};
    const SynthesisResult r = synthesize_general(p);
    REQUIRE(r.status == SynthesisStatus::Feasible);
    check_consistency(p, r);
    CHECK(r.certificates[0].value_at_initial >= 0.28 - 1e-9);
    CHECK(std::abs(r.objective - (std::sqrt(0.28) - 0.5) / 0.2) <= 1e-3);

    // The box caps the value at 0.55^2.
    p.specs = {UntilProb{0.31, Comparison::GreaterEqual, avoid, goal}};
    CHECK(synthesize_general(p).status == SynthesisStatus::SolverLimit);
}

TEST_CASE("uniform-max blending on twobranch") {
    const Mdp m = twobranch();
    SynthesisProblem p = twobranch_problem(m, 0.5);
    p.blending = SynthesizeBlending{};
    const SynthesisResult r = generalized_blending(p, BlendingMode::UniformMax);
    REQUIRE(r.status == SynthesisStatus::Feasible);
    const double c = (std::sqrt(0.21) - 0.4) / 0.1;
    CHECK(c == doctest::Approx(0.58258).epsilon(1e-4));
    CHECK(std::abs(r.blending(0) - c) <= 1e-3);
    CHECK(std::abs(r.blending(0) - 0.582) <= 1e-3);
    CHECK(r.certificates[0].value_at_initial <= 0.21 + 1e-9);
    CHECK(r.objective == doctest::Approx(optimal_deviation(0.21)).epsilon(1e-4));

    p.specs = {reach_leq(m, 0.15)};
    CHECK(generalized_blending(p, BlendingMode::UniformMax).status == SynthesisStatus::Infeasible);
    p.specs = {reach_leq(m, 0.3)};
    const SynthesisResult easy = generalized_blending(p, BlendingMode::UniformMax);
    CHECK(easy.status == SynthesisStatus::Feasible);
    CHECK(easy.blending(0) == 1.0);
}

TEST_CASE("per-state blending stays feasible") {
    const Mdp m = twobranch();
    SynthesisProblem p = twobranch_problem(m, 0.5);
    p.blending = SynthesizeBlending{};
    const SynthesisResult r = generalized_blending(p, BlendingMode::PerState);
    REQUIRE(r.status == SynthesisStatus::Feasible);
    CHECK(r.certificates[0].value_at_initial <= 0.21 + 1e-9);
    // s0 goes first and can be fully human: 0.5 * 0.4 <= 0.21. Then s1 is
    // limited by 0.5 (0.4 + 0.1 b) <= 0.21, i.e. b <= 0.2.
    CHECK(r.blending(0) == 1.0);
    CHECK(std::abs(r.blending(1) - 0.2) <= 1e-3);
    SynthesisProblem fixed = p;
    fixed.blending = r.blending;
    CHECK(min_reach_over_box(fixed, bad_set(m)).value <= 0.21 + 1e-9);
}

namespace {

// Three decision states with two actions each, a sink (3) and a target (4).
Mdp small_random(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Mdp m(5, 0, {"x", "y"});
    for (StateIndex s = 0; s < 3; ++s) {
        for (ActionIndex a = 0; a < 2; ++a) {
            double w[5];
            double total = 0.0;
            for (double& v : w) total += (v = unit(rng) < 0.3 ? 0.0 : unit(rng));
            w[3] += 0.05;
            w[4] += 0.05;
            total += 0.1;
            for (StateIndex t = 0; t < 5; ++t)
                if (w[t] > 0.0) m.add_transition(s, a, t, w[t] / total);
        }
    }
    m.add_transition(3, 0, 3, 1.0);
    m.add_transition(4, 0, 4, 1.0);
    m.add_label("target", 4);
    return m;
}

// Independent oracle: Gaussian elimination on (I - P) x = P[.,target] over the decision states.
double reach_dense(const Mdp& m, const double x[3]) {
    double a[3][4] = {};
    for (StateIndex s = 0; s < 3; ++s) {
        a[s][s] = 1.0;
        for (const auto& c : m.choices(s)) {
            const double w = c.action == 0 ? x[s] : 1.0 - x[s];
            for (const auto& succ : c.successors) {
                if (succ.state < 3) a[s][succ.state] -= w * succ.probability;
                if (succ.state == 4) a[s][3] += w * succ.probability;
            }
        }
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        for (int k = 0; k < 4; ++k) std::swap(a[col][k], a[piv][k]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int k = 0; k < 4; ++k) a[r][k] -= f * a[col][k];
        }
    }
    return a[0][3] / a[0][0];
}

}  // namespace

TEST_CASE("exact synthesis is optimal against a brute-force grid") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double step = 0.02;
    int checked = 0;
    for (int trial = 0; trial < 12; ++trial) {
        const Mdp m = small_random(rng);
        Strategy h(5);
        double hx[3];
        for (StateIndex s = 0; s < 3; ++s) {
            hx[s] = 0.1 + 0.8 * unit(rng);
            h.set(s, 0, hx[s]);
            h.set(s, 1, 1.0 - hx[s]);
        }
        h.set(3, 0, 1.0);
        h.set(4, 0, 1.0);
        const double b = 0.5;
        const double human_value = reach_dense(m, hx);
        SynthesisProblem p{&m, h, BlendingFunction::constant(5, b), {}};
        p.specs = {SafetyReach{1.0, Comparison::LessEqual, m.label_set("target")}};
        const double lowest = min_reach_over_box(p, m.label_set("target")).value;
        if (human_value - lowest < 1e-3) continue;
        const double bound = lowest + 0.5 * (human_value - lowest);
        p.specs = {SafetyReach{bound, Comparison::LessEqual, m.label_set("target")}};
        const SynthesisResult r = synthesize_reachability(p);
        REQUIRE(r.status == SynthesisStatus::Feasible);
        check_consistency(p, r);

        double x[3];
        const double bx[3] = {r.blended(0, 0), r.blended(1, 0), r.blended(2, 0)};
        CHECK(reach_dense(m, bx) <= bound + 1e-9);

        double grid_best = std::numeric_limits<double>::infinity();
        const int steps = static_cast<int>(std::round(1.0 / step));
        for (int i = 0; i <= steps; ++i) {
            x[0] = i * step;
            for (int j = 0; j <= steps; ++j) {
                x[1] = j * step;
                for (int k = 0; k <= steps; ++k) {
                    x[2] = k * step;
                    bool inside = true;
                    double dev = 0.0;
                    for (int s = 0; s < 3; ++s) {
                        inside = inside && x[s] >= b * hx[s] - 1e-12 && x[s] <= b * hx[s] + (1 - b) + 1e-12;
                        dev = std::max(dev, std::abs(x[s] - hx[s]));
                    }
                    if (!inside || dev >= grid_best) continue;
                    if (reach_dense(m, x) <= bound) grid_best = dev;
                }
            }
        }
        if (std::isfinite(grid_best)) {
            CHECK(r.objective <= grid_best + 1e-6);
            ++checked;
        }
    }
    CHECK(checked >= 6);
}
