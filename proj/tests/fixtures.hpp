#pragma once

#include "shctl/mdp.hpp"
#include "shctl/model_check.hpp"
#include "shctl/strategy.hpp"

#include <random>

namespace shctl::testing {

// Two sequential binary choices; s2 is the bad state, s2..s4 absorbing.
inline Mdp twobranch() {
    Mdp m(5, 0, {"a", "b", "c", "d"});
    m.add_transition(0, 0, 1, 0.6);
    m.add_transition(0, 0, 3, 0.4);
    m.add_transition(0, 1, 1, 0.4);
    m.add_transition(0, 1, 3, 0.6);
    m.add_transition(1, 2, 2, 0.6);
    m.add_transition(1, 2, 4, 0.4);
    m.add_transition(1, 3, 2, 0.4);
    m.add_transition(1, 3, 4, 0.6);
    for (StateIndex s : {2u, 3u, 4u}) {
        m.add_transition(s, 0, s, 1.0);
        m.add_transition(s, 1, s, 1.0);
    }
    m.add_label("target", 2);
    return m;
}

inline constexpr ActionIndex kA = 0, kB = 1, kC = 2, kD = 3;

inline Strategy sigma_one(const Mdp& m) {
    const ActionIndex picks[] = {kA, kC, kA, kA, kA};
    return deterministic_strategy(m, picks);
}

inline Strategy sigma_safe(const Mdp& m) {
    const ActionIndex picks[] = {kB, kD, kA, kA, kA};
    return deterministic_strategy(m, picks);
}

inline StateSet bad_set(const Mdp& m) { return m.label_set("target"); }

inline SafetyReach reach_leq(const Mdp& m, double bound) { return SafetyReach{bound, Comparison::LessEqual, bad_set(m)}; }

/// Strategy with σ(s0)(a) = x, σ(s1)(c) = y and uniform absorbing states.
inline Strategy twobranch_strategy(const Mdp& m, double x, double y) {
    Strategy s = uniform_strategy(m);
    s.set(0, kA, x);
    s.set(0, kB, 1.0 - x);
    s.set(1, kC, y);
    s.set(1, kD, 1.0 - y);
    return s;
}

/// Random MDP: `n` states, each with between 1 and `max_actions` actions of
/// sparse random distributions. State n-1 is an absorbing target, n-2 an
/// absorbing sink; every other choice leaks some mass to one of them.
inline Mdp random_mdp(std::mt19937_64& rng, std::size_t n, std::size_t max_actions, bool with_costs = false) {
    std::vector<std::string> names;
    for (std::size_t a = 0; a < max_actions; ++a) names.push_back("a" + std::to_string(a));
    Mdp m(n, 0, names);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_state(0, n - 1);
    std::uniform_int_distribution<std::size_t> pick_count(1, max_actions);
    for (StateIndex s = 0; s + 2 < n; ++s) {
        const std::size_t k = pick_count(rng);
        for (ActionIndex a = 0; a < k; ++a) {
            std::vector<StateIndex> succ;
            const std::size_t fanout = 1 + pick_state(rng) % 3;
            for (std::size_t i = 0; i < fanout; ++i) succ.push_back(static_cast<StateIndex>(pick_state(rng)));
            succ.push_back(static_cast<StateIndex>(n - 1 - (unit(rng) < 0.5 ? 0 : 1)));
            std::vector<double> w(succ.size());
            double total = 0.0;
            for (auto& x : w) total += (x = 0.05 + unit(rng));
            for (std::size_t i = 0; i < succ.size(); ++i) m.add_transition(s, a, succ[i], w[i] / total);
            if (with_costs) m.set_cost(s, a, unit(rng) * 3.0);
        }
    }
    for (StateIndex s = static_cast<StateIndex>(n - 2); s < n; ++s) {
        m.add_transition(s, 0, s, 1.0);
        if (with_costs) m.set_cost(s, 0, 0.0);
    }
    m.add_label("target", static_cast<StateIndex>(n - 1));
    return m;
}

/// Random strategy with strictly positive mass on every enabled action.
inline Strategy random_strategy(std::mt19937_64& rng, const Mdp& m) {
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    Strategy sigma(m.num_states());
    for (StateIndex s = 0; s < m.num_states(); ++s) {
        const auto choices = m.choices(s);
        std::vector<double> w(choices.size());
        double total = 0.0;
        for (auto& x : w) total += (x = unit(rng));
        for (std::size_t j = 0; j < choices.size(); ++j) sigma.set(s, choices[j].action, w[j] / total);
    }
    return sigma;
}

}  // namespace shctl::testing
