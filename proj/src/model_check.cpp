#include "shctl/model_check.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace shctl {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

std::vector<std::vector<StateIndex>> predecessors(const MarkovChain& chain) {
    std::vector<std::vector<StateIndex>> pred(chain.num_states());
    for (StateIndex s = 0; s < chain.num_states(); ++s)
        for (const auto& succ : chain.rows[s])
            if (succ.probability > 0.0) pred[succ.state].push_back(s);
    return pred;
}

/// Backward search from `from`, never expanding through `blocked` states.
StateSet backward_reach(const std::vector<std::vector<StateIndex>>& pred, const StateSet& from,
                        const StateSet& blocked) {
    StateSet seen = from;
    std::deque<StateIndex> queue;
    for (StateIndex s = 0; s < from.size(); ++s)
        if (from[s]) queue.push_back(s);
    while (!queue.empty()) {
        const StateIndex t = queue.front();
        queue.pop_front();
        for (StateIndex s : pred[t]) {
            if (seen[s] || blocked[s]) continue;
            seen[s] = true;
            queue.push_back(s);
        }
    }
    return seen;
}

void require_size(const StateSet& set, std::size_t n, const char* what) {
    if (set.size() != n) throw InvalidInput(std::string(what) + " has wrong size");
}

/// Solves x = P_MM x + rhs on the states flagged in `solve_on`; other entries
/// of `values` are treated as fixed boundary values.
void solve_system(const MarkovChain& chain, const std::vector<bool>& solve_on, std::vector<double>& values,
                  const std::vector<double>& local_rhs, const SolverOptions& options) {
    const std::size_t n = chain.num_states();
    std::vector<int> index(n, -1);
    std::vector<StateIndex> unknowns;
    for (StateIndex s = 0; s < n; ++s) {
        if (solve_on[s]) {
            index[s] = static_cast<int>(unknowns.size());
            unknowns.push_back(s);
        }
    }
    if (unknowns.empty()) return;

    // Constant part: local term plus the contribution of fixed successors.
    std::vector<double> rhs(unknowns.size(), 0.0);
    for (std::size_t i = 0; i < unknowns.size(); ++i) {
        const StateIndex s = unknowns[i];
        double b = local_rhs[s];
        for (const auto& succ : chain.rows[s])
            if (index[succ.state] < 0) b += succ.probability * values[succ.state];
        rhs[i] = b;
    }

    if (options.backend == Backend::LinearSolve) {
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(unknowns.size() * 4);
        for (std::size_t i = 0; i < unknowns.size(); ++i) {
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
            for (const auto& succ : chain.rows[unknowns[i]]) {
                if (index[succ.state] >= 0)
                    triplets.emplace_back(static_cast<int>(i), index[succ.state], -succ.probability);
            }
        }
        Eigen::SparseMatrix<double> a(static_cast<int>(unknowns.size()), static_cast<int>(unknowns.size()));
        a.setFromTriplets(triplets.begin(), triplets.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.analyzePattern(a);
        lu.factorize(a);
        if (lu.info() != Eigen::Success) throw std::runtime_error("linear solve failed: " + lu.lastErrorMessage());
        Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
        Eigen::VectorXd x = lu.solve(b);
        for (std::size_t i = 0; i < unknowns.size(); ++i) values[unknowns[i]] = x[static_cast<Eigen::Index>(i)];
        return;
    }

    // Jacobi value iteration from below.
    std::vector<double> x(unknowns.size(), 0.0);
    std::vector<double> next(unknowns.size(), 0.0);
    for (std::size_t iter = 0; iter < options.vi_max_iterations; ++iter) {
        double change = 0.0;
        for (std::size_t i = 0; i < unknowns.size(); ++i) {
            double v = rhs[i];
            for (const auto& succ : chain.rows[unknowns[i]])
                if (index[succ.state] >= 0) v += succ.probability * x[index[succ.state]];
            change = std::max(change, std::abs(v - x[i]));
            next[i] = v;
        }
        x.swap(next);
        if (change < options.vi_tolerance) break;
    }
    for (std::size_t i = 0; i < unknowns.size(); ++i) values[unknowns[i]] = x[i];
}

}  // namespace

bool respects(double value, Comparison cmp, double bound) {
    return cmp == Comparison::LessEqual ? value <= bound : value >= bound;
}

void validate_spec(const Specification& spec, std::size_t num_states) {
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SafetyReach>) {
                require_size(s.target, num_states, "target set");
                if (!(s.bound >= 0.0 && s.bound <= 1.0)) throw InvalidInput("probability bound outside [0,1]");
            } else if constexpr (std::is_same_v<T, ExpectedCost>) {
                require_size(s.goal, num_states, "goal set");
                if (!(s.bound >= 0.0)) throw InvalidInput("cost bound must be non-negative");
            } else {
                require_size(s.avoid, num_states, "avoid set");
                require_size(s.goal, num_states, "goal set");
                if (!(s.bound >= 0.0 && s.bound <= 1.0)) throw InvalidInput("probability bound outside [0,1]");
            }
        },
        spec);
}

std::string describe(const Specification& spec) {
    std::ostringstream os;
    auto cmp_text = [](Comparison c) { return c == Comparison::LessEqual ? "<=" : ">="; };
    auto set_text = [](const StateSet& set) {
        std::string out = "{";
        bool first = true;
        for (StateIndex s : members(set)) {
            out += (first ? "" : ",") + state_name(s);
            first = false;
        }
        return out + "}";
    };
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SafetyReach>) {
                os << "P" << cmp_text(s.cmp) << s.bound << " [F " << set_text(s.target) << "]";
            } else if constexpr (std::is_same_v<T, ExpectedCost>) {
                os << "E<=" << s.bound << " [F " << set_text(s.goal) << "]";
            } else {
                os << "P" << cmp_text(s.cmp) << s.bound << " [!" << set_text(s.avoid) << " U " << set_text(s.goal)
                   << "]";
            }
        },
        spec);
    return os.str();
}

double spec_bound(const Specification& spec) {
    return std::visit([](const auto& s) { return s.bound; }, spec);
}

Comparison spec_comparison(const Specification& spec) {
    if (const auto* cost = std::get_if<ExpectedCost>(&spec)) {
        (void)cost;
        return Comparison::LessEqual;
    }
    if (const auto* reach = std::get_if<SafetyReach>(&spec)) return reach->cmp;
    return std::get<UntilProb>(spec).cmp;
}

StateSet prob0_states(const MarkovChain& chain, const StateSet& target) {
    require_size(target, chain.num_states(), "target set");
    const StateSet none(chain.num_states(), false);
    StateSet can_reach = backward_reach(predecessors(chain), target, none);
    can_reach.flip();
    return can_reach;
}

StateSet prob1_states(const MarkovChain& chain, const StateSet& target) {
    require_size(target, chain.num_states(), "target set");
    const auto pred = predecessors(chain);
    const StateSet none(chain.num_states(), false);
    StateSet zero = backward_reach(pred, target, none);
    zero.flip();
    // States that can reach a probability-zero state without passing the target.
    StateSet leak = backward_reach(pred, zero, target);
    leak.flip();
    return leak;
}

std::vector<double> until_probabilities(const MarkovChain& chain, const StateSet& avoid, const StateSet& goal,
                                        const SolverOptions& options) {
    const std::size_t n = chain.num_states();
    require_size(avoid, n, "avoid set");
    require_size(goal, n, "goal set");
    StateSet blocked(n, false);
    for (StateIndex s = 0; s < n; ++s) blocked[s] = avoid[s] && !goal[s];

    StateSet reaches = backward_reach(predecessors(chain), goal, blocked);
    std::vector<double> values(n, 0.0);
    std::vector<bool> maybe(n, false);
    for (StateIndex s = 0; s < n; ++s) {
        if (goal[s]) {
            values[s] = 1.0;
        } else if (reaches[s] && !blocked[s]) {
            maybe[s] = true;
        }
    }
    solve_system(chain, maybe, values, std::vector<double>(n, 0.0), options);
    for (StateIndex s = 0; s < n; ++s) values[s] = std::clamp(values[s], 0.0, 1.0);
    return values;
}

std::vector<double> reach_probabilities(const MarkovChain& chain, const StateSet& target,
                                        const SolverOptions& options) {
    return until_probabilities(chain, StateSet(chain.num_states(), false), target, options);
}

std::vector<double> expected_costs(const MarkovChain& chain, const StateSet& goal, const SolverOptions& options) {
    const std::size_t n = chain.num_states();
    require_size(goal, n, "goal set");
    if (!chain.costs) throw InvalidInput("expected cost requested on a chain without cost annotations");
    const StateSet sure = prob1_states(chain, goal);
    std::vector<double> values(n, kInfinity);
    std::vector<bool> solve_on(n, false);
    for (StateIndex s = 0; s < n; ++s) {
        if (goal[s]) {
            values[s] = 0.0;
        } else if (sure[s]) {
            solve_on[s] = true;
            values[s] = 0.0;
        }
    }
    solve_system(chain, solve_on, values, *chain.costs, options);
    for (StateIndex s = 0; s < n; ++s)
        if (solve_on[s]) values[s] = std::max(values[s], 0.0);
    return values;
}

CheckResult check_spec(const MarkovChain& chain, const Specification& spec, const SolverOptions& options) {
    validate_spec(spec, chain.num_states());
    CheckResult result;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SafetyReach>) {
                result.per_state_values = reach_probabilities(chain, s.target, options);
            } else if constexpr (std::is_same_v<T, ExpectedCost>) {
                result.per_state_values = expected_costs(chain, s.goal, options);
            } else {
                result.per_state_values = until_probabilities(chain, s.avoid, s.goal, options);
            }
        },
        spec);
    result.value_at_initial = result.per_state_values[chain.initial];
    result.satisfied = respects(result.value_at_initial, spec_comparison(spec), spec_bound(spec));
    return result;
}

std::vector<CheckResult> check(const Mdp& model, const Strategy& sigma, const std::vector<Specification>& specs,
                               const SolverOptions& options) {
    if (specs.empty()) return {};
    const MarkovChain chain = induce_mc(model, sigma);
    std::vector<CheckResult> results;
    results.reserve(specs.size());
    for (const auto& spec : specs) results.push_back(check_spec(chain, spec, options));
    return results;
}

bool all_satisfied(const std::vector<CheckResult>& results) {
    return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.satisfied; });
}

}  // namespace shctl
