#pragma once

#include "shctl/mdp.hpp"
#include "shctl/strategy.hpp"

#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace shctl {

enum class Comparison { LessEqual, GreaterEqual };

/// P~λ [F target]: probability of eventually reaching `target`.
struct SafetyReach {
    double bound = 1.0;
    Comparison cmp = Comparison::LessEqual;
    StateSet target;
};

/// E<=κ [F goal]: expected accumulated cost until `goal`.
struct ExpectedCost {
    double bound = std::numeric_limits<double>::infinity();
    StateSet goal;
};

/// P~λ [!avoid U goal]. A state in both sets counts as goal.
struct UntilProb {
    double bound = 0.0;
    Comparison cmp = Comparison::GreaterEqual;
    StateSet avoid;
    StateSet goal;
};

using Specification = std::variant<SafetyReach, ExpectedCost, UntilProb>;

/// Throws InvalidInput if set sizes or bounds are out of range.
void validate_spec(const Specification& spec, std::size_t num_states);
std::string describe(const Specification& spec);
double spec_bound(const Specification& spec);
Comparison spec_comparison(const Specification& spec);
bool respects(double value, Comparison cmp, double bound);

struct CheckResult {
    bool satisfied = false;
    double value_at_initial = 0.0;
    std::vector<double> per_state_values;
};

enum class Backend { LinearSolve, ValueIteration };

struct SolverOptions {
    Backend backend = Backend::LinearSolve;
    double vi_tolerance = 1e-10;
    std::size_t vi_max_iterations = 1'000'000;
};

/// States from which `target` is unreachable along positive-probability edges.
StateSet prob0_states(const MarkovChain& chain, const StateSet& target);
/// States that reach `target` with probability one (graph analysis).
StateSet prob1_states(const MarkovChain& chain, const StateSet& target);

std::vector<double> reach_probabilities(const MarkovChain& chain, const StateSet& target,
                                        const SolverOptions& options = {});
std::vector<double> until_probabilities(const MarkovChain& chain, const StateSet& avoid, const StateSet& goal,
                                        const SolverOptions& options = {});
/// Expected cost to reach `goal`; +inf where the goal is missed with positive probability.
std::vector<double> expected_costs(const MarkovChain& chain, const StateSet& goal,
                                   const SolverOptions& options = {});

CheckResult check_spec(const MarkovChain& chain, const Specification& spec, const SolverOptions& options = {});
std::vector<CheckResult> check(const Mdp& model, const Strategy& sigma, const std::vector<Specification>& specs,
                               const SolverOptions& options = {});
bool all_satisfied(const std::vector<CheckResult>& results);

}  // namespace shctl
