#pragma once

// Helpers shared by the synthesis and repair translation units. Local
// distributions are stored per state in the order of model.choices(s).

#include "shctl/synthesis.hpp"

#include <vector>

namespace shctl::detail {

using LocalDist = std::vector<double>;

std::vector<LocalDist> aligned(const Mdp& model, const Strategy& sigma);
Strategy from_aligned(const Mdp& model, const std::vector<LocalDist>& rows);

struct Polytope {
    std::vector<double> lower;
    std::vector<double> upper;
};

/// Box intersected with |q - human| <= cap.
Polytope capped(const LocalBox& box, const LocalDist& human, double cap);

/// Minimizer of sum_j q_j coef_j over {lower <= q <= upper, sum q = 1}: start
/// at the lower bounds and fill the cheapest coordinates first.
LocalDist greedy_vertex(const Polytope& poly, const std::vector<double>& coef);

/// sum_j q_j coef_j with 0 * inf treated as 0.
double dot(const LocalDist& q, const std::vector<double>& coef);

double successor_value(const Choice& choice, const std::vector<double>& values);

/// +1 when the specification wants small values, -1 when it wants large ones.
double sense(const Specification& spec);

/// States whose value under the specification does not depend on the local choice.
StateSet fixed_states(const Specification& spec, std::size_t num_states);

/// Value of taking `choice` at `s` once and then following the strategy whose values are `values`.
double local_q(const Mdp& model, StateIndex s, const Choice& choice, const Specification& spec,
               const std::vector<double>& values);

/// Non-negative size of the violation at the initial state; 0 iff satisfied.
/// Infinite expected costs map to a large finite number that still shrinks as
/// the probability of reaching the goal grows.
double violation(const Specification& spec, const CheckResult& result, const MarkovChain& chain);

/// True if the value at the initial state meets the bound with the given slack to spare.
bool satisfied_with_margin(const Specification& spec, double value, double margin);

/// Smallest t with some q in poly, |q - human| <= t, sum_j rows[i][j] q_j = targets[i]
/// for every i. Searches t in [0, cap]. One constraint is solved by bisection
/// over greedy vertices; several go through the simplex (also forced by use_lp).
struct LocalFit {
    bool ok = false;
    double deviation = 0.0;
    LocalDist q;
};

LocalFit fit_local(const Polytope& poly, const LocalDist& human, const std::vector<std::vector<double>>& rows,
                   const std::vector<double>& targets, double cap, bool use_lp = false);

}  // namespace shctl::detail
