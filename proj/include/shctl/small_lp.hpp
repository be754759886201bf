#pragma once

#include <cstddef>
#include <vector>

namespace shctl {

/// Dense linear program: minimize c.x subject to A_eq x = b_eq, A_ub x <= b_ub
/// and finite bounds lower <= x <= upper. Meant for a handful of variables.
struct LinearProgram {
    std::vector<double> objective;
    std::vector<std::vector<double>> a_eq;
    std::vector<double> b_eq;
    std::vector<std::vector<double>> a_ub;
    std::vector<double> b_ub;
    std::vector<double> lower;
    std::vector<double> upper;
};

struct LpSolution {
    bool feasible = false;
    double value = 0.0;
    std::vector<double> x;
};

/// Two-phase tableau simplex with Bland's rule.
LpSolution solve_lp(const LinearProgram& lp, double tolerance = 1e-9);

}  // namespace shctl
