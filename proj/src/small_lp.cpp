#include "shctl/small_lp.hpp"

#include "shctl/mdp.hpp"

#include <cmath>
#include <limits>

namespace shctl {
namespace {

struct Tableau {
    std::size_t rows = 0;
    std::size_t cols = 0;  // excluding the right-hand side
    std::vector<std::vector<double>> t;
    std::vector<std::size_t> basis;

    double& rhs(std::size_t i) { return t[i][cols]; }

    void pivot(std::size_t r, std::size_t c) {
        const double p = t[r][c];
        for (auto& v : t[r]) v /= p;
        for (std::size_t i = 0; i < rows; ++i) {
            if (i == r) continue;
            const double f = t[i][c];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= cols; ++j) t[i][j] -= f * t[r][j];
        }
        basis[r] = c;
    }

    // Minimizes cost.x over columns in [0, allowed). Returns false if unbounded.
    bool optimize(const std::vector<double>& cost, std::size_t allowed, double tol) {
        for (std::size_t guard = 0; guard < 100'000; ++guard) {
            std::size_t enter = cols;
            for (std::size_t j = 0; j < allowed; ++j) {
                double reduced = cost[j];
                for (std::size_t i = 0; i < rows; ++i) reduced -= cost[basis[i]] * t[i][j];
                if (reduced < -tol) {
                    enter = j;
                    break;
                }
            }
            if (enter == cols) return true;
            std::size_t leave = rows;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < rows; ++i) {
                if (t[i][enter] <= tol) continue;
                const double ratio = t[i][cols] / t[i][enter];
                if (leave == rows || ratio < best - 1e-15 || (std::abs(ratio - best) <= 1e-15 && basis[i] < basis[leave])) {
                    best = ratio;
                    leave = i;
                }
            }
            if (leave == rows) return false;
            pivot(leave, enter);
        }
        return true;
    }
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, double tolerance) {
    const std::size_t n = lp.objective.size();
    if (lp.lower.size() != n || lp.upper.size() != n || lp.a_eq.size() != lp.b_eq.size() ||
        lp.a_ub.size() != lp.b_ub.size())
        throw InvalidInput("linear program dimensions disagree");
    for (std::size_t j = 0; j < n; ++j)
        if (!std::isfinite(lp.lower[j]) || !std::isfinite(lp.upper[j]) || lp.upper[j] < lp.lower[j] - tolerance)
            return {};

    // Shift x = lower + y with y >= 0; upper bounds become inequality rows.
    struct Row {
        std::vector<double> a;
        double b;
        bool equality;
    };
    std::vector<Row> rows;
    auto shifted = [&](const std::vector<double>& a, double b) {
        if (a.size() != n) throw InvalidInput("linear program row has wrong width");
        for (std::size_t j = 0; j < n; ++j) b -= a[j] * lp.lower[j];
        return b;
    };
    for (std::size_t i = 0; i < lp.a_eq.size(); ++i) rows.push_back({lp.a_eq[i], shifted(lp.a_eq[i], lp.b_eq[i]), true});
    for (std::size_t i = 0; i < lp.a_ub.size(); ++i) rows.push_back({lp.a_ub[i], shifted(lp.a_ub[i], lp.b_ub[i]), false});
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> a(n, 0.0);
        a[j] = 1.0;
        rows.push_back({a, std::max(0.0, lp.upper[j] - lp.lower[j]), false});
    }

    std::size_t slacks = 0;
    for (const auto& r : rows) slacks += r.equality ? 0 : 1;
    const std::size_t m = rows.size();
    Tableau tab;
    tab.rows = m;
    tab.cols = n + slacks + m;  // structural, slack, artificial
    tab.t.assign(m, std::vector<double>(tab.cols + 1, 0.0));
    tab.basis.resize(m);
    std::size_t slack = n;
    for (std::size_t i = 0; i < m; ++i) {
        auto& row = tab.t[i];
        for (std::size_t j = 0; j < n; ++j) row[j] = rows[i].a[j];
        if (!rows[i].equality) row[slack++] = 1.0;
        row[tab.cols] = rows[i].b;
        if (row[tab.cols] < 0.0)
            for (auto& v : row) v = -v;
        row[n + slacks + i] = 1.0;
        tab.basis[i] = n + slacks + i;
    }

    std::vector<double> phase1(tab.cols, 0.0);
    for (std::size_t i = 0; i < m; ++i) phase1[n + slacks + i] = 1.0;
    tab.optimize(phase1, tab.cols, tolerance);
    double infeasibility = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        if (tab.basis[i] >= n + slacks) infeasibility += tab.rhs(i);
    if (infeasibility > tolerance * static_cast<double>(m + 1)) return {};

    // Drive remaining zero-level artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
        if (tab.basis[i] < n + slacks) continue;
        for (std::size_t j = 0; j < n + slacks; ++j) {
            if (std::abs(tab.t[i][j]) > tolerance) {
                tab.pivot(i, j);
                break;
            }
        }
    }

    std::vector<double> phase2(tab.cols, 0.0);
    for (std::size_t j = 0; j < n; ++j) phase2[j] = lp.objective[j];
    if (!tab.optimize(phase2, n + slacks, tolerance)) return {};

    LpSolution out;
    out.feasible = true;
    out.x = lp.lower;
    for (std::size_t i = 0; i < m; ++i)
        if (tab.basis[i] < n) out.x[tab.basis[i]] += tab.rhs(i);
    for (std::size_t j = 0; j < n; ++j) out.value += lp.objective[j] * out.x[j];
    return out;
}

}  // namespace shctl
