#include "shctl/synthesis.hpp"
#include "shctl/small_lp.hpp"

#include "synthesis_detail.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace shctl {

double RepairBounds::p_min(StateIndex s, StateIndex t) const {
    for (const auto& e : rows.at(s))
        if (e.state == t) return e.p_min;
    return 0.0;
}

double RepairBounds::p_max(StateIndex s, StateIndex t) const {
    for (const auto& e : rows.at(s))
        if (e.state == t) return e.p_max;
    return 0.0;
}

bool RepairBounds::contains(const MarkovChain& chain, double tolerance) const {
    if (chain.rows.size() != rows.size()) return false;
    for (StateIndex s = 0; s < rows.size(); ++s) {
        for (const auto& e : rows[s]) {
            double p = 0.0;
            for (const auto& succ : chain.rows[s])
                if (succ.state == e.state) p += succ.probability;
            if (p < e.p_min - tolerance || p > e.p_max + tolerance) return false;
        }
        for (const auto& succ : chain.rows[s])
            if (succ.probability > tolerance && p_max(s, succ.state) == 0.0) return false;
    }
    return true;
}

RepairBounds repair_bounds(const Mdp& model) {
    RepairBounds bounds;
    bounds.rows.resize(model.num_states());
    for (StateIndex s = 0; s < model.num_states(); ++s) {
        const auto choices = model.choices(s);
        std::vector<StateIndex> support;
        for (const auto& c : choices)
            for (const auto& succ : c.successors) support.push_back(succ.state);
        std::sort(support.begin(), support.end());
        support.erase(std::unique(support.begin(), support.end()), support.end());
        for (StateIndex t : support) {
            double lo = 1.0, hi = 0.0;
            for (const auto& c : choices) {
                double p = 0.0;
                for (const auto& succ : c.successors)
                    if (succ.state == t) p += succ.probability;
                lo = std::min(lo, p);
                hi = std::max(hi, p);
            }
            bounds.rows[s].push_back({t, lo, hi});
        }
    }
    return bounds;
}

namespace detail {

namespace {

bool polytope_nonempty(const Polytope& p) {
    const double lo = std::accumulate(p.lower.begin(), p.lower.end(), 0.0);
    const double hi = std::accumulate(p.upper.begin(), p.upper.end(), 0.0);
    return lo <= 1.0 + 1e-12 && hi >= 1.0 - 1e-12;
}

Polytope tighten(const Polytope& poly, const LocalDist& human, double t) {
    Polytope p = poly;
    for (std::size_t j = 0; j < human.size(); ++j) {
        p.lower[j] = std::max(p.lower[j], human[j] - t);
        p.upper[j] = std::min(p.upper[j], human[j] + t);
        if (p.upper[j] < p.lower[j]) return Polytope{{}, {}};
    }
    return p;
}

double max_deviation(const LocalDist& q, const LocalDist& human) {
    double d = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) d = std::max(d, std::abs(q[j] - human[j]));
    return d;
}

LocalFit fit_single(const Polytope& poly, const LocalDist& human, const std::vector<double>& row, double target,
                    double cap) {
    const double tol = 1e-12 * std::max(1.0, std::abs(target));
    std::vector<double> negated(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) negated[j] = -row[j];

    struct Ends {
        bool ok = false;
        LocalDist lo, hi;
        double vlo = 0.0, vhi = 0.0;
    };
    auto ends = [&](double t) {
        Ends e;
        const Polytope p = tighten(poly, human, t);
        if (p.lower.empty() || !polytope_nonempty(p)) return e;
        e.lo = greedy_vertex(p, row);
        e.hi = greedy_vertex(p, negated);
        e.vlo = dot(e.lo, row);
        e.vhi = dot(e.hi, row);
        e.ok = e.vlo <= target + tol && e.vhi >= target - tol;
        return e;
    };

    Ends best = ends(cap);
    if (!best.ok) return {};
    double lo = 0.0, hi = cap;
    if (Ends zero = ends(0.0); zero.ok) {
        best = std::move(zero);
        hi = 0.0;
    }
    for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (Ends e = ends(mid); e.ok) {
            hi = mid;
            best = std::move(e);
        } else {
            lo = mid;
        }
    }
    LocalFit fit;
    fit.ok = true;
    const double span = best.vhi - best.vlo;
    if (span <= 1e-15) {
        fit.q = best.lo;
    } else {
        const double theta = std::clamp((best.vhi - target) / span, 0.0, 1.0);
        fit.q.resize(row.size());
        for (std::size_t j = 0; j < row.size(); ++j) fit.q[j] = theta * best.lo[j] + (1.0 - theta) * best.hi[j];
    }
    fit.deviation = max_deviation(fit.q, human);
    return fit;
}

LocalFit fit_lp(const Polytope& poly, const LocalDist& human, const std::vector<std::vector<double>>& rows,
                const std::vector<double>& targets, double cap) {
    const std::size_t k = human.size();
    LinearProgram lp;
    lp.objective.assign(k + 1, 0.0);
    lp.objective[k] = 1.0;
    lp.lower = poly.lower;
    lp.upper = poly.upper;
    lp.lower.push_back(0.0);
    lp.upper.push_back(cap);
    std::vector<double> ones(k + 1, 1.0);
    ones[k] = 0.0;
    lp.a_eq.push_back(ones);
    lp.b_eq.push_back(1.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<double> r(rows[i]);
        for (auto& v : r)
            if (!std::isfinite(v)) v = 0.0;
        r.push_back(0.0);
        lp.a_eq.push_back(std::move(r));
        lp.b_eq.push_back(targets[i]);
    }
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> up(k + 1, 0.0), down(k + 1, 0.0);
        up[j] = 1.0;
        up[k] = -1.0;
        down[j] = -1.0;
        down[k] = -1.0;
        lp.a_ub.push_back(std::move(up));
        lp.b_ub.push_back(human[j]);
        lp.a_ub.push_back(std::move(down));
        lp.b_ub.push_back(-human[j]);
    }
    const LpSolution sol = solve_lp(lp);
    if (!sol.feasible) return {};
    LocalFit fit;
    fit.ok = true;
    fit.q.assign(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(k));
    double total = 0.0;
    for (auto& v : fit.q) total += (v = std::clamp(v, 0.0, 1.0));
    for (auto& v : fit.q) v /= total;
    fit.deviation = max_deviation(fit.q, human);
    return fit;
}

}  // namespace

LocalFit fit_local(const Polytope& poly, const LocalDist& human, const std::vector<std::vector<double>>& rows,
                   const std::vector<double>& targets, double cap, bool use_lp) {
    if (rows.empty()) {
        LocalFit fit{true, 0.0, human};
        return fit;
    }
    // Actions with infinite value can carry no mass when the target is finite.
    Polytope p = poly;
    for (const auto& row : rows)
        for (std::size_t j = 0; j < row.size(); ++j)
            if (!std::isfinite(row[j])) p.upper[j] = 0.0;
    if (rows.size() == 1 && !use_lp) return fit_single(p, human, rows.front(), targets.front(), cap);
    return fit_lp(p, human, rows, targets, cap);
}

}  // namespace detail

namespace {

using detail::LocalDist;

std::vector<double> discounted_visits(const MarkovChain& chain, double gamma) {
    const auto n = static_cast<Eigen::Index>(chain.num_states());
    std::vector<Eigen::Triplet<double>> entries;
    for (StateIndex s = 0; s < chain.num_states(); ++s) {
        entries.emplace_back(s, s, 1.0);
        for (const auto& succ : chain.rows[s])
            entries.emplace_back(static_cast<Eigen::Index>(succ.state), s, -gamma * succ.probability);
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(entries.begin(), entries.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw std::runtime_error("visitation system is singular");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[chain.initial] = 1.0;
    const Eigen::VectorXd x = lu.solve(rhs);
    return {x.data(), x.data() + n};
}

struct Evaluation {
    std::vector<CheckResult> results;
    std::vector<double> violations;
    MarkovChain chain;
};

Evaluation evaluate(const Mdp& m, const std::vector<LocalDist>& rows, const std::vector<Specification>& specs) {
    Evaluation e;
    e.chain = induce_mc(m, detail::from_aligned(m, rows));
    for (const auto& spec : specs) {
        e.results.push_back(check_spec(e.chain, spec));
        e.violations.push_back(detail::violation(spec, e.results.back(), e.chain));
    }
    return e;
}

constexpr double kMargin = 1e-9;

bool all_with_margin(const std::vector<Specification>& specs, const Evaluation& e) {
    for (std::size_t i = 0; i < specs.size(); ++i)
        if (!detail::satisfied_with_margin(specs[i], e.results[i].value_at_initial, kMargin)) return false;
    return true;
}

struct Move {
    double gain;
    StateIndex state;
    double step;
    LocalDist vertex;
};

}  // namespace

SynthesisResult repair_synthesize(const SynthesisProblem& problem, const RepairOptions& options) {
    validate_problem(problem);
    if (!(options.budget >= 0.0 && options.budget <= 1.0)) throw InvalidInput("repair budget must lie in [0,1]");
    if (!(options.step > 0.0)) throw InvalidInput("repair step must be positive");
    const Mdp& m = problem.mdp();
    const std::size_t n = m.num_states();
    const BlendingFunction& b = problem.fixed_blending();
    const auto& specs = problem.specs;
    SolverTrace trace;
    trace.method = "repair";

    if (all_satisfied(check(m, problem.human, specs))) {
        trace.notes.push_back("human strategy already satisfies the specifications");
        return make_result(problem, b, problem.human, std::move(trace));
    }

    const auto human = detail::aligned(m, problem.human);
    std::vector<detail::Polytope> polys;
    polys.reserve(n);
    for (StateIndex s = 0; s < n; ++s)
        polys.push_back(detail::capped(local_strategy_box(problem, s), human[s], options.budget));
    std::vector<StateSet> fixed;
    for (const auto& spec : specs) fixed.push_back(detail::fixed_states(spec, n));

    // Phase 1: move the most valuable states toward the locally best vertex.
    std::vector<LocalDist> sigma = human;
    Evaluation current = evaluate(m, sigma, specs);
    bool repaired = false;
    std::size_t it = 0;
    for (; it < options.max_iterations; ++it) {
        if (all_with_margin(specs, current)) {
            repaired = true;
            break;
        }
        std::size_t focus = specs.size();
        for (std::size_t i = 0; i < specs.size(); ++i) {
            if (detail::satisfied_with_margin(specs[i], current.results[i].value_at_initial, kMargin)) continue;
            if (focus == specs.size() || current.violations[i] > current.violations[focus]) focus = i;
        }
        const Specification& spec = specs[focus];
        const double sign = detail::sense(spec);
        const auto& values = current.results[focus].per_state_values;
        const std::vector<double> visits = discounted_visits(current.chain, options.discount);

        std::vector<Move> moves;
        for (StateIndex s = 0; s < n; ++s) {
            const auto choices = m.choices(s);
            if (choices.size() < 2 || fixed[focus][s] || visits[s] <= 0.0) continue;
            std::vector<double> coef(choices.size());
            for (std::size_t j = 0; j < choices.size(); ++j)
                coef[j] = sign * detail::local_q(m, s, choices[j], spec, values);
            LocalDist vertex = detail::greedy_vertex(polys[s], coef);
            double largest = 0.0, gain = 0.0;
            for (std::size_t j = 0; j < choices.size(); ++j) {
                const double d = vertex[j] - sigma[s][j];
                largest = std::max(largest, std::abs(d));
                if (d != 0.0) gain -= d * coef[j];
            }
            if (largest < 1e-12 || !(gain > 0.0)) continue;
            const double step = std::min(1.0, options.step / largest);
            gain *= visits[s] * step;
            if (gain > 1e-15) moves.push_back({gain, s, step, std::move(vertex)});
        }
        if (moves.empty()) break;
        std::stable_sort(moves.begin(), moves.end(), [](const Move& x, const Move& y) { return x.gain > y.gain; });

        std::size_t k = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(options.batch_fraction * static_cast<double>(moves.size()))));
        bool accepted = false;
        while (true) {
            std::vector<LocalDist> candidate = sigma;
            for (std::size_t i = 0; i < k && i < moves.size(); ++i) {
                const Move& mv = moves[i];
                for (std::size_t j = 0; j < candidate[mv.state].size(); ++j)
                    candidate[mv.state][j] += mv.step * (mv.vertex[j] - sigma[mv.state][j]);
            }
            Evaluation next = evaluate(m, candidate, specs);
            const double before = current.results[focus].value_at_initial;
            const double after = next.results[focus].value_at_initial;
            const bool better = sign > 0 ? after < before : after > before;
            if (better || next.violations[focus] < current.violations[focus]) {
                sigma = std::move(candidate);
                current = std::move(next);
                accepted = true;
                break;
            }
            if (k == 1) break;
            k /= 2;
        }
        if (!accepted) break;
    }
    trace.iterations = it;

    if (!repaired) {
        SynthesisResult r = make_result(problem, b, detail::from_aligned(m, sigma), std::move(trace));
        r.status = SynthesisStatus::SolverLimit;
        r.trace.notes.push_back("greedy repair stalled before satisfying the specifications");
        return r;
    }

    // Phase 2: freeze the state values and minimize each state's deviation
    // subject to reproducing them exactly.
    std::vector<LocalDist> fitted = sigma;
    for (StateIndex s = 0; s < n; ++s) {
        const auto choices = m.choices(s);
        if (choices.size() < 2) continue;
        std::vector<std::vector<double>> rows;
        std::vector<double> targets;
        for (std::size_t i = 0; i < specs.size(); ++i) {
            if (fixed[i][s]) continue;
            const double target = current.results[i].per_state_values[s];
            if (!std::isfinite(target)) continue;
            std::vector<double> row(choices.size());
            for (std::size_t j = 0; j < choices.size(); ++j)
                row[j] = detail::local_q(m, s, choices[j], specs[i], current.results[i].per_state_values);
            rows.push_back(std::move(row));
            targets.push_back(target);
        }
        double cap = 0.0;
        for (std::size_t j = 0; j < choices.size(); ++j) cap = std::max(cap, std::abs(sigma[s][j] - human[s][j]));
        const detail::LocalFit fit = detail::fit_local(polys[s], human[s], rows, targets, cap);
        if (fit.ok && fit.deviation <= cap + 1e-12) fitted[s] = fit.q;
    }

    // Phase 3: verify.
    Strategy candidate = detail::from_aligned(m, fitted);
    if (all_satisfied(check(m, candidate, specs))) {
        trace.notes.push_back("minimized deviation verified");
        return make_result(problem, b, std::move(candidate), std::move(trace));
    }
    trace.notes.push_back("minimized deviation failed verification; returning the greedy repair");
    return make_result(problem, b, detail::from_aligned(m, sigma), std::move(trace));
}

}  // namespace shctl
