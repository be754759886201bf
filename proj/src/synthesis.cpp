#include "shctl/synthesis.hpp"

#include "synthesis_detail.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace shctl {

namespace detail {

std::vector<LocalDist> aligned(const Mdp& model, const Strategy& sigma) {
    std::vector<LocalDist> rows(model.num_states());
    for (StateIndex s = 0; s < model.num_states(); ++s) {
        const auto choices = model.choices(s);
        rows[s].resize(choices.size());
        for (std::size_t j = 0; j < choices.size(); ++j) rows[s][j] = sigma(s, choices[j].action);
    }
    return rows;
}

Strategy from_aligned(const Mdp& model, const std::vector<LocalDist>& rows) {
    Strategy sigma(model.num_states());
    for (StateIndex s = 0; s < model.num_states(); ++s) {
        const auto choices = model.choices(s);
        for (std::size_t j = 0; j < choices.size(); ++j) {
            const double p = std::clamp(rows[s][j], 0.0, 1.0);
            if (p > 0.0) sigma.set(s, choices[j].action, p);
        }
    }
    return sigma;
}

Polytope capped(const LocalBox& box, const LocalDist& human, double cap) {
    Polytope p{box.lower, box.upper};
    for (std::size_t j = 0; j < human.size(); ++j) {
        p.lower[j] = std::clamp(std::max(p.lower[j], human[j] - cap), 0.0, 1.0);
        p.upper[j] = std::clamp(std::min(p.upper[j], human[j] + cap), 0.0, 1.0);
        if (p.upper[j] < p.lower[j]) p.upper[j] = p.lower[j];
    }
    return p;
}

LocalDist greedy_vertex(const Polytope& poly, const std::vector<double>& coef) {
    const std::size_t k = coef.size();
    LocalDist q = poly.lower;
    double remaining = 1.0 - std::accumulate(q.begin(), q.end(), 0.0);
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](std::size_t j) { return std::isnan(coef[j]) ? std::numeric_limits<double>::infinity() : coef[j]; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return key(x) < key(y); });
    for (std::size_t j : order) {
        if (remaining <= 0.0) break;
        const double add = std::min(poly.upper[j] - poly.lower[j], remaining);
        q[j] += add;
        remaining -= add;
    }
    if (remaining > 1e-9) throw std::logic_error("empty local polytope");
    return q;
}

double dot(const LocalDist& q, const std::vector<double>& coef) {
    double sum = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j)
        if (q[j] != 0.0) sum += q[j] * coef[j];
    return sum;
}

double successor_value(const Choice& choice, const std::vector<double>& values) {
    double sum = 0.0;
    for (const auto& succ : choice.successors)
        if (succ.probability != 0.0) sum += succ.probability * values[succ.state];
    return sum;
}

double sense(const Specification& spec) { return spec_comparison(spec) == Comparison::LessEqual ? 1.0 : -1.0; }

StateSet fixed_states(const Specification& spec, std::size_t num_states) {
    StateSet fixed(num_states, false);
    std::visit(
        [&](const auto& sp) {
            using T = std::decay_t<decltype(sp)>;
            for (std::size_t s = 0; s < num_states; ++s) {
                if constexpr (std::is_same_v<T, SafetyReach>) fixed[s] = sp.target[s];
                if constexpr (std::is_same_v<T, ExpectedCost>) fixed[s] = sp.goal[s];
                if constexpr (std::is_same_v<T, UntilProb>) fixed[s] = sp.goal[s] || sp.avoid[s];
            }
        },
        spec);
    return fixed;
}

double local_q(const Mdp& model, StateIndex s, const Choice& choice, const Specification& spec,
               const std::vector<double>& values) {
    const double next = successor_value(choice, values);
    if (std::holds_alternative<ExpectedCost>(spec)) return model.cost(s, choice.action) + next;
    return next;
}

double violation(const Specification& spec, const CheckResult& result, const MarkovChain& chain) {
    const double v = result.value_at_initial;
    if (const auto* cost = std::get_if<ExpectedCost>(&spec)) {
        if (std::isinf(cost->bound)) return 0.0;
        if (std::isinf(v)) return 1e3 + 1e3 * (1.0 - reach_probabilities(chain, cost->goal)[chain.initial]);
        return std::max(0.0, (v - cost->bound) / std::max(1.0, cost->bound));
    }
    const double bound = spec_bound(spec);
    return spec_comparison(spec) == Comparison::LessEqual ? std::max(0.0, v - bound) : std::max(0.0, bound - v);
}

bool satisfied_with_margin(const Specification& spec, double value, double margin) {
    const double bound = spec_bound(spec);
    if (spec_comparison(spec) == Comparison::LessEqual) {
        if (std::isinf(bound)) return true;
        return value <= bound - margin || value <= 0.0;
    }
    return value >= bound + margin || value >= 1.0;
}

}  // namespace detail

using detail::LocalDist;

const BlendingFunction& SynthesisProblem::fixed_blending() const {
    if (!has_fixed_blending()) throw InvalidInput("problem has no fixed blending function");
    return std::get<BlendingFunction>(blending);
}

void validate_problem(const SynthesisProblem& problem) {
    if (problem.model == nullptr) throw InvalidInput("synthesis problem has no model");
    const Mdp& m = problem.mdp();
    const auto report = validate_mdp(m);
    if (!report.empty()) throw InvalidInput("invalid model: " + report.front().message);
    require_valid_strategy(m, problem.human);
    if (problem.has_fixed_blending() && problem.fixed_blending().num_states() != m.num_states())
        throw InvalidInput("blending function covers " + std::to_string(problem.fixed_blending().num_states()) +
                           " states, model has " + std::to_string(m.num_states()));
    for (const auto& spec : problem.specs) validate_spec(spec, m.num_states());
}

const char* to_string(SynthesisStatus status) {
    switch (status) {
        case SynthesisStatus::Feasible: return "feasible";
        case SynthesisStatus::Infeasible: return "infeasible";
        case SynthesisStatus::SolverLimit: return "solver-limit";
    }
    return "unknown";
}

LocalBox local_strategy_box(const SynthesisProblem& problem, StateIndex s) {
    const double b = problem.fixed_blending()(s);
    LocalBox box;
    for (const auto& choice : problem.mdp().choices(s)) {
        const double h = problem.human(s, choice.action);
        box.actions.push_back(choice.action);
        box.lower.push_back(b * h);
        box.upper.push_back(std::min(1.0, b * h + (1.0 - b)));
    }
    return box;
}

Strategy recover_autonomous(const Mdp& model, const Strategy& human, const Strategy& blended,
                            const BlendingFunction& b) {
    Strategy out(model.num_states());
    for (StateIndex s = 0; s < model.num_states(); ++s) {
        const double w = b(s);
        if (w >= 1.0 - 1e-12) {
            for (const auto& [a, p] : human.row(s)) out.set(s, a, p);
            continue;
        }
        const auto choices = model.choices(s);
        std::vector<double> row(choices.size());
        double total = 0.0;
        for (std::size_t j = 0; j < choices.size(); ++j) {
            const ActionIndex a = choices[j].action;
            row[j] = std::clamp((blended(s, a) - w * human(s, a)) / (1.0 - w), 0.0, 1.0);
            total += row[j];
        }
        if (total <= 0.0) {
            for (const auto& [a, p] : human.row(s)) out.set(s, a, p);
            continue;
        }
        for (std::size_t j = 0; j < choices.size(); ++j)
            if (row[j] > 0.0) out.set(s, choices[j].action, row[j] / total);
    }
    return out;
}

SynthesisResult make_result(const SynthesisProblem& problem, const BlendingFunction& b, Strategy blended,
                            SolverTrace trace) {
    SynthesisResult r;
    r.blending = b;
    r.autonomous = recover_autonomous(problem.mdp(), problem.human, blended, b);
    r.perturbation = perturbation_between(problem.human, blended);
    r.objective = deviation_inf_norm(r.perturbation);
    r.certificates = check(problem.mdp(), blended, problem.specs);
    r.blended = std::move(blended);
    r.status = all_satisfied(r.certificates) ? SynthesisStatus::Feasible : SynthesisStatus::SolverLimit;
    r.trace = std::move(trace);
    return r;
}

namespace {

std::vector<LocalBox> all_boxes(const SynthesisProblem& problem) {
    std::vector<LocalBox> boxes;
    boxes.reserve(problem.mdp().num_states());
    for (StateIndex s = 0; s < problem.mdp().num_states(); ++s) boxes.push_back(local_strategy_box(problem, s));
    return boxes;
}

const SafetyReach& single_upper_reach(const SynthesisProblem& problem) {
    if (problem.specs.size() != 1) throw InvalidInput("exact synthesis needs exactly one specification");
    const auto* reach = std::get_if<SafetyReach>(&problem.specs.front());
    if (reach == nullptr || reach->cmp != Comparison::LessEqual)
        throw InvalidInput("exact synthesis supports only P<=λ [F T] specifications");
    return *reach;
}

bool is_single_upper_reach(const SynthesisProblem& problem) {
    if (problem.specs.size() != 1) return false;
    const auto* reach = std::get_if<SafetyReach>(&problem.specs.front());
    return reach != nullptr && reach->cmp == Comparison::LessEqual;
}

std::string format(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

}  // namespace

MinReachResult min_reach_over_box(const SynthesisProblem& problem, const StateSet& target, double deviation_cap,
                                  const ExactOptions& options) {
    validate_problem(problem);
    const Mdp& m = problem.mdp();
    const std::size_t n = m.num_states();
    if (target.size() != n) throw InvalidInput("target set size does not match the model");
    const auto human = detail::aligned(m, problem.human);
    std::vector<detail::Polytope> polys;
    polys.reserve(n);
    for (StateIndex s = 0; s < n; ++s) polys.push_back(detail::capped(local_strategy_box(problem, s), human[s], deviation_cap));

    // Gauss-Seidel iteration from below converges to the least fixed point,
    // which is the minimum reachability probability.
    std::vector<double> x(n, 0.0);
    for (StateIndex s = 0; s < n; ++s) x[s] = target[s] ? 1.0 : 0.0;
    std::vector<double> q;
    MinReachResult out;
    for (; out.iterations < options.vi_max_iterations; ++out.iterations) {
        double change = 0.0;
        for (StateIndex s = 0; s < n; ++s) {
            if (target[s]) continue;
            const auto choices = m.choices(s);
            q.resize(choices.size());
            for (std::size_t j = 0; j < choices.size(); ++j) q[j] = detail::successor_value(choices[j], x);
            const double v = detail::dot(detail::greedy_vertex(polys[s], q), q);
            change = std::max(change, std::abs(v - x[s]));
            x[s] = v;
        }
        if (change < options.vi_tolerance) {
            ++out.iterations;
            break;
        }
    }

    std::vector<LocalDist> witness = human;
    for (StateIndex s = 0; s < n; ++s) {
        if (target[s]) continue;
        const auto choices = m.choices(s);
        q.resize(choices.size());
        for (std::size_t j = 0; j < choices.size(); ++j) q[j] = detail::successor_value(choices[j], x);
        LocalDist best = detail::greedy_vertex(polys[s], q);
        // Keep the human's own choice when it is already optimal here.
        if (detail::dot(human[s], q) > detail::dot(best, q) + 1e-12) witness[s] = std::move(best);
    }
    out.witness = detail::from_aligned(m, witness);
    out.value = reach_probabilities(induce_mc(m, out.witness), target)[m.initial()];
    return out;
}

SynthesisResult synthesize_reachability(const SynthesisProblem& problem, const ExactOptions& options) {
    validate_problem(problem);
    const SafetyReach& spec = single_upper_reach(problem);
    const BlendingFunction& b = problem.fixed_blending();
    SolverTrace trace;
    trace.method = "exact";

    if (all_satisfied(check(problem.mdp(), problem.human, problem.specs))) {
        trace.notes.push_back("human strategy already satisfies the specification");
        return make_result(problem, b, problem.human, std::move(trace));
    }

    MinReachResult full = min_reach_over_box(problem, spec.target, 1.0, options);
    trace.iterations = 1;
    if (full.value > spec.bound) {
        SynthesisResult r = make_result(problem, b, full.witness, std::move(trace));
        r.status = SynthesisStatus::Infeasible;
        r.trace.final_residual = full.value - spec.bound;
        r.trace.notes.push_back("minimum over the blending box is " + format(full.value) + ", above the bound " +
                                format(spec.bound));
        return r;
    }

    double lo = 0.0, hi = 1.0;
    Strategy best = std::move(full.witness);
    while (hi - lo > options.resolution) {
        const double mid = 0.5 * (lo + hi);
        MinReachResult r = min_reach_over_box(problem, spec.target, mid, options);
        ++trace.iterations;
        if (r.value <= spec.bound) {
            hi = mid;
            best = std::move(r.witness);
        } else {
            lo = mid;
        }
    }
    trace.final_residual = hi - lo;
    return make_result(problem, b, std::move(best), std::move(trace));
}

namespace {

struct Evaluation {
    std::vector<CheckResult> results;
    std::vector<double> violations;
    bool all = false;
};

Evaluation evaluate(const Mdp& m, const std::vector<LocalDist>& rows, const std::vector<Specification>& specs) {
    Evaluation e;
    const MarkovChain chain = induce_mc(m, detail::from_aligned(m, rows));
    e.all = true;
    for (const auto& spec : specs) {
        e.results.push_back(check_spec(chain, spec));
        e.violations.push_back(detail::violation(spec, e.results.back(), chain));
        e.all = e.all && e.results.back().satisfied;
    }
    return e;
}

double merit(const Evaluation& e, const std::vector<double>& mu) {
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) sum += mu[i] * e.violations[i];
    return sum;
}

double spec_scale(const Specification& spec) {
    if (const auto* cost = std::get_if<ExpectedCost>(&spec))
        return std::isfinite(cost->bound) ? std::max(1.0, cost->bound) : 1.0;
    return 1.0;
}

}  // namespace

SynthesisResult synthesize_general(const SynthesisProblem& problem, const GeneralOptions& options) {
    validate_problem(problem);
    const Mdp& m = problem.mdp();
    const std::size_t n = m.num_states();
    const BlendingFunction& b = problem.fixed_blending();
    SolverTrace trace;
    trace.method = "penalty";

    if (all_satisfied(check(m, problem.human, problem.specs))) {
        trace.notes.push_back("human strategy already satisfies the specifications");
        return make_result(problem, b, problem.human, std::move(trace));
    }

    const auto human = detail::aligned(m, problem.human);
    const auto boxes = all_boxes(problem);
    std::vector<StateSet> fixed;
    for (const auto& spec : problem.specs) fixed.push_back(detail::fixed_states(spec, n));

    std::size_t budget = options.max_outer_iterations;
    const std::size_t per_attempt = std::max<std::size_t>(50, options.max_outer_iterations / 25);

    // Local search inside the deviation-capped boxes; returns a satisfying strategy or nothing.
    auto attempt = [&](double cap) -> std::optional<std::vector<LocalDist>> {
        std::vector<detail::Polytope> polys;
        for (StateIndex s = 0; s < n; ++s) polys.push_back(detail::capped(boxes[s], human[s], cap));
        std::vector<LocalDist> sigma = human;
        std::vector<double> mu(problem.specs.size(), options.initial_penalty);
        Evaluation current = evaluate(m, sigma, problem.specs);
        std::size_t stagnation = 0;
        for (std::size_t it = 0; it < per_attempt && budget > 0; ++it, --budget) {
            ++trace.iterations;
            if (current.all) return sigma;
            const double before = merit(current, mu);

            std::vector<LocalDist> target = sigma;
            for (StateIndex s = 0; s < n; ++s) {
                const auto choices = m.choices(s);
                if (choices.size() < 2) continue;
                std::vector<double> coef(choices.size(), 0.0);
                bool active = false;
                for (std::size_t i = 0; i < problem.specs.size(); ++i) {
                    if (current.violations[i] <= 0.0 || fixed[i][s]) continue;
                    active = true;
                    const double w = mu[i] * detail::sense(problem.specs[i]) / spec_scale(problem.specs[i]);
                    const auto& values = current.results[i].per_state_values;
                    for (std::size_t j = 0; j < choices.size(); ++j)
                        coef[j] += w * detail::local_q(m, s, choices[j], problem.specs[i], values);
                }
                if (active) target[s] = detail::greedy_vertex(polys[s], coef);
            }

            bool accepted = false;
            for (double gamma = 1.0; gamma >= 1.0 / 64.0; gamma *= 0.5) {
                std::vector<LocalDist> candidate = sigma;
                for (StateIndex s = 0; s < n; ++s)
                    for (std::size_t j = 0; j < candidate[s].size(); ++j)
                        candidate[s][j] += gamma * (target[s][j] - sigma[s][j]);
                Evaluation next = evaluate(m, candidate, problem.specs);
                if (next.all || merit(next, mu) < before * (1.0 - 1e-12) - 1e-15) {
                    sigma = std::move(candidate);
                    current = std::move(next);
                    accepted = true;
                    break;
                }
            }
            if (accepted) {
                stagnation = 0;
                continue;
            }
            if (++stagnation > 3) return std::nullopt;
            // Shift weight toward the worst violated specification.
            std::size_t worst = 0;
            for (std::size_t i = 1; i < mu.size(); ++i)
                if (current.violations[i] > current.violations[worst]) worst = i;
            mu[worst] *= options.penalty_growth;
        }
        if (current.all) return sigma;
        return std::nullopt;
    };

    auto full = attempt(1.0);
    if (!full) {
        SynthesisResult r = make_result(problem, b, problem.human, std::move(trace));
        r.status = SynthesisStatus::SolverLimit;
        r.trace.notes.push_back("local search found no satisfying strategy inside the blending box");
        return r;
    }
    std::vector<LocalDist> best = std::move(*full);
    double lo = 0.0, hi = 1.0;
    while (hi - lo > options.resolution && budget > 0) {
        const double mid = 0.5 * (lo + hi);
        if (auto found = attempt(mid)) {
            hi = mid;
            best = std::move(*found);
        } else {
            lo = mid;
        }
    }
    trace.final_residual = hi - lo;
    if (budget == 0) trace.notes.push_back("iteration budget exhausted; deviation bound may not be tight");
    return make_result(problem, b, detail::from_aligned(m, best), std::move(trace));
}

SynthesisResult generalized_blending(const SynthesisProblem& problem, BlendingMode mode,
                                     const GeneralizedOptions& options) {
    if (problem.model == nullptr) throw InvalidInput("synthesis problem has no model");
    const Mdp& m = problem.mdp();
    const std::size_t n = m.num_states();
    SynthesisProblem base = problem;
    base.blending = BlendingFunction::constant(n, 1.0);
    validate_problem(base);
    const bool exact = is_single_upper_reach(problem);
    std::size_t calls = 0;

    auto with = [&](const BlendingFunction& b) {
        SynthesisProblem q = base;
        q.blending = b;
        return q;
    };
    auto feasible = [&](const BlendingFunction& b) {
        ++calls;
        const SynthesisProblem q = with(b);
        if (exact) {
            const auto& spec = std::get<SafetyReach>(q.specs.front());
            return min_reach_over_box(q, spec.target, 1.0, options.exact).value <= spec.bound;
        }
        return synthesize_general(q, options.general).status == SynthesisStatus::Feasible;
    };
    auto solve = [&](const BlendingFunction& b) {
        const SynthesisProblem q = with(b);
        return exact ? synthesize_reachability(q, options.exact) : synthesize_general(q, options.general);
    };
    auto finish = [&](SynthesisResult r) {
        r.trace.method = mode == BlendingMode::UniformMax ? "uniform-max blending" : "per-state blending";
        r.trace.iterations += calls;
        return r;
    };

    if (all_satisfied(check(m, problem.human, problem.specs))) {
        SolverTrace trace;
        trace.notes.push_back("human strategy already satisfies the specifications");
        return finish(make_result(base, BlendingFunction::constant(n, 1.0), problem.human, std::move(trace)));
    }

    const BlendingFunction zero = BlendingFunction::constant(n, 0.0);
    if (!feasible(zero)) {
        SynthesisResult r = solve(zero);
        if (exact) r.status = SynthesisStatus::Infeasible;
        if (r.status == SynthesisStatus::Feasible) r.status = SynthesisStatus::SolverLimit;
        r.trace.notes.push_back("no strategy satisfies the specifications even with zero human weight");
        return finish(std::move(r));
    }

    if (mode == BlendingMode::UniformMax) {
        double lo = 0.0, hi = 1.0;
        while (hi - lo > options.exact.resolution) {
            const double mid = 0.5 * (lo + hi);
            if (feasible(BlendingFunction::constant(n, mid)))
                lo = mid;
            else
                hi = mid;
        }
        return finish(solve(BlendingFunction::constant(n, lo)));
    }

    BlendingFunction weights = zero;
    for (StateIndex s = 0; s < n; ++s)
        if (m.choices(s).size() < 2) weights.set(s, 1.0);
    for (StateIndex s = 0; s < n; ++s) {
        if (m.choices(s).size() < 2) continue;
        weights.set(s, 1.0);
        if (feasible(weights)) continue;
        double lo = 0.0, hi = 1.0;
        while (hi - lo > options.per_state_resolution) {
            const double mid = 0.5 * (lo + hi);
            weights.set(s, mid);
            if (feasible(weights))
                lo = mid;
            else
                hi = mid;
        }
        weights.set(s, lo);
    }
    return finish(solve(weights));
}

DeviationComparison compare_deviation(const SynthesisResult& exact, const SynthesisResult& repaired) {
    DeviationComparison c{exact.objective, repaired.objective, repaired.objective - exact.objective};
    if (exact.objective > repaired.objective + 1e-6)
        throw std::logic_error("exact objective " + format(exact.objective) + " exceeds repaired objective " +
                               format(repaired.objective));
    return c;
}

}  // namespace shctl
