#pragma once

#include "shctl/mdp.hpp"
#include "shctl/model_check.hpp"
#include "shctl/strategy.hpp"

#include <string>
#include <variant>
#include <vector>

namespace shctl {

/// Marker asking the synthesizer to compute the blending function itself.
struct SynthesizeBlending {};

struct SynthesisProblem {
    const Mdp* model = nullptr;  // not owned; must outlive the problem
    Strategy human;
    std::variant<BlendingFunction, SynthesizeBlending> blending;
    std::vector<Specification> specs;

    const Mdp& mdp() const { return *model; }
    bool has_fixed_blending() const { return std::holds_alternative<BlendingFunction>(blending); }
    const BlendingFunction& fixed_blending() const;
};

/// Throws InvalidInput unless the human strategy is valid for the model, the
/// blending covers every state and each specification is well formed.
void validate_problem(const SynthesisProblem& problem);

enum class SynthesisStatus { Feasible, Infeasible, SolverLimit };

const char* to_string(SynthesisStatus status);

struct SolverTrace {
    std::string method;
    std::size_t iterations = 0;
    double final_residual = 0.0;
    std::vector<std::string> notes;
};

struct SynthesisResult {
    SynthesisStatus status = SynthesisStatus::SolverLimit;
    Strategy autonomous;
    Strategy blended;
    Perturbation perturbation;
    double objective = 0.0;
    BlendingFunction blending;
    std::vector<CheckResult> certificates;
    SolverTrace trace;
};

/// Interval bounds on σ_ha(s)(·) implied by the blending constraint, one entry
/// per enabled action in model order.
struct LocalBox {
    std::vector<ActionIndex> actions;
    std::vector<double> lower;
    std::vector<double> upper;
};

LocalBox local_strategy_box(const SynthesisProblem& problem, StateIndex s);

/// Inverts the blending equation: σ_a = (σ_ha - b σ_h) / (1 - b), and σ_a := σ_h where b = 1.
Strategy recover_autonomous(const Mdp& model, const Strategy& human, const Strategy& blended,
                            const BlendingFunction& b);

/// Packs a blended strategy into a result: derives σ_a and δ, computes the
/// objective and certificates. Status is Feasible iff every certificate holds.
SynthesisResult make_result(const SynthesisProblem& problem, const BlendingFunction& b, Strategy blended,
                            SolverTrace trace);

struct MinReachResult {
    double value = 0.0;
    Strategy witness;
    std::size_t iterations = 0;
};

struct ExactOptions {
    double resolution = 1e-6;
    double vi_tolerance = 1e-10;
    std::size_t vi_max_iterations = 1'000'000;
};

/// Minimum probability of reaching `target` over all blended strategies
/// within the local boxes, additionally capped to |σ_ha - σ_h| <= deviation_cap.
MinReachResult min_reach_over_box(const SynthesisProblem& problem, const StateSet& target,
                                  double deviation_cap = 1.0, const ExactOptions& options = {});

/// Exact solver for a single P<=λ [F T] specification: bisection over the
/// deviation bound with min_reach_over_box as feasibility oracle.
SynthesisResult synthesize_reachability(const SynthesisProblem& problem, const ExactOptions& options = {});

struct GeneralOptions {
    std::size_t max_outer_iterations = 10'000;
    double resolution = 1e-6;
    double initial_penalty = 1.0;
    double penalty_growth = 10.0;
};

/// Penalty-based local search for arbitrary mixes of specifications.
/// Never reports Infeasible; failure is SolverLimit.
SynthesisResult synthesize_general(const SynthesisProblem& problem, const GeneralOptions& options = {});

enum class BlendingMode { PerState, UniformMax };

struct GeneralizedOptions {
    ExactOptions exact;
    GeneralOptions general;
    double per_state_resolution = 1e-3;
};

/// Computes a blending function together with the strategies. UniformMax
/// returns the largest constant weight that keeps the problem feasible.
SynthesisResult generalized_blending(const SynthesisProblem& problem, BlendingMode mode,
                                     const GeneralizedOptions& options = {});

/// Entrywise minimum and maximum of P(s, α)(s') over the enabled actions.
struct RepairBounds {
    struct Entry {
        StateIndex state;
        double p_min;
        double p_max;
    };
    std::vector<std::vector<Entry>> rows;

    double p_min(StateIndex s, StateIndex t) const;
    double p_max(StateIndex s, StateIndex t) const;
    /// True if every transition of `chain` lies within [p_min, p_max] (+tol).
    bool contains(const MarkovChain& chain, double tolerance = 1e-12) const;
};

RepairBounds repair_bounds(const Mdp& model);

struct RepairOptions {
    double budget = 1.0;          // δ_r: per-entry cap on |σ_ha - σ_h|
    double step = 0.05;           // η: per-entry change per greedy move
    double batch_fraction = 0.05; // share of improvable states moved per iteration
    double discount = 0.99;       // visitation weight used to rank states
    std::size_t max_iterations = 100'000;
};

/// Greedy local repair in strategy space followed by the linear program with
/// frozen state values, and a final verification.
SynthesisResult repair_synthesize(const SynthesisProblem& problem, const RepairOptions& options = {});

struct DeviationComparison {
    double exact_objective = 0.0;
    double repaired_objective = 0.0;
    double gap = 0.0;
};

/// Throws std::logic_error if the exact objective exceeds the repaired one by more than 1e-6.
DeviationComparison compare_deviation(const SynthesisResult& exact, const SynthesisResult& repaired);

}  // namespace shctl
