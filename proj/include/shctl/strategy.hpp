#pragma once

#include "shctl/mdp.hpp"

#include <span>
#include <vector>

namespace shctl {

/// Tolerance for algebraic round trips (blend, perturb, difference).
inline constexpr double kAlgebraTolerance = 1e-12;

struct ActionValue {
    ActionIndex action;
    double value;

    friend bool operator==(const ActionValue&, const ActionValue&) = default;
};

/// Sparse per-state table over actions. Entries are kept sorted by action;
/// actions without an entry read as 0.
template <class Tag>
class ActionMap {
public:
    ActionMap() = default;
    explicit ActionMap(std::size_t num_states) : rows_(num_states) {}

    std::size_t num_states() const { return rows_.size(); }
    std::span<const ActionValue> row(StateIndex s) const { return rows_.at(s); }

    double operator()(StateIndex s, ActionIndex a) const {
        for (const auto& entry : rows_.at(s))
            if (entry.action == a) return entry.value;
        return 0.0;
    }

    void set(StateIndex s, ActionIndex a, double value) {
        auto& row = rows_.at(s);
        auto it = row.begin();
        while (it != row.end() && it->action < a) ++it;
        if (it != row.end() && it->action == a) {
            it->value = value;
        } else {
            row.insert(it, ActionValue{a, value});
        }
    }

    void clear_row(StateIndex s) { rows_.at(s).clear(); }

    friend bool operator==(const ActionMap&, const ActionMap&) = default;

private:
    std::vector<std::vector<ActionValue>> rows_;
};

struct StrategyTag {};
struct PerturbationTag {};

/// Memoryless randomized strategy: state -> distribution over actions.
using Strategy = ActionMap<StrategyTag>;
/// Additive zero-sum change of a strategy, values in [-1, 1].
using Perturbation = ActionMap<PerturbationTag>;

/// Per-state confidence in the human's decisions, b(s) in [0, 1].
class BlendingFunction {
public:
    BlendingFunction() = default;
    explicit BlendingFunction(std::vector<double> weights);
    static BlendingFunction constant(std::size_t num_states, double weight);

    std::size_t num_states() const { return weights_.size(); }
    double operator()(StateIndex s) const { return weights_.at(s); }
    void set(StateIndex s, double weight);
    const std::vector<double>& weights() const { return weights_; }

private:
    std::vector<double> weights_;
};

Strategy uniform_strategy(const Mdp& model);
/// Picks the named action at each listed state and the first enabled action elsewhere.
Strategy deterministic_strategy(const Mdp& model, std::span<const ActionIndex> action_per_state);

std::vector<Violation> validate_strategy(const Mdp& model, const Strategy& sigma);
/// Throws InvalidInput naming the first violation.
void require_valid_strategy(const Mdp& model, const Strategy& sigma);

/// Markov chain induced by resolving the model's nondeterminism with `sigma`.
MarkovChain induce_mc(const Mdp& model, const Strategy& sigma);

/// b(s) * human(s) + (1 - b(s)) * autonomous(s).
Strategy blend(const Strategy& human, const Strategy& autonomous, const BlendingFunction& b);

Strategy apply_perturbation(const Strategy& sigma, const Perturbation& delta);
Perturbation perturbation_between(const Strategy& from, const Strategy& to);
double deviation_inf_norm(const Perturbation& delta);

/// Row sums and range checks for a perturbation.
std::vector<Violation> validate_perturbation(const Perturbation& delta);

/// max over states and actions of |lhs(s)(a) - rhs(s)(a)|.
double max_abs_difference(const Strategy& lhs, const Strategy& rhs);

}  // namespace shctl
