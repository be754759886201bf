#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace shctl {

using StateIndex = std::uint32_t;
using ActionIndex = std::uint32_t;
using StateSet = std::vector<bool>;

/// Tolerance for distribution sums when validating models and strategies.
inline constexpr double kDistributionTolerance = 1e-9;

/// Thrown for malformed models, strategies, specifications, and input files.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Successor {
    StateIndex state;
    double probability;
};

using Distribution = std::vector<Successor>;

/// One enabled action at a state together with its successor distribution.
struct Choice {
    ActionIndex action;
    Distribution successors;
};

/// Finite MDP with a global action alphabet, partial transition function and
/// optional non-negative transition costs. Choices of each state are kept
/// sorted by action index; successors of each choice are sorted by state.
class Mdp {
public:
    Mdp() = default;
    Mdp(std::size_t num_states, StateIndex initial, std::vector<std::string> actions);

    /// Adds probability mass to P(from, action)(to), enabling the action if needed.
    void add_transition(StateIndex from, ActionIndex action, StateIndex to, double probability);
    /// Enables `action` at `state` with an empty distribution (used by importers).
    void enable(StateIndex state, ActionIndex action);
    void set_cost(StateIndex state, ActionIndex action, double cost);
    void add_label(const std::string& label, StateIndex state);

    std::size_t num_states() const { return choices_.size(); }
    StateIndex initial() const { return initial_; }
    const std::vector<std::string>& actions() const { return actions_; }
    std::optional<ActionIndex> action_index(const std::string& name) const;
    const std::string& action_name(ActionIndex a) const { return actions_.at(a); }

    std::span<const Choice> choices(StateIndex s) const { return choices_.at(s); }
    const Choice* find_choice(StateIndex s, ActionIndex a) const;
    bool enabled(StateIndex s, ActionIndex a) const { return find_choice(s, a) != nullptr; }
    std::size_t num_transitions() const;

    bool has_costs() const { return !costs_.empty(); }
    /// Cost of an enabled pair; 0 when the model carries no entry for it.
    double cost(StateIndex s, ActionIndex a) const;
    const std::map<std::pair<StateIndex, ActionIndex>, double>& cost_entries() const { return costs_; }

    const std::map<std::string, std::vector<StateIndex>>& labels() const { return labels_; }
    /// Membership vector for a label; throws InvalidInput for unknown labels.
    StateSet label_set(const std::string& label) const;

    friend bool operator==(const Mdp& lhs, const Mdp& rhs);

private:
    Choice& choice_for(StateIndex s, ActionIndex a);
    void check_state(StateIndex s) const;
    void check_action(ActionIndex a) const;

    StateIndex initial_ = 0;
    std::vector<std::string> actions_;
    std::vector<std::vector<Choice>> choices_;
    std::map<std::pair<StateIndex, ActionIndex>, double> costs_;
    std::map<std::string, std::vector<StateIndex>> labels_;
};

/// A diagnostic found by validate_mdp / validate_chain / validate_strategy.
struct Violation {
    std::string message;
    std::optional<StateIndex> state;
    std::optional<ActionIndex> action;
};

/// Empty iff the model is deadlock free, every distribution is a proper
/// distribution and every cost entry is non-negative on an enabled pair.
std::vector<Violation> validate_mdp(const Mdp& model);

/// Discrete-time Markov chain with sparse rows and optional state costs.
struct MarkovChain {
    StateIndex initial = 0;
    std::vector<Distribution> rows;
    std::optional<std::vector<double>> costs;

    std::size_t num_states() const { return rows.size(); }
    /// P(s, s'), linear in the row length.
    double probability(StateIndex s, StateIndex t) const;
};

std::vector<Violation> validate_chain(const MarkovChain& chain);

StateSet make_state_set(std::size_t num_states, std::span<const StateIndex> members);
std::vector<StateIndex> members(const StateSet& set);

/// "s3" style name used in diagnostics.
std::string state_name(StateIndex s);

}  // namespace shctl
