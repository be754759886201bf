#include "shctl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace shctl {

namespace {

void add_mass(Distribution& dist, StateIndex to, double probability) {
    auto it = std::lower_bound(dist.begin(), dist.end(), to,
                               [](const Successor& succ, StateIndex s) { return succ.state < s; });
    if (it != dist.end() && it->state == to) {
        it->probability += probability;
    } else {
        dist.insert(it, Successor{to, probability});
    }
}

std::string format_number(double value) {
    std::ostringstream os;
    os << value;
    return os.str();
}

}  // namespace

std::string state_name(StateIndex s) { return "s" + std::to_string(s); }

Mdp::Mdp(std::size_t num_states, StateIndex initial, std::vector<std::string> actions)
    : initial_(initial), actions_(std::move(actions)), choices_(num_states) {
    if (num_states == 0) throw InvalidInput("model must have at least one state");
    check_state(initial);
}

void Mdp::check_state(StateIndex s) const {
    if (s >= choices_.size()) {
        throw InvalidInput("state index " + std::to_string(s) + " out of range (" +
                           std::to_string(choices_.size()) + " states)");
    }
}

void Mdp::check_action(ActionIndex a) const {
    if (a >= actions_.size()) throw InvalidInput("action index " + std::to_string(a) + " out of range");
}

Choice& Mdp::choice_for(StateIndex s, ActionIndex a) {
    check_state(s);
    check_action(a);
    auto& row = choices_[s];
    auto it = std::lower_bound(row.begin(), row.end(), a,
                               [](const Choice& c, ActionIndex act) { return c.action < act; });
    if (it == row.end() || it->action != a) it = row.insert(it, Choice{a, {}});
    return *it;
}

void Mdp::add_transition(StateIndex from, ActionIndex action, StateIndex to, double probability) {
    check_state(to);
    add_mass(choice_for(from, action).successors, to, probability);
}

void Mdp::enable(StateIndex state, ActionIndex action) { choice_for(state, action); }

void Mdp::set_cost(StateIndex state, ActionIndex action, double cost) {
    check_state(state);
    check_action(action);
    costs_[{state, action}] = cost;
}

void Mdp::add_label(const std::string& label, StateIndex state) {
    check_state(state);
    auto& list = labels_[label];
    auto it = std::lower_bound(list.begin(), list.end(), state);
    if (it == list.end() || *it != state) list.insert(it, state);
}

std::optional<ActionIndex> Mdp::action_index(const std::string& name) const {
    auto it = std::find(actions_.begin(), actions_.end(), name);
    if (it == actions_.end()) return std::nullopt;
    return static_cast<ActionIndex>(it - actions_.begin());
}

const Choice* Mdp::find_choice(StateIndex s, ActionIndex a) const {
    const auto& row = choices_.at(s);
    auto it = std::lower_bound(row.begin(), row.end(), a,
                               [](const Choice& c, ActionIndex act) { return c.action < act; });
    if (it == row.end() || it->action != a) return nullptr;
    return &*it;
}

std::size_t Mdp::num_transitions() const {
    std::size_t total = 0;
    for (const auto& row : choices_)
        for (const auto& choice : row) total += choice.successors.size();
    return total;
}

double Mdp::cost(StateIndex s, ActionIndex a) const {
    auto it = costs_.find({s, a});
    return it == costs_.end() ? 0.0 : it->second;
}

StateSet Mdp::label_set(const std::string& label) const {
    auto it = labels_.find(label);
    if (it == labels_.end()) throw InvalidInput("unknown label '" + label + "'");
    return make_state_set(num_states(), it->second);
}

bool operator==(const Mdp& lhs, const Mdp& rhs) {
    if (lhs.initial_ != rhs.initial_ || lhs.actions_ != rhs.actions_ || lhs.costs_ != rhs.costs_ ||
        lhs.labels_ != rhs.labels_ || lhs.choices_.size() != rhs.choices_.size())
        return false;
    for (std::size_t s = 0; s < lhs.choices_.size(); ++s) {
        const auto& a = lhs.choices_[s];
        const auto& b = rhs.choices_[s];
        if (a.size() != b.size()) return false;
        for (std::size_t j = 0; j < a.size(); ++j) {
            if (a[j].action != b[j].action || a[j].successors.size() != b[j].successors.size())
                return false;
            for (std::size_t k = 0; k < a[j].successors.size(); ++k) {
                if (a[j].successors[k].state != b[j].successors[k].state ||
                    a[j].successors[k].probability != b[j].successors[k].probability)
                    return false;
            }
        }
    }
    return true;
}

std::vector<Violation> validate_mdp(const Mdp& model) {
    std::vector<Violation> report;
    for (StateIndex s = 0; s < model.num_states(); ++s) {
        const auto choices = model.choices(s);
        if (choices.empty()) {
            report.push_back({"deadlock state " + state_name(s), s, std::nullopt});
            continue;
        }
        for (const auto& choice : choices) {
            const std::string where = "(" + state_name(s) + "," + model.action_name(choice.action) + ")";
            double sum = 0.0;
            for (const auto& succ : choice.successors) {
                if (!(succ.probability >= 0.0 && succ.probability <= 1.0 + kDistributionTolerance)) {
                    report.push_back({"probability " + format_number(succ.probability) + " outside [0,1] at " +
                                          where + " -> " + state_name(succ.state),
                                      s, choice.action});
                }
                sum += succ.probability;
            }
            if (std::abs(sum - 1.0) > kDistributionTolerance) {
                report.push_back({"row sum " + format_number(sum) + " at " + where, s, choice.action});
            }
        }
    }
    for (const auto& [key, cost] : model.cost_entries()) {
        const auto [s, a] = key;
        const std::string where = "(" + state_name(s) + "," + model.action_name(a) + ")";
        if (!model.enabled(s, a)) report.push_back({"cost on disabled pair " + where, s, a});
        if (!(cost >= 0.0)) report.push_back({"negative cost " + format_number(cost) + " at " + where, s, a});
    }
    return report;
}

double MarkovChain::probability(StateIndex s, StateIndex t) const {
    for (const auto& succ : rows.at(s))
        if (succ.state == t) return succ.probability;
    return 0.0;
}

std::vector<Violation> validate_chain(const MarkovChain& chain) {
    std::vector<Violation> report;
    for (StateIndex s = 0; s < chain.num_states(); ++s) {
        double sum = 0.0;
        for (const auto& succ : chain.rows[s]) {
            if (!(succ.probability >= 0.0 && succ.probability <= 1.0 + kDistributionTolerance))
                report.push_back({"probability outside [0,1] in row " + state_name(s), s, std::nullopt});
            sum += succ.probability;
        }
        if (std::abs(sum - 1.0) > kDistributionTolerance)
            report.push_back({"row sum " + format_number(sum) + " at " + state_name(s), s, std::nullopt});
    }
    if (chain.costs) {
        for (StateIndex s = 0; s < chain.costs->size(); ++s)
            if (!((*chain.costs)[s] >= 0.0)) report.push_back({"negative cost at " + state_name(s), s, std::nullopt});
    }
    return report;
}

StateSet make_state_set(std::size_t num_states, std::span<const StateIndex> members) {
    StateSet set(num_states, false);
    for (StateIndex s : members) {
        if (s >= num_states) throw InvalidInput("state set member " + std::to_string(s) + " out of range");
        set[s] = true;
    }
    return set;
}

std::vector<StateIndex> members(const StateSet& set) {
    std::vector<StateIndex> out;
    for (StateIndex s = 0; s < set.size(); ++s)
        if (set[s]) out.push_back(s);
    return out;
}

}  // namespace shctl
