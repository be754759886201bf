#include "shctl/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace shctl {

namespace {

std::string where(StateIndex s, ActionIndex a, const Mdp* model = nullptr) {
    std::string action = model ? model->action_name(a) : "a" + std::to_string(a);
    return "(" + state_name(s) + "," + action + ")";
}

template <class Fn>
void for_union(std::span<const ActionValue> lhs, std::span<const ActionValue> rhs, Fn&& fn) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < lhs.size() || j < rhs.size()) {
        if (j == rhs.size() || (i < lhs.size() && lhs[i].action < rhs[j].action)) {
            fn(lhs[i].action, lhs[i].value, 0.0);
            ++i;
        } else if (i == lhs.size() || rhs[j].action < lhs[i].action) {
            fn(rhs[j].action, 0.0, rhs[j].value);
            ++j;
        } else {
            fn(lhs[i].action, lhs[i].value, rhs[j].value);
            ++i;
            ++j;
        }
    }
}

void require_same_domain(std::size_t lhs, std::size_t rhs, const char* what) {
    if (lhs != rhs) {
        throw InvalidInput(std::string(what) + ": domain mismatch (" + std::to_string(lhs) + " vs " +
                           std::to_string(rhs) + " states)");
    }
}

}  // namespace

BlendingFunction::BlendingFunction(std::vector<double> weights) : weights_(std::move(weights)) {
    for (StateIndex s = 0; s < weights_.size(); ++s)
        if (!(weights_[s] >= 0.0 && weights_[s] <= 1.0))
            throw InvalidInput("blending weight outside [0,1] at " + state_name(s));
}

BlendingFunction BlendingFunction::constant(std::size_t num_states, double weight) {
    return BlendingFunction(std::vector<double>(num_states, weight));
}

void BlendingFunction::set(StateIndex s, double weight) {
    if (!(weight >= 0.0 && weight <= 1.0)) throw InvalidInput("blending weight outside [0,1] at " + state_name(s));
    weights_.at(s) = weight;
}

Strategy uniform_strategy(const Mdp& model) {
    Strategy sigma(model.num_states());
    for (StateIndex s = 0; s < model.num_states(); ++s) {
        const auto choices = model.choices(s);
        for (const auto& choice : choices) sigma.set(s, choice.action, 1.0 / static_cast<double>(choices.size()));
    }
    return sigma;
}

Strategy deterministic_strategy(const Mdp& model, std::span<const ActionIndex> action_per_state) {
    Strategy sigma(model.num_states());
    for (StateIndex s = 0; s < model.num_states(); ++s) {
        const auto choices = model.choices(s);
        if (choices.empty()) continue;
        ActionIndex a = choices.front().action;
        if (s < action_per_state.size() && model.enabled(s, action_per_state[s])) a = action_per_state[s];
        sigma.set(s, a, 1.0);
    }
    return sigma;
}

std::vector<Violation> validate_strategy(const Mdp& model, const Strategy& sigma) {
    std::vector<Violation> report;
    if (sigma.num_states() != model.num_states()) {
        report.push_back({"strategy covers " + std::to_string(sigma.num_states()) + " states, model has " +
                              std::to_string(model.num_states()),
                          std::nullopt, std::nullopt});
        return report;
    }
    for (StateIndex s = 0; s < model.num_states(); ++s) {
        double sum = 0.0;
        for (const auto& [a, p] : sigma.row(s)) {
            if (a >= model.actions().size()) {
                report.push_back({"unknown action index at " + state_name(s), s, a});
                continue;
            }
            if (!(p >= 0.0 && p <= 1.0)) {
                report.push_back({"probability outside [0,1] at " + where(s, a, &model), s, a});
            }
            if (p > 0.0 && !model.enabled(s, a)) {
                report.push_back({"disabled action with positive probability at " + where(s, a, &model), s, a});
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > kDistributionTolerance) {
            std::ostringstream os;
            os << "strategy row sum " << sum << " at " << state_name(s);
            report.push_back({os.str(), s, std::nullopt});
        }
    }
    return report;
}

void require_valid_strategy(const Mdp& model, const Strategy& sigma) {
    auto report = validate_strategy(model, sigma);
    if (!report.empty()) throw InvalidInput(report.front().message);
}

MarkovChain induce_mc(const Mdp& model, const Strategy& sigma) {
    require_valid_strategy(model, sigma);
    MarkovChain chain;
    chain.initial = model.initial();
    chain.rows.resize(model.num_states());
    if (model.has_costs()) chain.costs.emplace(model.num_states(), 0.0);
    std::vector<double> dense(model.num_states(), 0.0);
    std::vector<StateIndex> touched;
    for (StateIndex s = 0; s < model.num_states(); ++s) {
        touched.clear();
        for (const auto& [a, p] : sigma.row(s)) {
            if (p == 0.0) continue;
            const Choice* choice = model.find_choice(s, a);
            for (const auto& succ : choice->successors) {
                if (dense[succ.state] == 0.0) touched.push_back(succ.state);
                dense[succ.state] += p * succ.probability;
            }
            if (chain.costs) (*chain.costs)[s] += p * model.cost(s, a);
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        auto& row = chain.rows[s];
        row.reserve(touched.size());
        for (StateIndex t : touched) {
            if (dense[t] > 0.0) row.push_back({t, dense[t]});
            dense[t] = 0.0;
        }
    }
    return chain;
}

Strategy blend(const Strategy& human, const Strategy& autonomous, const BlendingFunction& b) {
    require_same_domain(human.num_states(), autonomous.num_states(), "blend");
    require_same_domain(human.num_states(), b.num_states(), "blend");
    Strategy out(human.num_states());
    for (StateIndex s = 0; s < human.num_states(); ++s) {
        const double w = b(s);
        for_union(human.row(s), autonomous.row(s), [&](ActionIndex a, double h, double x) {
            // Written as x + w (h - x) so that w = 0, w = 1 and h = x are exact.
            double v = w == 1.0 ? h : (w == 0.0 ? x : x + w * (h - x));
            out.set(s, a, v);
        });
    }
    return out;
}

Strategy apply_perturbation(const Strategy& sigma, const Perturbation& delta) {
    require_same_domain(sigma.num_states(), delta.num_states(), "apply_perturbation");
    Strategy out(sigma.num_states());
    for (StateIndex s = 0; s < sigma.num_states(); ++s) {
        double row_sum = 0.0;
        for (const auto& entry : delta.row(s)) row_sum += entry.value;
        if (std::abs(row_sum) > kDistributionTolerance) {
            std::ostringstream os;
            os << "perturbation row sum " << row_sum << " at " << state_name(s);
            throw InvalidInput(os.str());
        }
        for_union(sigma.row(s), delta.row(s), [&](ActionIndex a, double p, double d) {
            double v = p + d;
            if (v < -kAlgebraTolerance || v > 1.0 + kAlgebraTolerance) {
                std::ostringstream os;
                os << "perturbed probability " << v << " outside [0,1] at " << where(s, a);
                throw InvalidInput(os.str());
            }
            out.set(s, a, std::clamp(v, 0.0, 1.0));
        });
    }
    return out;
}

Perturbation perturbation_between(const Strategy& from, const Strategy& to) {
    require_same_domain(from.num_states(), to.num_states(), "perturbation_between");
    Perturbation delta(from.num_states());
    for (StateIndex s = 0; s < from.num_states(); ++s) {
        for_union(from.row(s), to.row(s), [&](ActionIndex a, double p, double q) { delta.set(s, a, q - p); });
    }
    return delta;
}

double deviation_inf_norm(const Perturbation& delta) {
    double norm = 0.0;
    for (StateIndex s = 0; s < delta.num_states(); ++s)
        for (const auto& entry : delta.row(s)) norm = std::max(norm, std::abs(entry.value));
    return norm;
}

std::vector<Violation> validate_perturbation(const Perturbation& delta) {
    std::vector<Violation> report;
    for (StateIndex s = 0; s < delta.num_states(); ++s) {
        double sum = 0.0;
        for (const auto& [a, d] : delta.row(s)) {
            if (!(d >= -1.0 && d <= 1.0)) report.push_back({"perturbation outside [-1,1] at " + where(s, a), s, a});
            sum += d;
        }
        if (std::abs(sum) > kDistributionTolerance)
            report.push_back({"perturbation row sum nonzero at " + state_name(s), s, std::nullopt});
    }
    return report;
}

double max_abs_difference(const Strategy& lhs, const Strategy& rhs) {
    require_same_domain(lhs.num_states(), rhs.num_states(), "max_abs_difference");
    double worst = 0.0;
    for (StateIndex s = 0; s < lhs.num_states(); ++s) {
        for_union(lhs.row(s), rhs.row(s),
                  [&](ActionIndex, double p, double q) { worst = std::max(worst, std::abs(p - q)); });
    }
    return worst;
}

}  // namespace shctl
