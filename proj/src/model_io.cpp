#include "shctl/model_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace shctl {

namespace {

template <class T>
T field(const Json& obj, const char* key, const std::string& context) {
    if (!obj.is_object() || !obj.contains(key)) throw InvalidInput(context + ": missing key '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw InvalidInput(context + ": bad value for '" + key + "': " + e.what());
    }
}

ActionIndex action_by_name(const Mdp& model, const std::string& name, const std::string& context) {
    auto a = model.action_index(name);
    if (!a) throw InvalidInput(context + ": unknown action '" + name + "'");
    return *a;
}

std::optional<StateIndex> parse_index(const std::string& text) {
    std::string_view view = text;
    if (!view.empty() && view.front() == 's') view.remove_prefix(1);
    StateIndex value = 0;
    auto [ptr, ec] = std::from_chars(view.data(), view.data() + view.size(), value);
    if (ec != std::errc() || ptr != view.data() + view.size() || view.empty()) return std::nullopt;
    return value;
}

StateIndex state_key(const std::string& key, std::size_t num_states, const std::string& context) {
    auto s = parse_index(key);
    if (!s || *s >= num_states) throw InvalidInput(context + ": bad state key '" + key + "'");
    return *s;
}

}  // namespace

Mdp mdp_from_json(const Json& doc) {
    const auto num_states = field<std::size_t>(doc, "states", "model");
    const auto initial = field<StateIndex>(doc, "initial", "model");
    auto actions = field<std::vector<std::string>>(doc, "actions", "model");
    Mdp model(num_states, initial, actions);
    const auto& transitions = doc.at("transitions");
    if (!transitions.is_array()) throw InvalidInput("model: 'transitions' must be a list");
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        const std::string ctx = "transitions[" + std::to_string(i) + "]";
        const auto& t = transitions[i];
        model.add_transition(field<StateIndex>(t, "from", ctx),
                             action_by_name(model, field<std::string>(t, "action", ctx), ctx),
                             field<StateIndex>(t, "to", ctx), field<double>(t, "prob", ctx));
    }
    if (doc.contains("costs")) {
        const auto& costs = doc.at("costs");
        for (std::size_t i = 0; i < costs.size(); ++i) {
            const std::string ctx = "costs[" + std::to_string(i) + "]";
            const auto& c = costs[i];
            model.set_cost(field<StateIndex>(c, "from", ctx),
                           action_by_name(model, field<std::string>(c, "action", ctx), ctx),
                           field<double>(c, "cost", ctx));
        }
    }
    if (doc.contains("labels")) {
        for (const auto& [label, states] : doc.at("labels").items()) {
            for (const auto& s : states) model.add_label(label, s.get<StateIndex>());
        }
    }
    return model;
}

Json to_json(const Mdp& model) {
    Json doc;
    doc["states"] = model.num_states();
    doc["initial"] = model.initial();
    doc["actions"] = model.actions();
    Json transitions = Json::array();
    for (StateIndex s = 0; s < model.num_states(); ++s) {
        for (const auto& choice : model.choices(s)) {
            for (const auto& succ : choice.successors) {
                transitions.push_back({{"from", s},
                                       {"action", model.action_name(choice.action)},
                                       {"to", succ.state},
                                       {"prob", succ.probability}});
            }
        }
    }
    doc["transitions"] = std::move(transitions);
    if (model.has_costs()) {
        Json costs = Json::array();
        for (const auto& [key, cost] : model.cost_entries())
            costs.push_back({{"from", key.first}, {"action", model.action_name(key.second)}, {"cost", cost}});
        doc["costs"] = std::move(costs);
    }
    if (!model.labels().empty()) {
        Json labels = Json::object();
        for (const auto& [label, states] : model.labels()) labels[label] = states;
        doc["labels"] = std::move(labels);
    }
    return doc;
}

Strategy strategy_from_json(const Json& doc, const Mdp& model) {
    if (!doc.is_object()) throw InvalidInput("strategy: expected an object {state: {action: prob}}");
    Strategy sigma(model.num_states());
    for (const auto& [key, row] : doc.items()) {
        const StateIndex s = state_key(key, model.num_states(), "strategy");
        for (const auto& [action, p] : row.items()) {
            sigma.set(s, action_by_name(model, action, "strategy state " + key), p.get<double>());
        }
    }
    return sigma;
}

Json to_json(const Strategy& sigma, const Mdp& model) {
    Json doc = Json::object();
    for (StateIndex s = 0; s < sigma.num_states(); ++s) {
        Json row = Json::object();
        for (const auto& [a, p] : sigma.row(s)) row[model.action_name(a)] = p;
        doc[std::to_string(s)] = std::move(row);
    }
    return doc;
}

Json to_json(const Perturbation& delta, const Mdp& model) {
    Json doc = Json::object();
    for (StateIndex s = 0; s < delta.num_states(); ++s) {
        Json row = Json::object();
        for (const auto& [a, d] : delta.row(s)) row[model.action_name(a)] = d;
        doc[std::to_string(s)] = std::move(row);
    }
    return doc;
}

BlendingFunction blending_from_json(const Json& doc, std::size_t num_states) {
    if (doc.is_number()) return BlendingFunction::constant(num_states, doc.get<double>());
    if (!doc.is_object()) throw InvalidInput("blending: expected an object or a number");
    const double fallback = doc.value("default", 1.0);
    std::vector<double> weights(num_states, fallback);
    for (const auto& [key, w] : doc.items()) {
        if (key == "default") continue;
        weights[state_key(key, num_states, "blending")] = w.get<double>();
    }
    return BlendingFunction(std::move(weights));
}

Json to_json(const BlendingFunction& b) {
    Json doc = Json::object();
    for (StateIndex s = 0; s < b.num_states(); ++s) doc[std::to_string(s)] = b(s);
    return doc;
}

Json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput(path.string() + ": cannot open file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        std::size_t line = 1;
        std::size_t column = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw InvalidInput(path.string() + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                           e.what());
    }
}

void save_json_file(const std::filesystem::path& path, const Json& doc) {
    std::ofstream out(path);
    if (!out) throw InvalidInput(path.string() + ": cannot write file");
    out << doc.dump(2) << '\n';
}

Mdp load_mdp(const std::filesystem::path& path) {
    const Json doc = load_json_file(path);
    try {
        return mdp_from_json(doc);
    } catch (const InvalidInput& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

StateSet resolve_state_set(const Mdp& model, const std::string& name) {
    if (model.labels().count(name)) return model.label_set(name);
    if (auto s = parse_index(name); s && *s < model.num_states()) {
        StateSet set(model.num_states(), false);
        set[*s] = true;
        return set;
    }
    throw InvalidInput("unknown label or state '" + name + "'");
}

}  // namespace shctl
