#include "shctl/explicit_format.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace shctl {

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw InvalidInput("cannot write " + p.string());
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    return out;
}

[[noreturn]] void fail(const std::filesystem::path& p, std::size_t line, const std::string& what) {
    throw InvalidInput(p.string() + ":" + std::to_string(line) + ": " + what);
}

// Calls fn(stream, line_no) for every non-blank line.
template <class F>
void each_line(const std::filesystem::path& p, F fn) {
    std::ifstream in(p);
    if (!in) throw InvalidInput("cannot open " + p.string());
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        fn(ls, no);
    }
}

}  // namespace

ExplicitPaths explicit_paths(const std::filesystem::path& prefix) {
    auto with = [&](const char* ext) { return std::filesystem::path(prefix.string() + ext); };
    return {with(".sta"), with(".tra"), with(".lab"), with(".cst")};
}

void export_explicit(const Mdp& model, const std::filesystem::path& prefix) {
    const ExplicitPaths p = explicit_paths(prefix);
    {
        auto out = open_out(p.states);
        out << model.num_states() << "\ninitial " << model.initial() << "\nactions";
        for (const auto& a : model.actions()) out << ' ' << a;
        out << '\n';
    }
    {
        auto out = open_out(p.transitions);
        for (StateIndex s = 0; s < model.num_states(); ++s)
            for (const auto& c : model.choices(s))
                for (const auto& succ : c.successors) out << s << ' ' << c.action << ' ' << succ.state << ' ' << succ.probability << '\n';
    }
    {
        auto out = open_out(p.labels);
        for (const auto& [label, states] : model.labels())
            for (StateIndex s : states) out << s << ' ' << label << '\n';
    }
    std::filesystem::remove(p.costs);
    if (model.has_costs()) {
        auto out = open_out(p.costs);
        for (const auto& [key, cost] : model.cost_entries()) out << key.first << ' ' << key.second << ' ' << cost << '\n';
    }
}

Mdp import_explicit(const std::filesystem::path& prefix) {
    const ExplicitPaths p = explicit_paths(prefix);
    std::size_t count = 0;
    StateIndex initial = 0;
    std::vector<std::string> actions;
    int header = 0;
    each_line(p.states, [&](std::istringstream& ls, std::size_t no) {
        std::string key;
        if (header == 0) {
            if (!(ls >> count) || count == 0) fail(p.states, no, "expected a positive state count");
        } else if (header == 1) {
            if (!(ls >> key >> initial) || key != "initial") fail(p.states, no, "expected 'initial K'");
        } else if (header == 2) {
            if (!(ls >> key) || key != "actions") fail(p.states, no, "expected 'actions ...'");
            for (std::string a; ls >> a;) actions.push_back(a);
        } else {
            fail(p.states, no, "unexpected content");
        }
        ++header;
    });
    if (header < 3) throw InvalidInput(p.states.string() + ": incomplete header");
    if (initial >= count) throw InvalidInput(p.states.string() + ": initial state out of range");

    Mdp model(count, initial, actions);
    each_line(p.transitions, [&](std::istringstream& ls, std::size_t no) {
        StateIndex from = 0, to = 0;
        ActionIndex a = 0;
        double prob = 0.0;
        if (!(ls >> from >> a >> to >> prob)) fail(p.transitions, no, "expected 'from action_index to prob'");
        try {
            model.add_transition(from, a, to, prob);
        } catch (const InvalidInput& e) {
            fail(p.transitions, no, e.what());
        }
    });
    each_line(p.labels, [&](std::istringstream& ls, std::size_t no) {
        StateIndex s = 0;
        std::string label;
        if (!(ls >> s >> label)) fail(p.labels, no, "expected 'state label'");
        try {
            model.add_label(label, s);
        } catch (const InvalidInput& e) {
            fail(p.labels, no, e.what());
        }
    });
    if (std::filesystem::exists(p.costs)) {
        each_line(p.costs, [&](std::istringstream& ls, std::size_t no) {
            StateIndex s = 0;
            ActionIndex a = 0;
            double c = 0.0;
            if (!(ls >> s >> a >> c)) fail(p.costs, no, "expected 'state action_index cost'");
            try {
                model.set_cost(s, a, c);
            } catch (const InvalidInput& e) {
                fail(p.costs, no, e.what());
            }
        });
    }
    return model;
}

}  // namespace shctl
