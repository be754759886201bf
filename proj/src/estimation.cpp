#include "shctl/estimation.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace shctl {

namespace {

double transition_probability(const Mdp& model, StateIndex s, ActionIndex a, StateIndex t) {
    const Choice* c = model.find_choice(s, a);
    if (c == nullptr) return 0.0;
    for (const auto& succ : c->successors)
        if (succ.state == t) return succ.probability;
    return 0.0;
}

std::string step_name(std::size_t i) { return "step " + std::to_string(i); }

}  // namespace

std::vector<Violation> validate_trajectory(const Mdp& model, const Trajectory& trajectory) {
    std::vector<Violation> report;
    const auto n = model.num_states();
    for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
        const auto& st = trajectory.steps[i];
        if (st.state >= n || st.next >= n) {
            report.push_back({step_name(i) + ": state out of range", std::nullopt, std::nullopt});
            continue;
        }
        if (st.action >= model.actions().size() || !model.enabled(st.state, st.action)) {
            report.push_back({step_name(i) + ": action disabled at " + state_name(st.state), st.state, st.action});
            continue;
        }
        if (transition_probability(model, st.state, st.action, st.next) <= 0.0)
            report.push_back({step_name(i) + ": " + state_name(st.next) + " is not a successor of (" +
                                  state_name(st.state) + "," + model.action_name(st.action) + ")",
                              st.state, st.action});
        if (i > 0 && trajectory.steps[i - 1].next != st.state)
            report.push_back({step_name(i) + ": does not continue from " + state_name(trajectory.steps[i - 1].next),
                              st.state, std::nullopt});
    }
    return report;
}

Trajectory record_trajectory(const Mdp& model, const std::vector<RecordedEvent>& events) {
    Trajectory t;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        const auto a = model.action_index(e.action);
        if (!a) throw InvalidInput(step_name(i) + ": unknown action '" + e.action + "'");
        t.steps.push_back({e.state, *a, e.next});
    }
    const auto report = validate_trajectory(model, t);
    if (!report.empty()) throw InvalidInput(report.front().message);
    return t;
}

Strategy estimate_strategy(const Mdp& model, const std::vector<Trajectory>& trajectories, double smoothing) {
    if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) throw InvalidInput("smoothing must be non-negative");
    const std::size_t n = model.num_states();
    std::vector<std::vector<double>> counts(n);
    for (StateIndex s = 0; s < n; ++s) counts[s].assign(model.choices(s).size(), 0.0);
    for (const auto& trajectory : trajectories) {
        const auto report = validate_trajectory(model, trajectory);
        if (!report.empty()) throw InvalidInput(report.front().message);
        for (const auto& st : trajectory.steps) {
            const auto choices = model.choices(st.state);
            for (std::size_t j = 0; j < choices.size(); ++j)
                if (choices[j].action == st.action) counts[st.state][j] += 1.0;
        }
    }
    Strategy sigma(n);
    for (StateIndex s = 0; s < n; ++s) {
        const auto choices = model.choices(s);
        double total = 0.0;
        for (double c : counts[s]) total += c + smoothing;
        for (std::size_t j = 0; j < choices.size(); ++j) {
            const double p = total > 0.0 ? (counts[s][j] + smoothing) / total : 1.0 / static_cast<double>(choices.size());
            sigma.set(s, choices[j].action, p);
        }
    }
    return sigma;
}

std::size_t hoeffding_sample_size(double epsilon, double delta) {
    if (!(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0))
        throw InvalidInput("epsilon and delta must lie in (0,1)");
    auto holds = [&](double m) { return 2.0 * std::exp(-2.0 * m * epsilon * epsilon) <= delta; };
    auto n = static_cast<std::size_t>(std::ceil(std::log(2.0 / delta) / (2.0 * epsilon * epsilon)));
    while (n > 1 && holds(static_cast<double>(n - 1))) --n;
    while (!holds(static_cast<double>(n))) ++n;
    return n;
}

TrajectoryFile load_trajectory_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    TrajectoryFile file;
    std::vector<RecordedEvent> current;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    auto flush = [&] {
        if (!current.empty()) file.trajectories.push_back(std::move(current));
        current.clear();
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) {
            flush();
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (!header) {
            if (first != "model" || !(ls >> file.model_path)) throw InvalidInput(where + ": expected 'model <path>'");
            header = true;
            continue;
        }
        RecordedEvent e{};
        std::string next;
        try {
            std::size_t used = 0;
            e.state = static_cast<StateIndex>(std::stoul(first, &used));
            if (used != first.size()) throw std::invalid_argument(first);
            if (!(ls >> e.action >> next)) throw std::invalid_argument(line);
            e.next = static_cast<StateIndex>(std::stoul(next, &used));
            if (used != next.size()) throw std::invalid_argument(next);
        } catch (const std::logic_error&) {
            throw InvalidInput(where + ": expected 'state action next'");
        }
        current.push_back(std::move(e));
    }
    flush();
    if (!header) throw InvalidInput(path.string() + ": missing 'model <path>' header");
    return file;
}

void save_trajectory_file(const std::filesystem::path& path, const std::string& model_path, const Mdp& model,
                          const std::vector<Trajectory>& trajectories) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << "model " << model_path << "\n";
    for (const auto& t : trajectories) {
        out << "\n";
        for (const auto& st : t.steps) out << st.state << ' ' << model.action_name(st.action) << ' ' << st.next << "\n";
    }
}

}  // namespace shctl
