#include "shctl/estimation.hpp"
#include "shctl/explicit_format.hpp"
#include "shctl/gridworld.hpp"
#include "shctl/http_server.hpp"
#include "shctl/model_check.hpp"
#include "shctl/model_io.hpp"
#include "shctl/report.hpp"
#include "shctl/service.hpp"
#include "shctl/spec_parser.hpp"
#include "shctl/synthesis.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <sstream>
#include <thread>

using namespace shctl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

/// SHCTL_LOG=debug turns on progress lines on stderr. Reports never carry timings.
bool debug_logging() {
    const char* level = std::getenv("SHCTL_LOG");
    return level != nullptr && std::string(level) == "debug";
}

void log_debug(const std::string& message) {
    if (debug_logging()) std::cerr << "[shctl] " << message << '\n';
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void emit(const Report& report, const std::string& output) {
    const std::string text = render(report);
    if (output.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(output);
    if (!out) throw InvalidInput(output + ": cannot write report");
    out << text;
}

void save_if(const std::string& path, const Json& doc) {
    if (!path.empty()) save_json_file(path, doc);
}

/// --spec descriptors plus the --reach-leq/--reach-geq/--cost-leq shortcuts.
struct SpecOptions {
    std::vector<std::string> descriptors;
    std::string reach_leq;
    std::string reach_geq;
    std::string cost_leq;
    std::string target;
    std::string goal;

    void attach(CLI::App* cmd) {
        cmd->add_option("--spec", descriptors, "property: 'P<=l [F T]', 'P>=l [!A U G]' or 'E<=k [F G]'");
        cmd->add_option("--reach-leq", reach_leq, "shortcut for P<=l [F target]")->check(CLI::Number);
        cmd->add_option("--reach-geq", reach_geq, "shortcut for P>=l [F target]")->check(CLI::Number);
        cmd->add_option("--cost-leq", cost_leq, "shortcut for E<=k [F goal]");
        cmd->add_option("--target", target, "label or sK index used by the reach shortcuts");
        cmd->add_option("--goal", goal, "label or sK index used by --cost-leq (defaults to --target)");
    }

    std::vector<std::string> texts() const {
        std::vector<std::string> out = descriptors;
        auto need = [](const std::string& name, const char* flag) {
            if (name.empty()) throw InvalidInput(std::string(flag) + " needs --target");
            return name;
        };
        if (!reach_leq.empty()) out.push_back("P<=" + reach_leq + " [F " + need(target, "--reach-leq") + "]");
        if (!reach_geq.empty()) out.push_back("P>=" + reach_geq + " [F " + need(target, "--reach-geq") + "]");
        if (!cost_leq.empty())
            out.push_back("E<=" + cost_leq + " [F " + need(goal.empty() ? target : goal, "--cost-leq") + "]");
        return out;
    }

    std::vector<Specification> parse(const Mdp& model, const std::vector<std::string>& text) const {
        std::vector<Specification> specs;
        for (const auto& t : text) specs.push_back(parse_spec(t, model));
        return specs;
    }
};

/// A number gives a constant weight; anything else is a blending JSON file.
BlendingFunction load_blending(const std::string& arg, std::size_t num_states) {
    try {
        std::size_t used = 0;
        const double w = std::stod(arg, &used);
        if (used == arg.size()) return BlendingFunction::constant(num_states, w);
    } catch (const std::invalid_argument&) {
    } catch (const std::out_of_range&) {
    }
    return blending_from_json(load_json_file(arg), num_states);
}

Strategy load_strategy(const std::string& path, const Mdp& model) {
    Strategy sigma = strategy_from_json(load_json_file(path), model);
    require_valid_strategy(model, sigma);
    return sigma;
}

void add_certificates(Report& report, const std::vector<CheckResult>& results, const std::vector<std::string>& text) {
    Json certs = Json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        report.add(text[i], format_number(r.value_at_initial) + (r.satisfied ? " (satisfied)" : " (NOT SATISFIED)"));
        certs.push_back(certificate_json(r, text[i]));
    }
    report.data["certificates"] = certs;
    report.data["all_satisfied"] = all_satisfied(results);
}

int status_exit(SynthesisStatus status) {
    switch (status) {
        case SynthesisStatus::Feasible: return kExitOk;
        case SynthesisStatus::Infeasible: return kExitInfeasible;
        case SynthesisStatus::SolverLimit: break;
    }
    std::cerr << "error: solver stopped without a verdict (see report notes)\n";
    return kExitError;
}

// --- check ---------------------------------------------------------------

struct CheckArgs {
    std::string model;
    std::string strategy;
    SpecOptions specs;
};

int run_check(const CheckArgs& a, const std::string& output) {
    const Mdp model = load_mdp(a.model);
    const Strategy sigma = a.strategy.empty() ? uniform_strategy(model) : load_strategy(a.strategy, model);
    const auto text = a.specs.texts();
    if (text.empty()) throw InvalidInput("check needs at least one property (--spec or a shortcut)");
    const auto results = check(model, sigma, a.specs.parse(model, text));
    Report report{"check"};
    report.add("model", a.model);
    report.add("strategy", a.strategy.empty() ? "uniform" : a.strategy);
    report.data["command"] = "check";
    add_certificates(report, results, text);
    emit(report, output);
    return kExitOk;
}

// --- synthesize / repair ---------------------------------------------------

struct SynthesizeArgs {
    std::string model;
    std::string human;
    std::string blend;
    bool uniform_max = false;
    bool per_state = false;
    std::string method = "exact";
    SpecOptions specs;
    double budget = 1.0;
    double step = 0.05;
    std::size_t max_iterations = 10'000;
    std::string save_autonomous;
    std::string save_blended;
    std::string save_blending;
};

int run_synthesize(const SynthesizeArgs& a, const std::string& output) {
    const Mdp model = load_mdp(a.model);
    const auto text = a.specs.texts();
    if (text.empty()) throw InvalidInput("synthesis needs at least one property (--spec or a shortcut)");
    SynthesisProblem problem{&model, load_strategy(a.human, model), SynthesizeBlending{}, a.specs.parse(model, text)};

    Stopwatch clock;
    SynthesisResult result;
    if (a.uniform_max || a.per_state) {
        if (a.uniform_max && a.per_state) throw InvalidInput("choose one of --uniform-max and --per-state");
        if (!a.blend.empty()) throw InvalidInput("--blend cannot be combined with a synthesized blending function");
        if (a.method == "repair") throw InvalidInput("the repair method needs a fixed --blend");
        GeneralizedOptions opts;
        opts.general.max_outer_iterations = a.max_iterations;
        result = generalized_blending(problem, a.uniform_max ? BlendingMode::UniformMax : BlendingMode::PerState, opts);
    } else {
        if (a.blend.empty()) throw InvalidInput("give --blend, --uniform-max or --per-state");
        problem.blending = load_blending(a.blend, model.num_states());
        if (a.method == "exact") {
            result = synthesize_reachability(problem);
        } else if (a.method == "general") {
            GeneralOptions opts;
            opts.max_outer_iterations = a.max_iterations;
            result = synthesize_general(problem, opts);
        } else {
            RepairOptions opts;
            opts.budget = a.budget;
            opts.step = a.step;
            result = repair_synthesize(problem, opts);
        }
    }
    log_debug(result.trace.method + ": " + std::to_string(result.trace.iterations) + " iterations in " +
              std::to_string(clock.seconds()) + " s");

    Report report{"synthesize"};
    report.add("model", a.model);
    report.add("human", a.human);
    report.data["command"] = "synthesize";
    describe_synthesis(report, result, model, text);
    emit(report, output);
    if (result.blended.num_states() != 0) {
        save_if(a.save_autonomous, to_json(result.autonomous, model));
        save_if(a.save_blended, to_json(result.blended, model));
        save_if(a.save_blending, to_json(result.blending));
    }
    return status_exit(result.status);
}

// --- blend ----------------------------------------------------------------

struct BlendArgs {
    std::string model;
    std::string human;
    std::string autonomous;
    std::string blend;
    SpecOptions specs;
    std::string save_blended;
};

int run_blend(const BlendArgs& a, const std::string& output) {
    const Mdp model = load_mdp(a.model);
    const Strategy human = load_strategy(a.human, model);
    const Strategy autonomous = load_strategy(a.autonomous, model);
    const BlendingFunction b = load_blending(a.blend, model.num_states());
    const Strategy blended = blend(human, autonomous, b);
    require_valid_strategy(model, blended);

    Report report{"blend"};
    report.add("model", a.model);
    report.add("deviation from human", deviation_inf_norm(perturbation_between(human, blended)));
    report.data["command"] = "blend";
    report.data["blended"] = to_json(blended, model);
    report.data["deviation"] = deviation_inf_norm(perturbation_between(human, blended));
    const auto text = a.specs.texts();
    if (!text.empty()) add_certificates(report, check(model, blended, a.specs.parse(model, text)), text);
    emit(report, output);
    save_if(a.save_blended, to_json(blended, model));
    return kExitOk;
}

// --- gridworld ------------------------------------------------------------

struct GridArgs {
    std::string scenario;
    double noise = 0.8;
    double lambda = 0.7;
    std::string save_model;
    std::string save_human;
};

int run_gridworld(const GridArgs& a, const std::string& output) {
    Stopwatch clock;
    const LabeledMdp grid = compile(load_scenario(a.scenario));
    log_debug("compiled " + std::to_string(grid.model.num_states()) + " states in " + std::to_string(clock.seconds()) +
              " s");
    const Strategy human = baseline_human_strategy(grid, a.noise);
    const Specification spec = safety_spec(grid, a.lambda);
    const auto results = check(grid.model, human, {spec});

    Report report{"gridworld"};
    report.add("scenario", a.scenario);
    report.add("grid", std::to_string(grid.scenario.width) + "x" + std::to_string(grid.scenario.height));
    report.add("states", std::to_string(grid.model.num_states()));
    report.add("transitions", std::to_string(grid.model.num_transitions()));
    report.add("crash states", std::to_string(members(grid.crash).size()));
    report.add("target states", std::to_string(members(grid.target).size()));
    report.add("human noise", a.noise);
    auto& d = report.data;
    d["command"] = "gridworld";
    d["states"] = grid.model.num_states();
    d["transitions"] = grid.model.num_transitions();
    d["crash_states"] = members(grid.crash).size();
    d["target_states"] = members(grid.target).size();
    add_certificates(report, results, {describe(spec)});
    emit(report, output);
    save_if(a.save_model, to_json(grid.model));
    save_if(a.save_human, to_json(human, grid.model));
    return kExitOk;
}

// --- heatmap --------------------------------------------------------------

struct HeatmapArgs {
    std::string scenario;
    std::string strategy;
    double noise = 0.8;
    std::string mode = "worst";
};

int run_heatmap(const HeatmapArgs& a, const std::string& output) {
    const LabeledMdp grid = compile(load_scenario(a.scenario));
    const Strategy sigma =
        a.strategy.empty() ? baseline_human_strategy(grid, a.noise) : load_strategy(a.strategy, grid.model);
    const Heatmap h = a.mode == "worst" ? worst_case_heatmap(grid, sigma) : best_case_heatmap(grid, sigma);

    Report report{"heatmap"};
    report.add("scenario", a.scenario);
    report.add("strategy", a.strategy.empty() ? "baseline human" : a.strategy);
    report.add("mode", a.mode);
    std::istringstream rows(heatmap_matrix(h));
    std::string line;
    for (int y = 0; std::getline(rows, line); ++y) report.add("row " + std::to_string(y), line);
    Json values = Json::array();
    for (int y = 0; y < h.height; ++y) {
        Json row = Json::array();
        for (int x = 0; x < h.width; ++x) row.push_back(number_json(h.at({x, y})));
        values.push_back(row);
    }
    report.data = {{"command", "heatmap"}, {"mode", a.mode}, {"width", h.width}, {"height", h.height},
                   {"values", values}};
    emit(report, output);
    return kExitOk;
}

// --- estimate -------------------------------------------------------------

struct EstimateArgs {
    std::string trajectories;
    std::string model;
    double smoothing = 1.0;
    std::optional<double> epsilon;
    std::optional<double> delta;
    std::string save_strategy;
};

int run_estimate(const EstimateArgs& a, const std::string& output) {
    const TrajectoryFile file = load_trajectory_file(a.trajectories);
    std::filesystem::path model_path = a.model;
    if (model_path.empty()) {
        model_path = file.model_path;
        if (model_path.is_relative()) model_path = std::filesystem::path(a.trajectories).parent_path() / model_path;
    }
    const Mdp model = load_mdp(model_path);
    std::vector<Trajectory> runs;
    std::size_t steps = 0;
    for (std::size_t i = 0; i < file.trajectories.size(); ++i) {
        try {
            runs.push_back(record_trajectory(model, file.trajectories[i]));
        } catch (const InvalidInput& e) {
            throw InvalidInput(a.trajectories + ": trajectory " + std::to_string(i + 1) + ": " + e.what());
        }
        steps += runs.back().steps.size();
    }
    const Strategy sigma = estimate_strategy(model, runs, a.smoothing);

    Report report{"estimate"};
    report.add("trajectories", std::to_string(runs.size()));
    report.add("steps", std::to_string(steps));
    report.add("smoothing", a.smoothing);
    report.data = {{"command", "estimate"}, {"trajectories", runs.size()}, {"steps", steps},
                   {"strategy", to_json(sigma, model)}};
    if (a.epsilon || a.delta) {
        if (!(a.epsilon && a.delta)) throw InvalidInput("--epsilon and --delta go together");
        const auto n = hoeffding_sample_size(*a.epsilon, *a.delta);
        report.add("samples per state-action for the requested accuracy", std::to_string(n));
        report.data["hoeffding_samples"] = n;
    }
    emit(report, output);
    save_if(a.save_strategy, to_json(sigma, model));
    return kExitOk;
}

// --- rollout --------------------------------------------------------------

struct RolloutArgs {
    std::string scenario;
    std::string autonomous;
    double blend = 0.5;
    double noise = 0.8;
    double lambda = 0.7;
    std::string policy = "blended";
    std::size_t episodes = 0;
    std::uint64_t seed = 0;
    std::size_t max_steps = 10'000;
};

int run_rollout(const RolloutArgs& a, const std::string& output) {
    const GridScenario scenario = load_scenario(a.scenario);
    const service::ScenarioEntry entry(a.scenario, scenario);
    const LabeledMdp& grid = entry.grid();
    const auto blending = BlendingFunction::constant(grid.model.num_states(), a.blend);
    Strategy human = baseline_human_strategy(grid, a.noise);
    Strategy autonomous;
    std::string synthesis = "given";
    if (a.autonomous.empty()) {
        const auto computed = entry.synthesize(a.noise, blending, a.lambda);
        autonomous = computed.autonomous;
        synthesis = to_string(computed.status);
    } else {
        autonomous = load_strategy(a.autonomous, grid.model);
    }
    Stopwatch clock;
    const auto rep = service::batch_rollout(grid, human, autonomous, blending,
                                            service::rollout_policy_from_string(a.policy), a.episodes, a.seed,
                                            a.max_steps);
    log_debug(std::to_string(a.episodes) + " episodes in " + std::to_string(clock.seconds()) + " s");

    Report report{"rollout"};
    report.add("scenario", a.scenario);
    report.add("policy", a.policy);
    report.add("autonomous strategy", synthesis);
    report.add("episodes", std::to_string(rep.episodes));
    report.add("seed", std::to_string(a.seed));
    report.add("safe arrivals", std::to_string(rep.safe_arrivals));
    report.add("crashes", std::to_string(rep.crashes));
    report.add("timeouts", std::to_string(rep.timeouts));
    if (rep.episodes > 0) {
        report.add("frequency", rep.frequency);
        report.add("99% interval", "[" + format_number(rep.interval_low) + ", " + format_number(rep.interval_high) + "]");
    }
    report.add("model-checked value", rep.model_checked);
    report.data = service::to_json(rep);
    report.data["command"] = "rollout";
    report.data["seed"] = a.seed;
    emit(report, output);
    return kExitOk;
}

// --- serve ----------------------------------------------------------------

struct ServeArgs {
    std::string scenarios = "data";
    std::string address = "127.0.0.1";
    unsigned short port = 8080;
};

int run_serve(const ServeArgs& a) {
    // Signals are taken synchronously on a dedicated thread; block them everywhere else.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    service::ScenarioRegistry registry;
    registry.load_directory(a.scenarios);
    if (registry.names().empty()) throw InvalidInput(a.scenarios + ": no scenario files found");
    service::SessionManager sessions(std::move(registry));
    service::HttpServer server(sessions, a.address, a.port);
    std::cerr << "serving " << sessions.scenarios().size() << " scenarios on http://" << a.address << ':'
              << server.port() << '\n';
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        sessions.shutdown();
        server.stop();
    });
    server.run();
    waiter.join();
    return kExitOk;
}

// --- export / import -------------------------------------------------------

int run_export(const std::string& model_path, const std::string& prefix, const std::string& output) {
    const Mdp model = load_mdp(model_path);
    export_explicit(model, prefix);
    const auto paths = explicit_paths(prefix);
    Report report{"export"};
    report.add("states", std::to_string(model.num_states()));
    report.add("transitions", std::to_string(model.num_transitions()));
    report.add("files", paths.states.string() + " " + paths.transitions.string() + " " + paths.labels.string());
    report.data = {{"command", "export"}, {"states", model.num_states()}, {"transitions", model.num_transitions()}};
    emit(report, output);
    return kExitOk;
}

int run_import(const std::string& prefix, const std::string& save_model, const std::string& output) {
    const Mdp model = import_explicit(prefix);
    if (const auto problems = validate_mdp(model); !problems.empty())
        throw InvalidInput(prefix + ": " + problems.front().message);
    save_json_file(save_model, to_json(model));
    Report report{"import"};
    report.add("states", std::to_string(model.num_states()));
    report.add("transitions", std::to_string(model.num_transitions()));
    report.add("model", save_model);
    report.data = {{"command", "import"}, {"states", model.num_states()}, {"transitions", model.num_transitions()}};
    emit(report, output);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shared-control autonomy protocols for Markov decision processes"};
    app.require_subcommand(1);
    std::string output;
    app.add_option("-o,--output", output, "write the report here instead of stdout");

    CheckArgs check_args;
    auto* check_cmd = app.add_subcommand("check", "model-check a strategy against properties");
    check_cmd->add_option("--model", check_args.model, "model JSON")->required()->check(CLI::ExistingFile);
    check_cmd->add_option("--strategy", check_args.strategy, "strategy JSON (default: uniform)")
        ->check(CLI::ExistingFile);
    check_args.specs.attach(check_cmd);

    SynthesizeArgs synth_args;
    auto add_synthesis_options = [&](CLI::App* cmd, bool with_method) {
        cmd->add_option("--model", synth_args.model, "model JSON")->required()->check(CLI::ExistingFile);
        cmd->add_option("--human", synth_args.human, "human strategy JSON")->required()->check(CLI::ExistingFile);
        cmd->add_option("--blend", synth_args.blend, "constant weight on the human or a blending JSON file");
        cmd->add_option("--budget", synth_args.budget, "per-entry repair budget")->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--step", synth_args.step, "per-entry repair step")->check(CLI::Range(1e-6, 1.0));
        cmd->add_option("--save-autonomous", synth_args.save_autonomous, "write the autonomous strategy");
        cmd->add_option("--save-blended", synth_args.save_blended, "write the blended strategy");
        cmd->add_option("--save-blending", synth_args.save_blending, "write the blending function");
        synth_args.specs.attach(cmd);
        if (!with_method) return;
        cmd->add_option("--method", synth_args.method, "exact | general | repair")
            ->check(CLI::IsMember({"exact", "general", "repair"}));
        cmd->add_flag("--uniform-max", synth_args.uniform_max, "largest constant blending weight that stays feasible");
        cmd->add_flag("--per-state", synth_args.per_state, "raise the blending weight state by state");
        cmd->add_option("--max-iterations", synth_args.max_iterations, "outer iterations of the general solver");
    };
    auto* synth_cmd = app.add_subcommand("synthesize", "synthesize an autonomous strategy");
    add_synthesis_options(synth_cmd, true);
    auto* repair_cmd = app.add_subcommand("repair", "greedy repair of the blended strategy");
    add_synthesis_options(repair_cmd, false);

    BlendArgs blend_args;
    auto* blend_cmd = app.add_subcommand("blend", "blend a human and an autonomous strategy");
    blend_cmd->add_option("--model", blend_args.model, "model JSON")->required()->check(CLI::ExistingFile);
    blend_cmd->add_option("--human", blend_args.human, "human strategy JSON")->required()->check(CLI::ExistingFile);
    blend_cmd->add_option("--autonomous", blend_args.autonomous, "autonomous strategy JSON")
        ->required()
        ->check(CLI::ExistingFile);
    blend_cmd->add_option("--blend", blend_args.blend, "constant weight on the human or a blending JSON file")
        ->required();
    blend_cmd->add_option("--save-blended", blend_args.save_blended, "write the blended strategy");
    blend_args.specs.attach(blend_cmd);

    GridArgs grid_args;
    auto* grid_cmd = app.add_subcommand("gridworld", "compile a grid scenario into a labelled MDP");
    grid_cmd->add_option("--scenario", grid_args.scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
    grid_cmd->add_option("--noise", grid_args.noise, "baseline human noise")->check(CLI::Range(0.0, 1.0));
    grid_cmd->add_option("--lambda", grid_args.lambda, "safety threshold")->check(CLI::Range(0.0, 1.0));
    grid_cmd->add_option("--save-model", grid_args.save_model, "write the compiled model JSON");
    grid_cmd->add_option("--save-human", grid_args.save_human, "write the baseline human strategy");

    HeatmapArgs heat_args;
    auto* heat_cmd = app.add_subcommand("heatmap", "per-cell safe-arrival probabilities");
    heat_cmd->add_option("--scenario", heat_args.scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
    heat_cmd->add_option("--strategy", heat_args.strategy, "strategy JSON for the compiled model")
        ->check(CLI::ExistingFile);
    heat_cmd->add_option("--noise", heat_args.noise, "baseline human noise when no strategy is given")
        ->check(CLI::Range(0.0, 1.0));
    heat_cmd->add_option("--mode", heat_args.mode, "worst | best")->check(CLI::IsMember({"worst", "best"}));

    EstimateArgs est_args;
    auto* est_cmd = app.add_subcommand("estimate", "estimate a human strategy from trajectories");
    est_cmd->add_option("--trajectories", est_args.trajectories, "trajectory file")
        ->required()
        ->check(CLI::ExistingFile);
    est_cmd->add_option("--model", est_args.model, "model JSON (default: the file's model line)")
        ->check(CLI::ExistingFile);
    est_cmd->add_option("--smoothing", est_args.smoothing, "Laplace pseudo-count")->check(CLI::NonNegativeNumber);
    est_cmd->add_option("--epsilon", est_args.epsilon, "accuracy for the sample-size bound")
        ->check(CLI::Range(1e-12, 1.0));
    est_cmd->add_option("--delta", est_args.delta, "failure probability for the sample-size bound")
        ->check(CLI::Range(1e-300, 1.0));
    est_cmd->add_option("--save-strategy", est_args.save_strategy, "write the estimated strategy");

    RolloutArgs roll_args;
    auto* roll_cmd = app.add_subcommand("rollout", "simulate episodes on a grid scenario");
    roll_cmd->add_option("--scenario", roll_args.scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
    roll_cmd->add_option("--autonomous", roll_args.autonomous, "autonomous strategy (default: repaired)")
        ->check(CLI::ExistingFile);
    roll_cmd->add_option("--blend", roll_args.blend, "constant weight on the human")->check(CLI::Range(0.0, 1.0));
    roll_cmd->add_option("--noise", roll_args.noise, "baseline human noise")->check(CLI::Range(0.0, 1.0));
    roll_cmd->add_option("--lambda", roll_args.lambda, "safety threshold for synthesis")->check(CLI::Range(0.0, 1.0));
    roll_cmd->add_option("--policy", roll_args.policy, "blended | human-only | autonomous-only")
        ->check(CLI::IsMember({"blended", "human-only", "autonomous-only"}));
    roll_cmd->add_option("--episodes", roll_args.episodes, "number of episodes")->required();
    roll_cmd->add_option("--seed", roll_args.seed, "random seed");
    roll_cmd->add_option("--max-steps", roll_args.max_steps, "steps before an episode counts as a timeout");

    ServeArgs serve_args;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP and WebSocket session server");
    serve_cmd->add_option("--scenarios", serve_args.scenarios, "directory of scenario JSON files")
        ->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--address", serve_args.address, "listen address");
    serve_cmd->add_option("--port", serve_args.port, "listen port (0 picks one)");

    std::string export_model;
    std::string export_prefix;
    auto* export_cmd = app.add_subcommand("export", "write explicit-state .sta/.tra/.lab files");
    export_cmd->add_option("--model", export_model, "model JSON")->required()->check(CLI::ExistingFile);
    export_cmd->add_option("--prefix", export_prefix, "output path prefix")->required();

    std::string import_prefix;
    std::string import_model;
    auto* import_cmd = app.add_subcommand("import", "read explicit-state files back into model JSON");
    import_cmd->add_option("--prefix", import_prefix, "input path prefix")->required();
    import_cmd->add_option("--save-model", import_model, "model JSON to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (check_cmd->parsed()) return run_check(check_args, output);
        if (synth_cmd->parsed()) return run_synthesize(synth_args, output);
        if (repair_cmd->parsed()) {
            synth_args.method = "repair";
            if (synth_args.blend.empty()) throw InvalidInput("repair needs --blend");
            return run_synthesize(synth_args, output);
        }
        if (blend_cmd->parsed()) return run_blend(blend_args, output);
        if (grid_cmd->parsed()) return run_gridworld(grid_args, output);
        if (heat_cmd->parsed()) return run_heatmap(heat_args, output);
        if (est_cmd->parsed()) return run_estimate(est_args, output);
        if (roll_cmd->parsed()) return run_rollout(roll_args, output);
        if (serve_cmd->parsed()) return run_serve(serve_args);
        if (export_cmd->parsed()) return run_export(export_model, export_prefix, output);
        if (import_cmd->parsed()) return run_import(import_prefix, import_model, output);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
