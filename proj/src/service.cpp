#include "shctl/service.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace shctl::service {

namespace {

constexpr double kZ99 = 2.5758293035489004;
constexpr std::size_t kMaxRolloutEpisodes = 1'000'000;

Json cell_json(Cell c) { return Json::array({c.x, c.y}); }

std::vector<double> row_weights(const Strategy& sigma, StateIndex s, std::vector<ActionIndex>& actions) {
    std::vector<double> weights;
    actions.clear();
    for (const auto& [a, p] : sigma.row(s)) {
        actions.push_back(a);
        weights.push_back(p);
    }
    return weights;
}

StateIndex sample_successor(const Mdp& model, StateIndex s, ActionIndex a, std::mt19937_64& rng) {
    const Choice* choice = model.find_choice(s, a);
    if (!choice) throw std::logic_error("sampled a disabled action");
    std::vector<double> weights;
    weights.reserve(choice->successors.size());
    for (const auto& succ : choice->successors) weights.push_back(succ.probability);
    return choice->successors[sample_index(weights, rng)].state;
}

/// b(s)·[a = h] + (1 - b(s))·σ_a(s, a) over the enabled actions of s.
std::vector<double> live_blend(const Mdp& model, StateIndex s, ActionIndex human, double b,
                               const Strategy& autonomous, std::vector<ActionIndex>& actions) {
    std::vector<double> weights;
    actions.clear();
    for (const auto& choice : model.choices(s)) {
        actions.push_back(choice.action);
        weights.push_back((choice.action == human ? b : 0.0) + (1.0 - b) * autonomous(s, choice.action));
    }
    return weights;
}

Json enabled_actions(const Mdp& model, StateIndex s) {
    Json out = Json::array();
    for (const auto& choice : model.choices(s)) out.push_back(model.action_name(choice.action));
    return out;
}

double number_field(const Json& request, const char* key, double fallback) {
    if (!request.contains(key)) return fallback;
    if (!request[key].is_number()) throw ServiceError(400, std::string("'") + key + "' must be a number");
    return request[key].get<double>();
}

std::uint64_t unsigned_field(const Json& request, const char* key, std::uint64_t fallback) {
    if (!request.contains(key)) return fallback;
    const Json& v = request[key];
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw ServiceError(400, std::string("'") + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

std::string string_field(const Json& request, const char* key) {
    if (!request.contains(key) || !request[key].is_string())
        throw ServiceError(400, std::string("missing string field '") + key + "'");
    return request[key].get<std::string>();
}

double until_value(const LabeledMdp& grid, const Strategy& sigma) {
    const auto values = until_probabilities(induce_mc(grid.model, sigma), grid.crash, grid.target);
    return values[grid.model.initial()];
}

}  // namespace

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t sample_index(const std::vector<double>& weights, std::mt19937_64& rng) {
    double total = 0.0;
    for (double w : weights) total += std::max(w, 0.0);
    if (!(total > 0.0)) throw std::logic_error("sampling from an empty distribution");
    const double u = unit_draw(rng) * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0)) continue;
        acc += weights[i];
        last = i;
        if (u < acc) return i;
    }
    return last;
}

ScenarioEntry::ScenarioEntry(std::string name, GridScenario scenario)
    : name_(std::move(name)), grid_(compile(scenario)) {}

ScenarioEntry::Strategies ScenarioEntry::synthesize(double noise, const BlendingFunction& blending,
                                                    double lambda) const {
    if (!(noise >= 0.0 && noise <= 1.0)) throw InvalidInput("noise must lie in [0,1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("lambda must lie in [0,1]");
    SynthesisProblem problem{&grid_.model, baseline_human_strategy(grid_, noise), blending,
                             {safety_spec(grid_, lambda)}};
    const SynthesisResult result = repair_synthesize(problem);
    return Strategies{problem.human, result.autonomous, blending, result.status};
}

std::shared_ptr<const ScenarioEntry::Strategies> ScenarioEntry::strategies(const SynthesisDefaults& params) const {
    const auto key = std::make_tuple(params.noise, params.blending, params.lambda);
    {
        std::lock_guard lock(cache_mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto computed = std::make_shared<const Strategies>(synthesize(
        params.noise, BlendingFunction::constant(grid_.model.num_states(), params.blending), params.lambda));
    std::lock_guard lock(cache_mutex_);
    return cache_.emplace(key, std::move(computed)).first->second;
}

void ScenarioRegistry::add(const std::string& name, GridScenario scenario) {
    entries_[name] = std::make_shared<const ScenarioEntry>(name, std::move(scenario));
}

void ScenarioRegistry::load_directory(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& item : std::filesystem::directory_iterator(dir))
        if (item.is_regular_file() && item.path().extension() == ".json") files.push_back(item.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        const Json doc = load_json_file(path);
        // Model files share the directory; only grid scenarios carry a width.
        if (!doc.is_object() || !doc.contains("width")) continue;
        add(path.stem().string(), scenario_from_json(doc));
    }
}

std::shared_ptr<const ScenarioEntry> ScenarioRegistry::find(const std::string& name) const {
    auto it = entries_.find(name);
    return it == entries_.end() ? nullptr : it->second;
}

std::vector<std::string> ScenarioRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, entry] : entries_) out.push_back(name);
    return out;
}

const char* to_string(SessionStatus status) {
    switch (status) {
        case SessionStatus::Running: return "running";
        case SessionStatus::Crashed: return "crashed";
        case SessionStatus::Reached: return "reached";
    }
    return "unknown";
}

ServiceError::ServiceError(int status, const std::string& message, Json extra)
    : std::runtime_error(message), status_(status), body_(std::move(extra)) {
    body_["error"] = message;
}

RolloutPolicy rollout_policy_from_string(const std::string& text) {
    if (text == "blended") return RolloutPolicy::Blended;
    if (text == "human-only") return RolloutPolicy::HumanOnly;
    if (text == "autonomous-only") return RolloutPolicy::AutonomousOnly;
    throw InvalidInput("unknown policy '" + text + "' (expected blended, human-only or autonomous-only)");
}

const char* to_string(RolloutPolicy policy) {
    switch (policy) {
        case RolloutPolicy::Blended: return "blended";
        case RolloutPolicy::HumanOnly: return "human-only";
        case RolloutPolicy::AutonomousOnly: return "autonomous-only";
    }
    return "unknown";
}

RolloutReport batch_rollout(const LabeledMdp& grid, const Strategy& human, const Strategy& autonomous,
                            const BlendingFunction& blending, RolloutPolicy policy, std::size_t episodes,
                            std::uint64_t seed, std::size_t max_steps) {
    const Mdp& model = grid.model;
    require_valid_strategy(model, human);
    require_valid_strategy(model, autonomous);
    if (blending.num_states() != model.num_states()) throw InvalidInput("blending function has the wrong size");

    RolloutReport report;
    report.policy = policy;
    report.episodes = episodes;
    switch (policy) {
        case RolloutPolicy::Blended: report.model_checked = until_value(grid, blend(human, autonomous, blending)); break;
        case RolloutPolicy::HumanOnly: report.model_checked = until_value(grid, human); break;
        case RolloutPolicy::AutonomousOnly: report.model_checked = until_value(grid, autonomous); break;
    }

    std::mt19937_64 rng(seed);
    std::vector<ActionIndex> actions;
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        StateIndex s = model.initial();
        bool finished = false;
        for (std::size_t step = 0; step <= max_steps; ++step) {
            if (grid.crash[s]) {
                ++report.crashes;
                finished = true;
                break;
            }
            if (grid.target[s]) {
                ++report.safe_arrivals;
                finished = true;
                break;
            }
            if (step == max_steps) break;
            ActionIndex a = 0;
            if (policy == RolloutPolicy::AutonomousOnly) {
                const auto w = row_weights(autonomous, s, actions);
                a = actions[sample_index(w, rng)];
            } else {
                const auto w = row_weights(human, s, actions);
                a = actions[sample_index(w, rng)];
                if (policy == RolloutPolicy::Blended) {
                    const auto mixed = live_blend(model, s, a, blending(s), autonomous, actions);
                    a = actions[sample_index(mixed, rng)];
                }
            }
            s = sample_successor(model, s, a, rng);
        }
        if (!finished) ++report.timeouts;
    }

    if (episodes == 0) {
        report.frequency = std::numeric_limits<double>::quiet_NaN();
        report.interval_low = 0.0;
        report.interval_high = 1.0;
        return report;
    }
    const double n = static_cast<double>(episodes);
    const double p = static_cast<double>(report.safe_arrivals) / n;
    report.frequency = p;
    const double z2 = kZ99 * kZ99;
    const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
    const double half = kZ99 * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
    report.interval_low = std::max(0.0, centre - half);
    report.interval_high = std::min(1.0, centre + half);
    return report;
}

Json to_json(const RolloutReport& report) {
    Json doc{{"policy", to_string(report.policy)},
             {"episodes", report.episodes},
             {"safe_arrivals", report.safe_arrivals},
             {"crashes", report.crashes},
             {"timeouts", report.timeouts},
             {"model_checked", report.model_checked}};
    if (report.episodes == 0) {
        doc["frequency"] = nullptr;
        doc["interval"] = nullptr;
    } else {
        doc["frequency"] = report.frequency;
        doc["interval"] = {{"level", report.level}, {"low", report.interval_low}, {"high", report.interval_high}};
    }
    return doc;
}

struct SessionManager::Session {
    std::string id;
    std::shared_ptr<const ScenarioEntry> entry;
    Strategy human;
    Strategy autonomous;
    BlendingFunction blending;
    SynthesisStatus synthesis = SynthesisStatus::Feasible;
    std::uint64_t seed = 0;
    std::mt19937_64 rng;
    StateIndex current = 0;
    SessionStatus status = SessionStatus::Running;
    std::vector<HistoryEntry> history;
    std::size_t episodes = 0;
    std::size_t safe_arrivals = 0;
    std::size_t crashes = 0;
    std::uint64_t version = 0;
    std::map<std::string, Json> heatmaps;
    mutable std::mutex mutex;
    mutable std::condition_variable changed;

    const LabeledMdp& grid() const { return entry->grid(); }

    // Caller holds `mutex`.
    Json snapshot() const {
        const LabeledMdp& g = grid();
        const GridState& state = g.states.at(current);
        const Mdp& model = g.model;
        Json walls = Json::array();
        for (Cell c : g.scenario.walls) walls.push_back(cell_json(c));
        Json targets = Json::array();
        for (Cell c : g.scenario.targets) targets.push_back(cell_json(c));
        Json obstacles = Json::array();
        for (Cell c : state.obstacles) obstacles.push_back(cell_json(c));
        Json hist = Json::array();
        for (const auto& h : history)
            hist.push_back({{"state", h.state},
                            {"human", model.action_name(h.human)},
                            {"executed", model.action_name(h.blended)},
                            {"next", h.next}});
        return Json{{"id", id},
                    {"scenario", entry->name()},
                    {"seed", seed},
                    {"version", version},
                    {"width", g.scenario.width},
                    {"height", g.scenario.height},
                    {"walls", walls},
                    {"targets", targets},
                    {"state", current},
                    {"agent", cell_json(state.agent)},
                    {"obstacles", obstacles},
                    {"status", to_string(status)},
                    {"enabled", status == SessionStatus::Running ? enabled_actions(model, current) : Json::array()},
                    {"blending_weight", blending(current)},
                    {"synthesis", to_string(synthesis)},
                    {"steps", history.size()},
                    {"history", hist},
                    {"episodes", episodes},
                    {"safe_arrivals", safe_arrivals},
                    {"crashes", crashes},
                    {"safe_rate", episodes == 0 ? Json(nullptr)
                                                : Json(static_cast<double>(safe_arrivals) / episodes)},
                    {"heatmap", "/heatmap?session=" + id + "&which=blended"}};
    }

    void bump() {
        ++version;
        changed.notify_all();
    }
};

SessionManager::SessionManager(ScenarioRegistry registry) : registry_(std::move(registry)) {}

SessionManager::~SessionManager() { shutdown(); }

void SessionManager::shutdown() {
    stopping_ = true;
    std::shared_lock lock(sessions_mutex_);
    for (const auto& [id, session] : sessions_) {
        std::lock_guard guard(session->mutex);
        session->changed.notify_all();
    }
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
    return it->second;
}

Json SessionManager::create(const Json& request) {
    if (!request.is_object()) throw ServiceError(400, "request body must be a JSON object");
    const std::string name = string_field(request, "scenario");
    auto entry = registry_.find(name);
    if (!entry) throw ServiceError(404, "unknown scenario '" + name + "'");
    const Mdp& model = entry->grid().model;

    auto session = std::make_shared<Session>();
    session->entry = entry;
    session->seed = request.contains("seed") ? unsigned_field(request, "seed", 0) : std::random_device{}();
    session->rng.seed(session->seed);
    session->current = model.initial();

    SynthesisDefaults params;
    params.noise = number_field(request, "noise", params.noise);
    params.lambda = number_field(request, "lambda", params.lambda);
    try {
        bool constant = true;
        if (request.contains("blending")) {
            const Json& b = request["blending"];
            if (b.is_number()) {
                params.blending = b.get<double>();
            } else {
                constant = false;
                session->blending = blending_from_json(b, model.num_states());
            }
        }
        if (constant) session->blending = BlendingFunction::constant(model.num_states(), params.blending);

        if (request.contains("autonomous")) {
            session->autonomous = strategy_from_json(request["autonomous"], model);
            require_valid_strategy(model, session->autonomous);
            if (!(params.noise >= 0.0 && params.noise <= 1.0)) throw InvalidInput("noise must lie in [0,1]");
            session->human = baseline_human_strategy(entry->grid(), params.noise);
        } else {
            auto computed = constant ? *entry->strategies(params)
                                     : entry->synthesize(params.noise, session->blending, params.lambda);
            session->human = std::move(computed.human);
            session->autonomous = std::move(computed.autonomous);
            session->synthesis = computed.status;
        }
    } catch (const ServiceError&) {
        throw;
    } catch (const std::exception& e) {
        throw ServiceError(422, e.what());
    }

    std::unique_lock lock(sessions_mutex_);
    session->id = "session-" + std::to_string(next_id_++);
    sessions_[session->id] = session;
    lock.unlock();
    std::lock_guard guard(session->mutex);
    return session->snapshot();
}

Json SessionManager::command(const std::string& id, const Json& request) {
    auto session = find(id);
    if (!request.is_object()) throw ServiceError(400, "request body must be a JSON object");
    const std::string name = string_field(request, "action");

    std::lock_guard guard(session->mutex);
    const Mdp& model = session->grid().model;
    if (session->status != SessionStatus::Running)
        throw ServiceError(410, "session has finished", {{"status", to_string(session->status)}});
    const auto human = model.action_index(name);
    if (!human) throw ServiceError(400, "unknown action '" + name + "'");
    const StateIndex s = session->current;
    if (!model.enabled(s, *human))
        throw ServiceError(409, "action '" + name + "' is not enabled", {{"enabled", enabled_actions(model, s)}});

    const double b = session->blending(s);
    std::vector<ActionIndex> actions;
    const auto weights = live_blend(model, s, *human, b, session->autonomous, actions);
    const ActionIndex executed = actions[sample_index(weights, session->rng)];
    const StateIndex next = sample_successor(model, s, executed, session->rng);

    session->history.push_back({s, *human, executed, next});
    session->current = next;
    const LabeledMdp& g = session->grid();
    if (g.crash[next]) {
        session->status = SessionStatus::Crashed;
        ++session->episodes;
        ++session->crashes;
    } else if (g.target[next]) {
        session->status = SessionStatus::Reached;
        ++session->episodes;
        ++session->safe_arrivals;
    }
    session->bump();

    Json distribution = Json::object();
    for (std::size_t i = 0; i < actions.size(); ++i) distribution[model.action_name(actions[i])] = weights[i];
    return Json{{"human_action", name},
                {"executed_action", model.action_name(executed)},
                {"overridden", executed != *human},
                {"weight", b},
                {"distribution", distribution},
                {"previous_state", s},
                {"snapshot", session->snapshot()}};
}

Json SessionManager::snapshot(const std::string& id) const {
    auto session = find(id);
    std::lock_guard guard(session->mutex);
    return session->snapshot();
}

std::vector<HistoryEntry> SessionManager::history(const std::string& id) const {
    auto session = find(id);
    std::lock_guard guard(session->mutex);
    return session->history;
}

Json SessionManager::reset(const std::string& id) {
    auto session = find(id);
    std::lock_guard guard(session->mutex);
    session->current = session->grid().model.initial();
    session->status = SessionStatus::Running;
    session->history.clear();
    session->bump();
    return session->snapshot();
}

Json SessionManager::rollouts(const Json& request) const {
    if (!request.is_object()) throw ServiceError(400, "request body must be a JSON object");
    const std::uint64_t episodes = unsigned_field(request, "episodes", 0);
    if (!request.contains("episodes")) throw ServiceError(400, "missing field 'episodes'");
    if (episodes > kMaxRolloutEpisodes)
        throw ServiceError(400, "at most " + std::to_string(kMaxRolloutEpisodes) + " episodes per request");
    const std::uint64_t seed = unsigned_field(request, "seed", 0);
    const std::uint64_t max_steps = unsigned_field(request, "max_steps", 10'000);
    RolloutPolicy policy = RolloutPolicy::Blended;
    try {
        if (request.contains("policy")) policy = rollout_policy_from_string(string_field(request, "policy"));
    } catch (const InvalidInput& e) {
        throw ServiceError(400, e.what());
    }

    std::shared_ptr<const ScenarioEntry> entry;
    Strategy human;
    Strategy autonomous;
    BlendingFunction blending;
    if (request.contains("session")) {
        auto session = find(string_field(request, "session"));
        std::lock_guard guard(session->mutex);
        entry = session->entry;
        human = session->human;
        autonomous = session->autonomous;
        blending = session->blending;
    } else {
        const std::string name = string_field(request, "scenario");
        entry = registry_.find(name);
        if (!entry) throw ServiceError(404, "unknown scenario '" + name + "'");
        SynthesisDefaults params;
        params.noise = number_field(request, "noise", params.noise);
        params.blending = number_field(request, "blending", params.blending);
        params.lambda = number_field(request, "lambda", params.lambda);
        try {
            auto computed = entry->strategies(params);
            human = computed->human;
            autonomous = computed->autonomous;
            blending = computed->blending;
        } catch (const InvalidInput& e) {
            throw ServiceError(422, e.what());
        }
    }
    Json doc = to_json(batch_rollout(entry->grid(), human, autonomous, blending, policy, episodes, seed, max_steps));
    doc["seed"] = seed;
    return doc;
}

Json SessionManager::heatmap(const std::string& id, const std::string& which, const std::string& mode) const {
    if (which != "human" && which != "autonomous" && which != "blended")
        throw ServiceError(400, "which must be human, autonomous or blended");
    if (mode != "worst" && mode != "best") throw ServiceError(400, "mode must be worst or best");
    auto session = find(id);
    std::lock_guard guard(session->mutex);
    const std::string key = which + "/" + mode;
    if (auto it = session->heatmaps.find(key); it != session->heatmaps.end()) return it->second;

    const LabeledMdp& g = session->grid();
    Strategy sigma = which == "human"        ? session->human
                     : which == "autonomous" ? session->autonomous
                                             : blend(session->human, session->autonomous, session->blending);
    const Heatmap h = mode == "worst" ? worst_case_heatmap(g, sigma) : best_case_heatmap(g, sigma);
    Json rows = Json::array();
    for (int y = 0; y < h.height; ++y) {
        Json row = Json::array();
        for (int x = 0; x < h.width; ++x) {
            const double v = h.at({x, y});
            row.push_back(std::isnan(v) ? Json(nullptr) : Json(v));
        }
        rows.push_back(std::move(row));
    }
    Json doc{{"session", id}, {"which", which}, {"mode", mode}, {"width", h.width}, {"height", h.height},
             {"values", rows}};
    session->heatmaps[key] = doc;
    return doc;
}

Json SessionManager::scenarios() const {
    Json out = Json::array();
    for (const auto& name : registry_.names()) {
        const auto entry = registry_.find(name);
        const auto& s = entry->grid().scenario;
        out.push_back({{"name", name},
                       {"width", s.width},
                       {"height", s.height},
                       {"states", entry->grid().model.num_states()}});
    }
    return out;
}

std::optional<Json> SessionManager::wait_for_update(const std::string& id, std::uint64_t& seen,
                                                    std::chrono::milliseconds timeout) const {
    std::shared_ptr<Session> session;
    try {
        session = find(id);
    } catch (const ServiceError&) {
        return std::nullopt;
    }
    std::unique_lock lock(session->mutex);
    const bool ready =
        session->changed.wait_for(lock, timeout, [&] { return stopping_.load() || session->version > seen; });
    if (!ready || stopping_) return std::nullopt;
    seen = session->version;
    return session->snapshot();
}

namespace {

struct Target {
    std::vector<std::string> segments;
    std::map<std::string, std::string> query;
};

std::string percent_decode(const std::string& text) {
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '%' && i + 2 < text.size()) {
            out.push_back(static_cast<char>(std::stoi(text.substr(i + 1, 2), nullptr, 16)));
            i += 2;
        } else if (text[i] == '+') {
            out.push_back(' ');
        } else {
            out.push_back(text[i]);
        }
    }
    return out;
}

Target parse_target(const std::string& target) {
    Target out;
    const auto qpos = target.find('?');
    const std::string path = target.substr(0, qpos);
    std::stringstream ps(path);
    std::string part;
    while (std::getline(ps, part, '/'))
        if (!part.empty()) out.segments.push_back(percent_decode(part));
    if (qpos != std::string::npos) {
        std::stringstream qs(target.substr(qpos + 1));
        while (std::getline(qs, part, '&')) {
            if (part.empty()) continue;
            const auto eq = part.find('=');
            if (eq == std::string::npos)
                out.query[percent_decode(part)] = "";
            else
                out.query[percent_decode(part.substr(0, eq))] = percent_decode(part.substr(eq + 1));
        }
    }
    return out;
}

Response json_response(int status, const Json& doc) { return Response{status, doc.dump(), "application/json"}; }

Json parse_body(const std::string& body) {
    if (body.empty()) return Json::object();
    try {
        return Json::parse(body);
    } catch (const Json::parse_error& e) {
        throw ServiceError(400, std::string("malformed JSON: ") + e.what());
    }
}

}  // namespace

std::optional<std::string> Router::websocket_session(const std::string& target) {
    const Target t = parse_target(target);
    if (t.segments.size() == 3 && t.segments[0] == "sessions" && t.segments[2] == "ws") return t.segments[1];
    return std::nullopt;
}

Response Router::handle(const std::string& method, const std::string& target, const std::string& body) const {
    try {
        if (method == "OPTIONS") return Response{204, "", "text/plain"};
        const Target t = parse_target(target);
        const auto& seg = t.segments;
        auto require = [&](const char* expected) {
            if (method != expected) throw ServiceError(405, "method " + method + " not allowed here");
        };

        if (seg.size() == 1 && seg[0] == "scenarios") {
            require("GET");
            return json_response(200, sessions_.scenarios());
        }
        if (seg.size() == 1 && seg[0] == "sessions") {
            require("POST");
            return json_response(201, sessions_.create(parse_body(body)));
        }
        if (seg.size() == 2 && seg[0] == "sessions") {
            require("GET");
            return json_response(200, sessions_.snapshot(seg[1]));
        }
        if (seg.size() == 3 && seg[0] == "sessions" && seg[2] == "command") {
            require("POST");
            return json_response(200, sessions_.command(seg[1], parse_body(body)));
        }
        if (seg.size() == 3 && seg[0] == "sessions" && seg[2] == "reset") {
            require("POST");
            return json_response(200, sessions_.reset(seg[1]));
        }
        if (seg.size() == 1 && seg[0] == "rollouts") {
            require("POST");
            return json_response(200, sessions_.rollouts(parse_body(body)));
        }
        if (seg.size() == 1 && seg[0] == "heatmap") {
            require("GET");
            auto it = t.query.find("session");
            if (it == t.query.end()) throw ServiceError(400, "missing query parameter 'session'");
            const auto which = t.query.count("which") ? t.query.at("which") : std::string("blended");
            const auto mode = t.query.count("mode") ? t.query.at("mode") : std::string("worst");
            return json_response(200, sessions_.heatmap(it->second, which, mode));
        }
        throw ServiceError(404, "no route for " + method + " " + target);
    } catch (const ServiceError& e) {
        return json_response(e.status(), e.body());
    } catch (const InvalidInput& e) {
        return json_response(422, Json{{"error", e.what()}});
    } catch (const std::exception& e) {
        return json_response(500, Json{{"error", e.what()}});
    }
}

}  // namespace shctl::service
