#pragma once

#include "shctl/gridworld.hpp"
#include "shctl/model_io.hpp"
#include "shctl/synthesis.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace shctl::service {

/// Uniform double in [0,1) from the top 53 bits, identical on every platform.
double unit_draw(std::mt19937_64& rng);

/// Index into `weights` drawn proportionally; the last positive entry absorbs rounding.
std::size_t sample_index(const std::vector<double>& weights, std::mt19937_64& rng);

/// Default parameters used when a request leaves the autonomous strategy to the server.
struct SynthesisDefaults {
    double noise = 0.8;
    double blending = 0.5;
    double lambda = 0.7;
};

/// A compiled scenario plus lazily synthesized default strategies.
class ScenarioEntry {
public:
    ScenarioEntry(std::string name, GridScenario scenario);

    const std::string& name() const { return name_; }
    const LabeledMdp& grid() const { return grid_; }

    struct Strategies {
        Strategy human;
        Strategy autonomous;
        BlendingFunction blending;
        SynthesisStatus status;
    };
    /// Baseline human at `noise`, repaired toward P>=λ [!crash U target]
    /// under constant blending. Results are cached per parameter triple.
    std::shared_ptr<const Strategies> strategies(const SynthesisDefaults& params) const;
    /// Same for an arbitrary blending function; not cached.
    Strategies synthesize(double noise, const BlendingFunction& blending, double lambda) const;

private:
    std::string name_;
    LabeledMdp grid_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::tuple<double, double, double>, std::shared_ptr<const Strategies>> cache_;
};

class ScenarioRegistry {
public:
    void add(const std::string& name, GridScenario scenario);
    /// Registers every *.json scenario in `dir` under its file stem.
    void load_directory(const std::filesystem::path& dir);
    std::shared_ptr<const ScenarioEntry> find(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, std::shared_ptr<const ScenarioEntry>> entries_;
};

enum class SessionStatus { Running, Crashed, Reached };
const char* to_string(SessionStatus status);

struct HistoryEntry {
    StateIndex state;
    ActionIndex human;
    ActionIndex blended;
    StateIndex next;
};

/// Error with an HTTP status and a JSON body.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, const std::string& message, Json extra = Json::object());
    int status() const { return status_; }
    const Json& body() const { return body_; }

private:
    int status_;
    Json body_;
};

enum class RolloutPolicy { Blended, HumanOnly, AutonomousOnly };
RolloutPolicy rollout_policy_from_string(const std::string& text);
const char* to_string(RolloutPolicy policy);

struct RolloutReport {
    RolloutPolicy policy = RolloutPolicy::Blended;
    std::size_t episodes = 0;
    std::size_t safe_arrivals = 0;
    std::size_t crashes = 0;
    std::size_t timeouts = 0;
    double frequency = 0.0;
    double interval_low = 0.0;   // Wilson score interval at `level`
    double interval_high = 0.0;
    double level = 0.99;
    double model_checked = 0.0;  // P(!crash U target) of the policy's strategy
};

/// Simulates `episodes` runs. The automated human draws commands from `human`;
/// for Blended each command is blended with `autonomous` exactly as live commands are.
RolloutReport batch_rollout(const LabeledMdp& grid, const Strategy& human, const Strategy& autonomous,
                            const BlendingFunction& blending, RolloutPolicy policy, std::size_t episodes,
                            std::uint64_t seed, std::size_t max_steps = 10'000);

Json to_json(const RolloutReport& report);

/// Live sessions. Every mutation of a session holds that session's lock;
/// readers get a consistent snapshot.
class SessionManager {
public:
    explicit SessionManager(ScenarioRegistry registry);
    ~SessionManager();

    /// Body: {"scenario", "seed"?, "blending"?, "autonomous"?, "noise"?, "lambda"?}.
    /// Returns the snapshot of the new session (which carries its id).
    Json create(const Json& request);
    Json command(const std::string& id, const Json& request);
    Json snapshot(const std::string& id) const;
    Json reset(const std::string& id);
    /// Body: {"session" | "scenario", "episodes", "policy"?, "seed"?, "max_steps"?}.
    Json rollouts(const Json& request) const;
    /// which: human | autonomous | blended; mode: worst | best.
    Json heatmap(const std::string& id, const std::string& which, const std::string& mode = "worst") const;
    Json scenarios() const;
    std::vector<HistoryEntry> history(const std::string& id) const;

    /// Blocks until the session's version exceeds `seen` or the timeout passes.
    /// Returns the new snapshot and updates `seen`; nullopt on timeout or shutdown.
    std::optional<Json> wait_for_update(const std::string& id, std::uint64_t& seen,
                                        std::chrono::milliseconds timeout) const;
    /// Wakes all waiters; subsequent waits return immediately.
    void shutdown();

private:
    struct Session;
    std::shared_ptr<Session> find(const std::string& id) const;

    ScenarioRegistry registry_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 1;
    std::atomic<bool> stopping_{false};
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Maps (method, target, body) onto SessionManager calls; independent of any transport.
class Router {
public:
    explicit Router(SessionManager& sessions) : sessions_(sessions) {}
    Response handle(const std::string& method, const std::string& target, const std::string& body) const;
    /// Session id if `target` is /sessions/{id}/ws.
    static std::optional<std::string> websocket_session(const std::string& target);

private:
    SessionManager& sessions_;
};

}  // namespace shctl::service
