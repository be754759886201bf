#pragma once

#include "shctl/mdp.hpp"
#include "shctl/strategy.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace shctl {

struct TrajectoryStep {
    StateIndex state;
    ActionIndex action;
    StateIndex next;

    friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// A step as reported by a session or a trajectory file, before resolution against a model.
struct RecordedEvent {
    StateIndex state;
    std::string action;
    StateIndex next;
};

/// Enabled actions and positive-probability transitions, consecutive steps connected.
std::vector<Violation> validate_trajectory(const Mdp& model, const Trajectory& trajectory);

/// Throws InvalidInput naming the offending step index.
Trajectory record_trajectory(const Mdp& model, const std::vector<RecordedEvent>& events);

/// Laplace-smoothed action frequencies; unvisited states fall back to uniform when smoothing is 0.
Strategy estimate_strategy(const Mdp& model, const std::vector<Trajectory>& trajectories, double smoothing = 1.0);

/// Smallest n with 2 exp(-2 n eps^2) <= delta.
std::size_t hoeffding_sample_size(double epsilon, double delta);

/// Text format: a `model <path>` header, then one `state action next` line per
/// step; blank lines separate trajectories and `#` starts a comment.
struct TrajectoryFile {
    std::string model_path;
    std::vector<std::vector<RecordedEvent>> trajectories;
};

TrajectoryFile load_trajectory_file(const std::filesystem::path& path);
void save_trajectory_file(const std::filesystem::path& path, const std::string& model_path, const Mdp& model,
                          const std::vector<Trajectory>& trajectories);

}  // namespace shctl
