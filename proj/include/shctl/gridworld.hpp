#pragma once

#include "shctl/mdp.hpp"
#include "shctl/model_check.hpp"
#include "shctl/model_io.hpp"
#include "shctl/strategy.hpp"

#include <array>
#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace shctl {

/// Grid cell; x is the column, y the row, row 0 at the top.
struct Cell {
    int x = 0;
    int y = 0;

    friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum class Move { Up, Down, Left, Right, Stay };
inline constexpr std::array<Move, 5> kMoves{Move::Up, Move::Down, Move::Left, Move::Right, Move::Stay};
const char* move_name(Move m);
Cell apply_move(Cell c, Move m);

/// Probabilities over kMoves for one cell.
using MoveDistribution = std::array<double, 5>;

struct ObstacleSpec {
    Cell start;
    /// Absent: uniform over the five moves. Present: per-cell table; cells
    /// missing from the table stay put.
    std::optional<std::map<Cell, MoveDistribution>> table;
};

struct GridScenario {
    int width = 1;
    int height = 1;
    std::set<Cell> walls;
    Cell agent_start;
    std::set<Cell> targets;
    std::vector<ObstacleSpec> obstacles;
    double agent_slip = 0.0;
};

/// Throws InvalidInput describing the first problem found.
void validate_scenario(const GridScenario& scenario);
GridScenario scenario_from_json(const Json& doc);
Json to_json(const GridScenario& scenario);
GridScenario load_scenario(const std::filesystem::path& path);

struct GridState {
    Cell agent;
    std::vector<Cell> obstacles;

    friend auto operator<=>(const GridState&, const GridState&) = default;
};

struct LabeledMdp {
    GridScenario scenario;
    Mdp model;
    StateSet crash;
    StateSet target;
    std::vector<GridState> states;
};

/// Enumerates the states reachable from the start configuration. Agent and
/// obstacles move simultaneously; a crash is a shared cell after the step or a
/// swap of cells. Crash and target states are absorbing; crash wins over target.
LabeledMdp compile(const GridScenario& scenario);

/// Distribution of an obstacle's next cell from `at`, blocked moves folded into staying.
std::vector<std::pair<Cell, double>> obstacle_successors(const GridScenario& scenario, const ObstacleSpec& obstacle,
                                                         Cell at);

/// (1 - noise) spread over the moves that shrink the Manhattan distance to the
/// nearest target, plus noise spread uniformly over all enabled moves.
Strategy baseline_human_strategy(const LabeledMdp& grid, double noise);

/// P>=λ [!crash U target].
Specification safety_spec(const LabeledMdp& grid, double lambda);

/// Per-cell values; NaN marks walls and cells the agent never occupies.
struct Heatmap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(Cell c) const { return values.at(static_cast<std::size_t>(c.y * width + c.x)); }
};

/// Per agent cell, the minimum over reachable obstacle configurations of the
/// probability of reaching a target without crashing. Target cells are 1;
/// cells whose every configuration is a crash are 0.
Heatmap worst_case_heatmap(const LabeledMdp& grid, const Strategy& sigma);
/// Same with the maximum over configurations.
Heatmap best_case_heatmap(const LabeledMdp& grid, const Strategy& sigma);

/// Rows of space-separated values, `nan` for missing cells.
std::string heatmap_matrix(const Heatmap& heatmap);

}  // namespace shctl
