#include "shctl/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <sstream>

namespace shctl {

const char* move_name(Move m) {
    switch (m) {
        case Move::Up: return "up";
        case Move::Down: return "down";
        case Move::Left: return "left";
        case Move::Right: return "right";
        case Move::Stay: return "stay";
    }
    return "?";
}

Cell apply_move(Cell c, Move m) {
    switch (m) {
        case Move::Up: return {c.x, c.y - 1};
        case Move::Down: return {c.x, c.y + 1};
        case Move::Left: return {c.x - 1, c.y};
        case Move::Right: return {c.x + 1, c.y};
        case Move::Stay: return c;
    }
    return c;
}

namespace {

std::string cell_text(Cell c) { return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")"; }

bool inside(const GridScenario& g, Cell c) { return c.x >= 0 && c.y >= 0 && c.x < g.width && c.y < g.height; }

bool free_cell(const GridScenario& g, Cell c) { return inside(g, c) && !g.walls.count(c); }

std::array<Move, 2> perpendicular(Move m) {
    if (m == Move::Up || m == Move::Down) return {Move::Left, Move::Right};
    return {Move::Up, Move::Down};
}

std::vector<Move> agent_moves(const GridScenario& g, Cell at) {
    std::vector<Move> moves;
    for (Move m : kMoves)
        if (m == Move::Stay || free_cell(g, apply_move(at, m))) moves.push_back(m);
    return moves;
}

void add_mass(std::vector<std::pair<Cell, double>>& dist, Cell c, double p) {
    if (p <= 0.0) return;
    for (auto& [cell, q] : dist)
        if (cell == c) {
            q += p;
            return;
        }
    dist.emplace_back(c, p);
}

std::vector<std::pair<Cell, double>> agent_successors(const GridScenario& g, Cell at, Move m) {
    std::vector<std::pair<Cell, double>> out;
    auto land = [&](Move mv) {
        const Cell c = apply_move(at, mv);
        return free_cell(g, c) ? c : at;
    };
    if (m == Move::Stay) {
        out.emplace_back(at, 1.0);
        return out;
    }
    add_mass(out, land(m), 1.0 - g.agent_slip);
    for (Move side : perpendicular(m)) add_mass(out, land(side), 0.5 * g.agent_slip);
    return out;
}

Cell parse_cell(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw InvalidInput(where + ": expected [x, y]");
    return {j[0].get<int>(), j[1].get<int>()};
}

Json cell_json(Cell c) { return Json::array({c.x, c.y}); }

Cell parse_cell_key(const std::string& key, const std::string& where) {
    const auto comma = key.find(',');
    try {
        if (comma == std::string::npos) throw std::invalid_argument(key);
        return {std::stoi(key.substr(0, comma)), std::stoi(key.substr(comma + 1))};
    } catch (const std::logic_error&) {
        throw InvalidInput(where + ": cell key '" + key + "' is not 'x,y'");
    }
}

Heatmap heatmap_by(const LabeledMdp& grid, const Strategy& sigma, bool worst) {
    require_valid_strategy(grid.model, sigma);
    const auto values = until_probabilities(induce_mc(grid.model, sigma), grid.crash, grid.target);
    const auto& g = grid.scenario;
    Heatmap h{g.width, g.height,
              std::vector<double>(static_cast<std::size_t>(g.width * g.height), std::numeric_limits<double>::quiet_NaN())};
    std::vector<bool> seen(h.values.size(), false), non_crash(h.values.size(), false);
    for (StateIndex s = 0; s < grid.states.size(); ++s) {
        const Cell a = grid.states[s].agent;
        const auto idx = static_cast<std::size_t>(a.y * g.width + a.x);
        seen[idx] = true;
        if (grid.crash[s]) continue;
        if (!non_crash[idx]) {
            h.values[idx] = values[s];
            non_crash[idx] = true;
        } else {
            h.values[idx] = worst ? std::min(h.values[idx], values[s]) : std::max(h.values[idx], values[s]);
        }
    }
    for (std::size_t i = 0; i < h.values.size(); ++i)
        if (seen[i] && !non_crash[i]) h.values[i] = 0.0;
    for (const Cell t : g.targets) {
        const auto idx = static_cast<std::size_t>(t.y * g.width + t.x);
        if (seen[idx]) h.values[idx] = 1.0;
    }
    return h;
}

}  // namespace

void validate_scenario(const GridScenario& g) {
    if (g.width <= 0 || g.height <= 0) throw InvalidInput("grid dimensions must be positive");
    for (const Cell w : g.walls)
        if (!inside(g, w)) throw InvalidInput("wall " + cell_text(w) + " outside the grid");
    if (!free_cell(g, g.agent_start)) throw InvalidInput("agent start " + cell_text(g.agent_start) + " is not a free cell");
    if (g.targets.empty()) throw InvalidInput("scenario has no target");
    for (const Cell t : g.targets)
        if (!free_cell(g, t)) throw InvalidInput("target " + cell_text(t) + " is not a free cell");
    if (!(g.agent_slip >= 0.0 && g.agent_slip < 1.0)) throw InvalidInput("agent_slip must lie in [0,1)");
    for (std::size_t i = 0; i < g.obstacles.size(); ++i) {
        const auto& o = g.obstacles[i];
        const std::string where = "obstacle " + std::to_string(i);
        if (!free_cell(g, o.start)) throw InvalidInput(where + ": start " + cell_text(o.start) + " is not a free cell");
        if (!o.table) continue;
        for (const auto& [cell, dist] : *o.table) {
            if (!free_cell(g, cell)) throw InvalidInput(where + ": table cell " + cell_text(cell) + " is not a free cell");
            double sum = 0.0;
            for (double p : dist) {
                if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput(where + ": probability outside [0,1] at " + cell_text(cell));
                sum += p;
            }
            if (std::abs(sum - 1.0) > kDistributionTolerance)
                throw InvalidInput(where + ": movement at " + cell_text(cell) + " sums to " + std::to_string(sum));
        }
    }
}

GridScenario scenario_from_json(const Json& doc) {
    if (!doc.is_object()) throw InvalidInput("scenario must be a JSON object");
    GridScenario g;
    try {
        g.width = doc.at("width").get<int>();
        g.height = doc.at("height").get<int>();
        if (doc.contains("walls"))
            for (std::size_t i = 0; i < doc["walls"].size(); ++i)
                g.walls.insert(parse_cell(doc["walls"][i], "walls[" + std::to_string(i) + "]"));
        g.agent_start = parse_cell(doc.at("agent_start"), "agent_start");
        for (std::size_t i = 0; i < doc.at("targets").size(); ++i)
            g.targets.insert(parse_cell(doc["targets"][i], "targets[" + std::to_string(i) + "]"));
        g.agent_slip = doc.value("agent_slip", 0.0);
        if (doc.contains("obstacles")) {
            for (std::size_t i = 0; i < doc["obstacles"].size(); ++i) {
                const auto& o = doc["obstacles"][i];
                const std::string where = "obstacles[" + std::to_string(i) + "]";
                ObstacleSpec spec{parse_cell(o.at("start"), where + ".start"), std::nullopt};
                const Json movement = o.value("movement", Json("uniform"));
                if (movement.is_string()) {
                    if (movement.get<std::string>() != "uniform")
                        throw InvalidInput(where + ".movement: unknown mode '" + movement.get<std::string>() + "'");
                } else if (movement.is_object()) {
                    std::map<Cell, MoveDistribution> table;
                    for (const auto& [key, entry] : movement.items()) {
                        MoveDistribution dist{};
                        for (const auto& [name, p] : entry.items()) {
                            std::size_t k = 0;
                            while (k < kMoves.size() && name != move_name(kMoves[k])) ++k;
                            if (k == kMoves.size()) throw InvalidInput(where + ".movement: unknown move '" + name + "'");
                            dist[k] = p.get<double>();
                        }
                        table[parse_cell_key(key, where + ".movement")] = dist;
                    }
                    spec.table = std::move(table);
                } else {
                    throw InvalidInput(where + ".movement: expected \"uniform\" or a table");
                }
                g.obstacles.push_back(std::move(spec));
            }
        }
    } catch (const Json::exception& e) {
        throw InvalidInput(std::string("scenario: ") + e.what());
    }
    validate_scenario(g);
    return g;
}

Json to_json(const GridScenario& g) {
    Json doc;
    doc["width"] = g.width;
    doc["height"] = g.height;
    doc["walls"] = Json::array();
    for (const Cell w : g.walls) doc["walls"].push_back(cell_json(w));
    doc["agent_start"] = cell_json(g.agent_start);
    doc["targets"] = Json::array();
    for (const Cell t : g.targets) doc["targets"].push_back(cell_json(t));
    doc["agent_slip"] = g.agent_slip;
    doc["obstacles"] = Json::array();
    for (const auto& o : g.obstacles) {
        Json entry{{"start", cell_json(o.start)}};
        if (!o.table) {
            entry["movement"] = "uniform";
        } else {
            Json table = Json::object();
            for (const auto& [cell, dist] : *o.table) {
                Json row = Json::object();
                for (std::size_t k = 0; k < kMoves.size(); ++k)
                    if (dist[k] > 0.0) row[move_name(kMoves[k])] = dist[k];
                table[std::to_string(cell.x) + "," + std::to_string(cell.y)] = row;
            }
            entry["movement"] = table;
        }
        doc["obstacles"].push_back(entry);
    }
    return doc;
}

GridScenario load_scenario(const std::filesystem::path& path) { return scenario_from_json(load_json_file(path)); }

std::vector<std::pair<Cell, double>> obstacle_successors(const GridScenario& g, const ObstacleSpec& o, Cell at) {
    MoveDistribution dist{};
    if (!o.table) {
        dist.fill(0.2);
    } else if (auto it = o.table->find(at); it != o.table->end()) {
        dist = it->second;
    } else {
        dist[4] = 1.0;
    }
    std::vector<std::pair<Cell, double>> out;
    for (std::size_t k = 0; k < kMoves.size(); ++k) {
        const Cell c = apply_move(at, kMoves[k]);
        add_mass(out, free_cell(g, c) ? c : at, dist[k]);
    }
    return out;
}

LabeledMdp compile(const GridScenario& scenario) {
    validate_scenario(scenario);
    const auto& g = scenario;
    const std::size_t k = g.obstacles.size();

    std::map<GridState, StateIndex> index;
    std::vector<GridState> states;
    std::deque<StateIndex> queue;
    auto intern = [&](const GridState& st) {
        auto [it, fresh] = index.emplace(st, static_cast<StateIndex>(states.size()));
        if (fresh) {
            states.push_back(st);
            queue.push_back(it->second);
        }
        return it->second;
    };
    auto is_crash = [](const GridState& st) {
        return std::find(st.obstacles.begin(), st.obstacles.end(), st.agent) != st.obstacles.end();
    };

    GridState start{g.agent_start, {}};
    for (const auto& o : g.obstacles) start.obstacles.push_back(o.start);
    intern(start);

    struct Edge {
        StateIndex from;
        ActionIndex action;
        StateIndex to;
        double p;
    };
    std::vector<Edge> edges;
    while (!queue.empty()) {
        const StateIndex s = queue.front();
        queue.pop_front();
        const GridState st = states[s];
        const auto moves = agent_moves(g, st.agent);
        const bool absorbing = is_crash(st) || g.targets.count(st.agent);
        for (Move m : moves) {
            const auto a = static_cast<ActionIndex>(m);
            if (absorbing) {
                edges.push_back({s, a, s, 1.0});
                continue;
            }
            std::map<StateIndex, double> row;
            for (const auto& [agent_next, pa] : agent_successors(g, st.agent, m)) {
                // Enumerate joint obstacle moves.
                GridState next{agent_next, st.obstacles};
                std::vector<std::vector<std::pair<Cell, double>>> options(k);
                for (std::size_t i = 0; i < k; ++i) options[i] = obstacle_successors(g, g.obstacles[i], st.obstacles[i]);
                std::vector<std::size_t> pick(k, 0);
                while (true) {
                    double p = pa;
                    for (std::size_t i = 0; i < k; ++i) {
                        const auto& [cell, q] = options[i][pick[i]];
                        next.obstacles[i] = cell;
                        p *= q;
                        // Swapping cells counts as a crash: record it as co-location.
                        if (agent_next != st.agent && cell == st.agent && st.obstacles[i] == agent_next)
                            next.obstacles[i] = agent_next;
                    }
                    if (p > 0.0) row[intern(next)] += p;
                    std::size_t i = 0;
                    while (i < k && ++pick[i] == options[i].size()) pick[i++] = 0;
                    if (i == k) break;
                }
            }
            for (const auto& [to, p] : row) edges.push_back({s, a, to, p});
        }
    }

    std::vector<std::string> names;
    for (Move m : kMoves) names.emplace_back(move_name(m));
    LabeledMdp out{g, Mdp(states.size(), 0, names), StateSet(states.size(), false), StateSet(states.size(), false),
                   states};
    for (const auto& e : edges) {
        out.model.add_transition(e.from, e.action, e.to, e.p);
        out.model.set_cost(e.from, e.action, 1.0);
    }
    for (StateIndex s = 0; s < states.size(); ++s) {
        if (is_crash(states[s])) {
            out.crash[s] = true;
            out.model.add_label("crash", s);
        } else if (g.targets.count(states[s].agent)) {
            out.target[s] = true;
            out.model.add_label("target", s);
        }
    }
    return out;
}

Strategy baseline_human_strategy(const LabeledMdp& grid, double noise) {
    if (!(noise >= 0.0 && noise <= 1.0)) throw InvalidInput("noise must lie in [0,1]");
    auto distance = [&](Cell c) {
        int best = std::numeric_limits<int>::max();
        for (const Cell t : grid.scenario.targets) best = std::min(best, std::abs(t.x - c.x) + std::abs(t.y - c.y));
        return best;
    };
    Strategy sigma(grid.model.num_states());
    for (StateIndex s = 0; s < grid.model.num_states(); ++s) {
        const Cell at = grid.states[s].agent;
        const auto choices = grid.model.choices(s);
        std::vector<bool> greedy(choices.size(), false);
        std::size_t count = 0;
        for (std::size_t j = 0; j < choices.size(); ++j) {
            const auto m = static_cast<Move>(choices[j].action);
            if (distance(apply_move(at, m)) < distance(at)) {
                greedy[j] = true;
                ++count;
            }
        }
        const double uniform = 1.0 / static_cast<double>(choices.size());
        for (std::size_t j = 0; j < choices.size(); ++j) {
            double p = uniform;
            if (count > 0) p = noise * uniform + (greedy[j] ? (1.0 - noise) / static_cast<double>(count) : 0.0);
            if (p > 0.0) sigma.set(s, choices[j].action, p);
        }
    }
    return sigma;
}

Specification safety_spec(const LabeledMdp& grid, double lambda) {
    return UntilProb{lambda, Comparison::GreaterEqual, grid.crash, grid.target};
}

Heatmap worst_case_heatmap(const LabeledMdp& grid, const Strategy& sigma) { return heatmap_by(grid, sigma, true); }

Heatmap best_case_heatmap(const LabeledMdp& grid, const Strategy& sigma) { return heatmap_by(grid, sigma, false); }

std::string heatmap_matrix(const Heatmap& h) {
    std::ostringstream os;
    os << std::setprecision(6);
    for (int y = 0; y < h.height; ++y) {
        for (int x = 0; x < h.width; ++x) {
            if (x > 0) os << ' ';
            const double v = h.at({x, y});
            if (std::isnan(v))
                os << "nan";
            else
                os << v;
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace shctl
