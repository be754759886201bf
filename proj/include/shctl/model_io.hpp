#pragma once

#include "shctl/mdp.hpp"
#include "shctl/strategy.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace shctl {

using Json = nlohmann::json;

/// Model document: states, initial, actions, transitions, optional costs
/// and labels. The result is not validated; call validate_mdp.
Mdp mdp_from_json(const Json& doc);
Json to_json(const Mdp& model);

/// Strategy document {state -> {action -> prob}}; unlisted states are empty.
Strategy strategy_from_json(const Json& doc, const Mdp& model);
Json to_json(const Strategy& sigma, const Mdp& model);

/// Blending document {state -> weight} with an optional "default" key.
BlendingFunction blending_from_json(const Json& doc, std::size_t num_states);
Json to_json(const BlendingFunction& b);

Json to_json(const Perturbation& delta, const Mdp& model);

/// Reads and parses a JSON file; parse errors carry path:line:column.
Json load_json_file(const std::filesystem::path& path);
void save_json_file(const std::filesystem::path& path, const Json& doc);

Mdp load_mdp(const std::filesystem::path& path);

/// Resolves "name" as a label, or "s<k>"/"<k>" as a single state index.
StateSet resolve_state_set(const Mdp& model, const std::string& name);

}  // namespace shctl
