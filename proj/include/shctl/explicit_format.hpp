#pragma once

#include "shctl/mdp.hpp"

#include <filesystem>

namespace shctl {

/// Explicit-state text files sharing a common prefix:
///   <prefix>.sta  state count, `initial K` and `actions name...`
///   <prefix>.tra  one `from action_index to prob` line per transition
///   <prefix>.lab  one `state label` line per labelled state
///   <prefix>.cst  `state action_index cost` lines, only for models with costs
struct ExplicitPaths {
    std::filesystem::path states, transitions, labels, costs;
};

ExplicitPaths explicit_paths(const std::filesystem::path& prefix);
void export_explicit(const Mdp& model, const std::filesystem::path& prefix);
Mdp import_explicit(const std::filesystem::path& prefix);

}  // namespace shctl
