#pragma once

#include "shctl/mdp.hpp"
#include "shctl/model_check.hpp"

#include <string>

namespace shctl {

/// Specification with its state sets still named.
struct SpecDescriptor {
    enum class Kind { Reach, Until, Cost } kind = Kind::Reach;
    Comparison cmp = Comparison::LessEqual;
    double bound = 0.0;
    std::string avoid;   // Until only
    std::string target;  // Reach target, Until goal, Cost goal
};

/// Grammar: `P<=λ [F T]`, `P>=λ [F T]`, `P<=λ [!T U G]`, `P>=λ [!T U G]`,
/// `E<=κ [F G]` (κ may be `inf`). Errors name the 1-based column.
SpecDescriptor parse_spec_descriptor(const std::string& text);

/// Resolves the names through labels or `sK` indices of `model`.
Specification parse_spec(const std::string& text, const Mdp& model);

}  // namespace shctl
