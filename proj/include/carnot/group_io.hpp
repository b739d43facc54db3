#pragma once

#include <string>

#include "carnot/group.hpp"

namespace carnot {

/// Parses the plain-text group-spec format:
///
///   [name]
///   heisenberg1
///   [layers]
///   2 1
///   [brackets]
///   1 2 3 1        # i j k value, 1-based: [X_i, X_j] has coefficient value on X_k
///
/// '#' starts a comment. A bracket whose partner (j i k) is not listed gets value -value.
CarnotGroupSpec parse_group_spec(const std::string& text, const std::string& default_id = "");
CarnotGroupSpec load_group_spec(const std::string& path);
std::string format_group_spec(const CarnotGroupSpec& spec);

CarnotGroupSpec abelian_spec(int n);
/// H^k: 2k horizontal generators with [X_{2p-1}, X_{2p}] = X_{2k+1}.
CarnotGroupSpec heisenberg_spec(int k);
/// Free step-2 algebra on g generators; brackets [X_i, X_j], i < j, in lexicographic order.
CarnotGroupSpec free_step2_spec(int g);
/// [X1,X2] = X3, [X1,X3] = X4.
CarnotGroupSpec engel_spec();

}  // namespace carnot
