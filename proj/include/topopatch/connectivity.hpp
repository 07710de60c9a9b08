#pragma once

#include <array>
#include <vector>

#include "topopatch/grid.hpp"

namespace topopatch {

using Offset3 = std::array<int, 3>;

// Neighbor offsets for 4/8 (2D) or 6/18/26 (3D) adjacency. 0 selects the
// default: 8 for 2D shapes, 26 for 3D. Throws ConfigError for a count that
// does not fit the dimensionality.
int resolve_connectivity(int connectivity, const Shape3& shape);
std::vector<Offset3> neighbor_offsets(int connectivity, const Shape3& shape);

// Only offsets preceding the center in raster order (z, then y, then x).
std::vector<Offset3> backward_offsets(int connectivity, const Shape3& shape);

}  // namespace topopatch
