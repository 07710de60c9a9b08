#include "topopatch/connectivity.hpp"

#include <cstdlib>
#include <string>

namespace topopatch {

int resolve_connectivity(int connectivity, const Shape3& shape) {
  if (connectivity == 0) return shape.is_2d() ? 8 : 26;
  const bool ok = shape.is_2d() ? (connectivity == 4 || connectivity == 8)
                                : (connectivity == 6 || connectivity == 18 || connectivity == 26);
  if (!ok) {
    throw ConfigError("connectivity " + std::to_string(connectivity) + " is not valid for a " +
                      (shape.is_2d() ? "2D" : "3D") + " grid");
  }
  return connectivity;
}

std::vector<Offset3> neighbor_offsets(int connectivity, const Shape3& shape) {
  const int conn = resolve_connectivity(connectivity, shape);
  const int zr = shape.is_2d() ? 0 : 1;
  // Manhattan-distance cap: 4/6 -> 1, 18 -> 2, 8/26 -> 3.
  const int max_l1 = (conn == 4 || conn == 6) ? 1 : (conn == 18 ? 2 : 3);
  std::vector<Offset3> out;
  for (int dz = -zr; dz <= zr; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int l1 = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (l1 == 0 || l1 > max_l1) continue;
        out.push_back({dx, dy, dz});
      }
    }
  }
  return out;
}

std::vector<Offset3> backward_offsets(int connectivity, const Shape3& shape) {
  std::vector<Offset3> out;
  for (const auto& o : neighbor_offsets(connectivity, shape)) {
    if (o[2] < 0 || (o[2] == 0 && (o[1] < 0 || (o[1] == 0 && o[0] < 0)))) out.push_back(o);
  }
  return out;
}

}  // namespace topopatch
