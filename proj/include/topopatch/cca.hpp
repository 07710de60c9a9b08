#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "topopatch/grid.hpp"

namespace topopatch {

struct Component {
  std::int32_t id = 0;
  std::size_t voxel_count = 0;
  Coord3 centroid{};
  // Exact integer sums of voxel coordinates; centroid = coord_sum / voxel_count.
  std::array<std::uint64_t, 3> coord_sum{};
  Index3 bbox_min{};
  Index3 bbox_max{};  // inclusive
};

// Labeled components of a binary grid. Ids run 1..K in decreasing voxel
// count (ties: earlier first voxel in raster order gets the smaller id).
struct ComponentSet {
  LabelGrid labels;
  std::vector<Component> components;
  int connectivity = 0;

  std::size_t total_voxels() const;
  BinaryMask to_mask() const;
};

// Two-pass raster labeling with union-find equivalences.
// connectivity: 4/8 (2D), 6/18/26 (3D), 0 = default 8/26.
ComponentSet label_components(const BinaryMask& mask, int connectivity = 0);

// Drops components with fewer than `min_voxels` voxels; survivors are
// renumbered densely, keeping their relative order.
ComponentSet filter_small(const ComponentSet& cs, std::size_t min_voxels = 20);

enum class CentroidMode { kUnion, kLargest };

// Mean voxel coordinate of every surviving component (kUnion) or of
// component 1 only (kLargest). Throws DegenerateInputError when empty.
Coord3 mask_centroid(const ComponentSet& cs, CentroidMode mode = CentroidMode::kUnion);

// Dice of an extracted mask against a whole-tumor mask.
double mask_dice(const BinaryMask& extracted, const BinaryMask& whole_tumor);

// CSV rows: id,voxel_count,cx,cy,cz,bbox (bbox as "x0:x1;y0:y1;z0:z1").
std::string components_to_csv(const ComponentSet& cs);

}  // namespace topopatch
