#pragma once

#include <cstdint>

#include "topopatch/grid.hpp"
#include "topopatch/patch_spec.hpp"
#include "topopatch/volume_io.hpp"

namespace topopatch {

inline constexpr double kDiceEpsilon = 1e-6;
inline constexpr double kFocalFloor = 1e-7;

// (2 sum(p t) + eps) / (sum p^2 + sum t^2 + eps). `p` may hold probabilities
// in [0, 1]; `t` must be binary.
double dice(const BinaryMask& p, const BinaryMask& t, double eps = kDiceEpsilon);
double dice(const Grid<double>& p, const BinaryMask& t, double eps = kDiceEpsilon);

double dice_loss(const BinaryMask& p, const BinaryMask& t, double eps = kDiceEpsilon);
double dice_loss(const Grid<double>& p, const BinaryMask& t, double eps = kDiceEpsilon);

// -alpha_t (1 - p_t)^gamma ln(p_t), with p_t floored at 1e-7.
double focal_loss(double p_t, double alpha_t, double gamma);

// Mean voxelwise focal loss of foreground probabilities against a binary
// target: p_t = p where t = 1 and 1 - p elsewhere; alpha_t = alpha or 1 - alpha.
double focal_loss(const Grid<double>& p, const BinaryMask& t, double alpha, double gamma);

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(const BinaryMask& p, const BinaryMask& t);

// TP / (TP + FN); UndefinedMetricError when TP + FN == 0.
double sensitivity(const ConfusionCounts& c);
// TN / (TN + FP); UndefinedMetricError when TN + FP == 0.
double specificity(const ConfusionCounts& c);

// Share of voxels labeled 1, 2 or 4.
double tumor_fraction(const SegMask3D& mask);

// Distance from the whole-tumor centroid of `gt` to the patch center.
double center_distance(const PatchSpec& patch, const SegMask3D& gt);
Coord3 whole_tumor_centroid(const SegMask3D& gt);

// Fraction of the region's voxels in `gt` that fall inside the patch window.
double region_recall(const PatchSpec& patch, const SegMask3D& gt, Region region);

}  // namespace topopatch
