#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "topopatch/grid.hpp"

namespace topopatch {

// Correlation weights w(s, t[, u]) over odd side lengths (2a+1, 2b+1[, 2c+1]).
// A kernel with nz == 1 is 2D.
struct FilterKernel {
  Shape3 shape;
  std::vector<double> weights;

  FilterKernel(Shape3 shape, std::vector<double> weights);

  int half_x() const { return static_cast<int>(shape.nx / 2); }
  int half_y() const { return static_cast<int>(shape.ny / 2); }
  int half_z() const { return static_cast<int>(shape.nz / 2); }
  double at(int s, int t, int u = 0) const {
    return weights[static_cast<std::size_t>(s + half_x()) +
                   shape.nx * (static_cast<std::size_t>(t + half_y()) +
                               shape.ny * static_cast<std::size_t>(u + half_z()))];
  }
  double sum() const;

  static FilterKernel identity();
  static FilterKernel box(int radius, bool three_d);
  // Normalized sampled Gaussian, side 2*radius+1 on every axis.
  static FilterKernel gaussian(double sigma, int radius, bool three_d);
  // High-pass cross: center 4 (2D) or 6 (3D), -1 on each face neighbor.
  static FilterKernel cross(bool three_d);
};

// Population (divide-by-N) z-score over the whole volume.
template <typename T>
Grid<T> zscore_normalize(const Grid<T>& vol);

// g(x) = sum_s w(s) f(x + s) with half-sample symmetric reflection at borders.
template <typename T>
Grid<T> convolve(const Grid<T>& img, const FilterKernel& kernel);

// Same result as convolve(img, FilterKernel::gaussian(...)), computed one
// axis at a time. 2D for nz == 1 grids, 3D otherwise.
template <typename T>
Grid<T> gaussian_blur(const Grid<T>& img, double sigma, int radius);

struct GradientField {
  Slice2D gx;
  Slice2D gy;
  Slice2D magnitude;
  Slice2D direction;  // atan2(gy, gx) in (-pi, pi]
};

// Central differences inside, one-sided differences on the border rows.
GradientField gradient(const Slice2D& img);

// img + convolve(img, cross kernel).
template <typename T>
Grid<T> sharpen(const Grid<T>& img);

inline constexpr std::size_t kHistogramBins = 256;

struct Histogram {
  double min = 0;
  double max = 0;
  std::array<std::uint64_t, kHistogramBins> counts{};

  double bin_width() const { return (max - min) / static_cast<double>(kHistogramBins); }
  // Upper edge of bin `bin`, i.e. the intensity threshold for a cut after it.
  double upper_edge(int bin) const { return min + (bin + 1) * bin_width(); }
};

// 256 equal bins spanning [min, max] of the grid; the max lands in the last bin.
template <typename T>
Histogram histogram256(const Grid<T>& img);

// Yen's entropic criterion for a cut after bin t inside bins [lo, hi]:
//   2 (ln c1 + ln c2) - (ln s1 + ln s2)
// where c1, c2 are the class counts and s1, s2 the sums of squared bin counts.
// Equal to the normalized-probability form; the normalization cancels.
double yen_criterion(std::span<const std::uint64_t> hist, int lo, int t, int hi);

// Ascending bin thresholds; voxels in bins > threshold form the upper class.
// Level 1 maximizes the criterion over all cuts; each further level repeats
// the search inside the current upper class. Ties go to the lowest cut.
// Recursion stops early if an upper class holds fewer than 2 nonempty bins.
std::vector<int> yen_thresholds(std::span<const std::uint64_t> hist, int levels);

// True where value > thresholds.back().
template <typename T>
BinaryMask threshold_top_class(const Grid<T>& img, std::span<const double> thresholds);

// Box structuring element of side 2r+1 (in-plane only for 2D masks);
// out-of-grid positions are ignored.
BinaryMask erode(const BinaryMask& mask, int radius);
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask morph_open(const BinaryMask& mask, int radius);
BinaryMask morph_close(const BinaryMask& mask, int radius);
// Opening, then closing.
BinaryMask morph_open_close(const BinaryMask& mask, int se_radius);

struct RoiParams {
  double sigma = 1.0;
  int radius = 2;
  int yen_levels = 1;
  int se_radius = 1;
};

// Intermediate grids of the ROI chain, in pipeline order.
struct RoiStages {
  std::vector<std::pair<std::string, Grid<float>>> stages;
};

// blur -> sharpen -> histogram -> Yen -> top class -> open/close.
// `stages`, when given, receives: 1_original, 2_blur, 3_enhanced,
// 4_threshold, 5_open_close, 6_roi.
template <typename T>
BinaryMask extract_roi(const Grid<T>& img, const RoiParams& params, RoiStages* stages = nullptr);

// Writes each stage as `<dir>/<case_id>_<stage>.raw` (raw-f32 + header).
void dump_roi_stages(const RoiStages& stages, const std::filesystem::path& dir, const std::string& case_id);

}  // namespace topopatch
