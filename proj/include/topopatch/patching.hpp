#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "topopatch/cca.hpp"
#include "topopatch/homology.hpp"
#include "topopatch/patch_spec.hpp"
#include "topopatch/preprocess.hpp"
#include "topopatch/volume_io.hpp"

namespace topopatch {

inline constexpr std::size_t kPatchSide = 128;
inline constexpr std::uint64_t kDefaultSeededSeed = 42;

struct PatchProvenance {
  std::vector<std::string> warnings;
  std::optional<Coord3> anchor;          // centroid the window was placed on
  std::size_t components_found = 0;      // before the size filter
  std::size_t components_kept = 0;
  std::optional<double> roi_dice;        // filtered ROI vs whole tumor
  std::optional<std::size_t> slice_index;
};

struct Patch {
  PatchSpec spec;
  std::map<std::string, Volume3D> data;
  std::optional<SegMask3D> mask_crop;
  PatchProvenance provenance;
};

struct Patch2D {
  PatchSpec spec;
  Slice2D data;
  PatchProvenance provenance;
};

// origin = round(centroid) - size / 2, clamped per axis into [0, bound - size].
Index3 clamp_window(const Coord3& centroid, const Shape3& size, const Shape3& bounds);

template <typename T>
Grid<T> crop(const Grid<T>& src, const PatchSpec& spec);

// Crops every modality (and the mask, if any) of `c`.
Patch crop_case(const Case& c, const PatchSpec& spec, PatchProvenance provenance = {});

struct CcaParams {
  std::size_t size = kPatchSide;
  RoiParams roi;
  std::size_t min_voxels = 20;
  int connectivity = 0;  // 26 in 3D
  CentroidMode centroid_mode = CentroidMode::kUnion;
};

// z-score(flair) -> 3D ROI -> labeling -> size filter -> centroid -> window.
// An empty filtered mask falls back to the centered crop with a warning.
Patch patch_cca_3d(const Case& c, const CcaParams& params = {}, RoiStages* stages = nullptr);

struct Tda2dParams {
  std::size_t size = kPatchSide;
  RoiParams roi;
  int connectivity = 0;  // 8 in 2D
};

// ROI -> superlevel persistence over the ROI pixels -> strongest class
// centroid -> window. Empty ROI falls back to the centered crop with a warning.
Patch2D patch_tda_2d(const Slice2D& slice, const Tda2dParams& params = {}, const std::string& case_id = {});

// 3D patch from the 2D method: runs patch_tda_2d on the axial slice with
// the largest positive z-scored flair mass; z placement is centered.
Patch patch_tda_case(const Case& c, const Tda2dParams& params = {});

// Origins only; the *_case variants crop.
PatchSpec centered_spec(const Shape3& bounds, std::size_t size = kPatchSide, const std::string& case_id = {});
std::vector<PatchSpec> quadrant_specs(const Shape3& bounds, std::size_t size = kPatchSide,
                                      const std::string& case_id = {});
PatchSpec random_spec(const Shape3& bounds, std::uint64_t seed, Strategy strategy = Strategy::kRandom,
                      std::size_t size = kPatchSide, const std::string& case_id = {});
std::vector<PatchSpec> overlapping_specs(const Shape3& bounds, std::size_t stride = 64,
                                         std::size_t size = kPatchSide, const std::string& case_id = {});
// Per-axis origins of the overlapping tiling.
std::vector<std::size_t> overlapping_axis_origins(std::size_t bound, std::size_t stride, std::size_t size);

Patch patch_centered_crop(const Case& c, std::size_t size = kPatchSide);
std::vector<Patch> patch_fixed_quadrants(const Case& c, std::size_t size = kPatchSide);
// Draws from case_seed(seed, case_id).
Patch patch_random(const Case& c, std::uint64_t seed, Strategy strategy = Strategy::kRandom,
                   std::size_t size = kPatchSide);
std::vector<Patch> patch_overlapping(const Case& c, std::size_t stride = 64, std::size_t size = kPatchSide);

struct PatchingConfig {
  CcaParams cca;
  Tda2dParams tda;
  std::size_t size = kPatchSide;
  std::uint64_t seed = 0;          // strategy "random"
  std::uint64_t seeded_seed = kDefaultSeededSeed;  // strategy "random_seeded"
  std::size_t stride = 64;
};

// Runs one strategy on a case.
std::vector<Patch> generate_patches(const Case& c, Strategy strategy, const PatchingConfig& config,
                                    RoiStages* stages = nullptr);

}  // namespace topopatch
