#pragma once

#include <cstdint>
#include <string>

#include "topopatch/grid.hpp"
#include "topopatch/rng.hpp"
#include "topopatch/volume_io.hpp"

namespace topopatch {

inline constexpr Shape3 kBratsShape{240, 240, 155};

// Ellipsoidal tumor in Gaussian noise. Labels by normalized ellipsoid radius
// r: r <= core_fraction -> 1 (necrotic core), r <= rim_fraction -> 4
// (enhancing rim), r <= 1 -> 2 (edema shell).
struct PhantomParams {
  Shape3 shape = kBratsShape;
  Coord3 center{120, 120, 77};
  Coord3 semi_axes{30, 20, 25};
  double contrast = 6.0;  // tumor offset, in units of noise_sigma
  double noise_sigma = 1.0;
  double core_fraction = 0.4;
  double rim_fraction = 0.6;
};

struct Phantom {
  Volume3D volume;
  SegMask3D mask;
  PhantomParams params;
  std::uint64_t seed = 0;

  // Case holding the volume as flair plus the mask.
  Case to_case(const std::string& case_id) const;
};

// Throws ShapeError when the ellipsoid's extent leaves the volume.
Phantom generate_phantom(std::uint64_t seed, const PhantomParams& params);

enum class Placement {
  kInterior,  // centroid at least 64 voxels from every face
  kAnywhere,  // any position where the whole ellipsoid fits
};

struct PhantomCorpusParams {
  Shape3 shape = kBratsShape;
  double min_semi_axis = 12;
  double max_semi_axis = 30;
  double contrast = 6.0;
  double noise_sigma = 1.0;
  Placement placement = Placement::kInterior;
};

// Parameters of phantom `index` of a corpus; integer-valued centers and
// semi-axes drawn from case_seed(seed, "phantom_<index>").
PhantomParams corpus_phantom_params(std::uint64_t seed, std::size_t index, const PhantomCorpusParams& corpus);
std::string phantom_case_id(std::size_t index);

}  // namespace topopatch
