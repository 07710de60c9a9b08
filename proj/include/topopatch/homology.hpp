#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "topopatch/grid.hpp"

namespace topopatch {

enum class Filtration { kSublevel, kSuperlevel };

// One 0-dimensional class. For sublevel diagrams death >= birth; superlevel
// diagrams keep original intensities, so there death <= birth. Essential
// classes have death = +inf (sublevel) or -inf (superlevel).
struct PersistencePair {
  double birth = 0;
  double death = 0;
  std::size_t birth_index = 0;
  Index3 birth_location{};

  bool essential() const { return std::isinf(death); }
  double lifetime() const { return std::abs(death - birth); }

  friend bool operator==(const PersistencePair&, const PersistencePair&) = default;
};

struct PersistenceDiagram0 {
  std::vector<PersistencePair> pairs;
  Filtration kind = Filtration::kSublevel;
  Shape3 source_shape;
  int connectivity = 0;
  // Intensity range over the pixels that entered the filtration.
  double value_min = 0;
  double value_max = 0;

  std::size_t essential_count() const;
  // Filtration value an essential class is capped at (value_max for
  // sublevel, value_min for superlevel).
  double cap_value() const { return kind == Filtration::kSublevel ? value_max : value_min; }
};

// 0-dim persistence of the vertex-valued cubical filtration. A pixel enters
// at its own value; pixels are processed by (value, flat index) and merged
// through union-find under the elder rule. Zero-length pairs are not
// reported. `support`, when given, restricts which pixels ever enter.
// connectivity: 0 = default (8 in 2D, 26 in 3D).
template <typename T>
PersistenceDiagram0 persistence_0d(const Grid<T>& img, Filtration kind, int connectivity = 0,
                                   const BinaryMask* support = nullptr);

enum class EssentialPolicy { kDrop, kCapAtMax };

// Max lifetime of any class born at each pixel; 0 elsewhere.
Grid<double> lifetime_image(const PersistenceDiagram0& d, EssentialPolicy policy = EssentialPolicy::kCapAtMax);

enum class SurfaceWeight { kLinearLifetime };

// Sum over pairs of a Gaussian bump centered at the birth location, scaled by
// the pair's weight. Each bump is sampled on a window of radius ceil(4 sigma),
// clipped to the grid and normalized to unit sum there.
Grid<double> persistence_surface(const PersistenceDiagram0& d, double sigma,
                                 SurfaceWeight weight = SurfaceWeight::kLinearLifetime,
                                 EssentialPolicy policy = EssentialPolicy::kDrop);

struct ComponentSelection {
  PersistencePair pair;
  Coord3 centroid{};
  std::size_t voxel_count = 0;
};

// Picks the most persistent class and returns the centroid of its component.
// Ranking: essential classes first (among them the larger capped lifetime),
// then lifetime; ties go to the larger component, then the smaller birth
// location (x, y, z). The component of a finite class is the set reachable
// from its birth pixel through pixels strictly before its death value; an
// essential class takes its whole connected support.
template <typename T>
ComponentSelection strongest_component(const Grid<T>& img, Filtration kind, int connectivity = 0,
                                       const BinaryMask* support = nullptr);

template <typename T>
Coord3 strongest_component_centroid(const Grid<T>& img, Filtration kind, int connectivity = 0,
                                    const BinaryMask* support = nullptr) {
  return strongest_component(img, kind, connectivity, support).centroid;
}

// CSV with header "birth,death,bx,by[,bz]"; essential deaths print as inf/-inf.
std::string diagram_to_csv(const PersistenceDiagram0& d);
void write_diagram_csv(const PersistenceDiagram0& d, const std::filesystem::path& path);

}  // namespace topopatch
