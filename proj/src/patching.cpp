#include "topopatch/patching.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "topopatch/metrics.hpp"
#include "topopatch/rng.hpp"

namespace topopatch {

// ---- PatchSpec -------------------------------------------------------------------

namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 7> kStrategyNames = {{
    {Strategy::kCca, "cca"},
    {Strategy::kTda2d, "tda2d"},
    {Strategy::kCenteredCrop, "centered_crop"},
    {Strategy::kFixedQuadrant, "fixed_quadrant"},
    {Strategy::kRandom, "random"},
    {Strategy::kRandomSeeded, "random_seeded"},
    {Strategy::kOverlapping, "overlapping"},
}};

Shape3 cube(std::size_t side, const Shape3& bounds) {
  return bounds.is_2d() ? Shape3{side, side, 1} : Shape3{side, side, side};
}

void check_fits(const Shape3& size, const Shape3& bounds) {
  if (size.nx > bounds.nx || size.ny > bounds.ny || size.nz > bounds.nz) {
    throw ShapeError("patch size " + to_string(size) + " exceeds volume " + to_string(bounds));
  }
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  for (const auto& [k, name] : kStrategyNames) {
    if (k == s) return name;
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (const auto& [k, n] : kStrategyNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

PatchSpec::PatchSpec(Index3 origin, Shape3 size, Shape3 bounds, Strategy strategy, StrategyParams params,
                     std::string source_case)
    : origin_(origin),
      size_(size),
      bounds_(bounds),
      strategy_(strategy),
      params_(params),
      source_case_(std::move(source_case)) {
  if (size.nx == 0 || size.ny == 0 || size.nz == 0) throw ShapeError("patch size must be positive");
  check_fits(size, bounds);
  for (std::size_t a = 0; a < 3; ++a) {
    if (origin[a] + size[a] > bounds[a]) {
      throw ShapeError("patch origin " + std::to_string(origin[a]) + " + size " + std::to_string(size[a]) +
                       " exceeds bound " + std::to_string(bounds[a]) + " on axis " + std::to_string(a));
    }
  }
}

Coord3 PatchSpec::center() const {
  return {static_cast<double>(origin_[0]) + static_cast<double>(size_.nx) / 2.0,
          static_cast<double>(origin_[1]) + static_cast<double>(size_.ny) / 2.0,
          static_cast<double>(origin_[2]) + static_cast<double>(size_.nz) / 2.0};
}

// ---- window placement and cropping ---------------------------------------------------

Index3 clamp_window(const Coord3& centroid, const Shape3& size, const Shape3& bounds) {
  check_fits(size, bounds);
  Index3 origin{};
  for (std::size_t a = 0; a < 3; ++a) {
    const long start = std::lround(centroid[a]) - static_cast<long>(size[a] / 2);
    const long hi = static_cast<long>(bounds[a] - size[a]);
    origin[a] = static_cast<std::size_t>(std::clamp(start, 0L, hi));
  }
  return origin;
}

template <typename T>
Grid<T> crop(const Grid<T>& src, const PatchSpec& spec) {
  if (src.shape() != spec.bounds()) {
    throw ShapeError("crop source " + to_string(src.shape()) + " differs from patch bounds " + to_string(spec.bounds()));
  }
  const auto& o = spec.origin();
  const auto& s = spec.size();
  Grid<T> out(s);
  for (std::size_t z = 0; z < s.nz; ++z) {
    for (std::size_t y = 0; y < s.ny; ++y) {
      const T* row = &src(o[0], o[1] + y, o[2] + z);
      std::copy(row, row + s.nx, &out(0, y, z));
    }
  }
  return out;
}

template Grid<float> crop(const Grid<float>&, const PatchSpec&);
template Grid<double> crop(const Grid<double>&, const PatchSpec&);
template Grid<std::uint8_t> crop(const Grid<std::uint8_t>&, const PatchSpec&);

Patch crop_case(const Case& c, const PatchSpec& spec, PatchProvenance provenance) {
  Patch p{spec, {}, std::nullopt, std::move(provenance)};
  for (const auto& [name, vol] : c.modalities) p.data.emplace(name, crop(vol, spec));
  if (c.mask) p.mask_crop = SegMask3D(crop(c.mask->labels(), spec));
  return p;
}

// ---- baseline windows -------------------------------------------------------------

PatchSpec centered_spec(const Shape3& bounds, std::size_t size, const std::string& case_id) {
  const Shape3 sz = cube(size, bounds);
  check_fits(sz, bounds);
  return PatchSpec({(bounds.nx - sz.nx) / 2, (bounds.ny - sz.ny) / 2, (bounds.nz - sz.nz) / 2}, sz, bounds,
                   Strategy::kCenteredCrop, {}, case_id);
}

std::vector<PatchSpec> quadrant_specs(const Shape3& bounds, std::size_t size, const std::string& case_id) {
  const Shape3 sz = cube(size, bounds);
  check_fits(sz, bounds);
  const std::size_t hx = bounds.nx - sz.nx, hy = bounds.ny - sz.ny, z0 = (bounds.nz - sz.nz) / 2;
  std::vector<PatchSpec> out;
  for (int q = 0; q < 4; ++q) {
    StrategyParams params;
    params.quadrant = q;
    params.index = q;
    out.emplace_back(Index3{q >= 2 ? hx : 0, q % 2 == 1 ? hy : 0, z0}, sz, bounds, Strategy::kFixedQuadrant, params,
                     case_id);
  }
  return out;
}

PatchSpec random_spec(const Shape3& bounds, std::uint64_t seed, Strategy strategy, std::size_t size,
                      const std::string& case_id) {
  const Shape3 sz = cube(size, bounds);
  check_fits(sz, bounds);
  SplitMix64 rng(seed);
  Index3 origin{};
  for (std::size_t a = 0; a < 3; ++a) origin[a] = static_cast<std::size_t>(rng.below(bounds[a] - sz[a] + 1));
  StrategyParams params;
  params.seed = seed;
  return PatchSpec(origin, sz, bounds, strategy, params, case_id);
}

std::vector<std::size_t> overlapping_axis_origins(std::size_t bound, std::size_t stride, std::size_t size) {
  if (stride == 0) throw ConfigError("overlapping stride must be positive");
  if (size > bound) throw ShapeError("patch size exceeds axis bound");
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + size <= bound; o += stride) out.push_back(o);
  if (out.back() + size != bound) out.push_back(bound - size);
  return out;
}

std::vector<PatchSpec> overlapping_specs(const Shape3& bounds, std::size_t stride, std::size_t size,
                                         const std::string& case_id) {
  const Shape3 sz = cube(size, bounds);
  check_fits(sz, bounds);
  const auto xs = overlapping_axis_origins(bounds.nx, stride, sz.nx);
  const auto ys = overlapping_axis_origins(bounds.ny, stride, sz.ny);
  const auto zs = overlapping_axis_origins(bounds.nz, stride, sz.nz);
  std::vector<PatchSpec> out;
  for (auto z : zs) {
    for (auto y : ys) {
      for (auto x : xs) {
        StrategyParams params;
        params.stride = stride;
        params.index = static_cast<int>(out.size());
        out.emplace_back(Index3{x, y, z}, sz, bounds, Strategy::kOverlapping, params, case_id);
      }
    }
  }
  return out;
}

Patch patch_centered_crop(const Case& c, std::size_t size) {
  return crop_case(c, centered_spec(c.shape(), size, c.case_id));
}

std::vector<Patch> patch_fixed_quadrants(const Case& c, std::size_t size) {
  std::vector<Patch> out;
  for (const auto& spec : quadrant_specs(c.shape(), size, c.case_id)) out.push_back(crop_case(c, spec));
  return out;
}

Patch patch_random(const Case& c, std::uint64_t seed, Strategy strategy, std::size_t size) {
  PatchSpec spec = random_spec(c.shape(), case_seed(seed, c.case_id), strategy, size, c.case_id);
  StrategyParams params = spec.params();
  params.seed = seed;
  return crop_case(c, PatchSpec(spec.origin(), spec.size(), spec.bounds(), strategy, params, c.case_id));
}

std::vector<Patch> patch_overlapping(const Case& c, std::size_t stride, std::size_t size) {
  std::vector<Patch> out;
  for (const auto& spec : overlapping_specs(c.shape(), stride, size, c.case_id)) out.push_back(crop_case(c, spec));
  return out;
}

// ---- CCA (3D) ---------------------------------------------------------------------------

Patch patch_cca_3d(const Case& c, const CcaParams& params, RoiStages* stages) {
  const Volume3D& flair = c.flair();
  const Shape3 bounds = flair.shape();
  const Shape3 size = cube(params.size, bounds);
  check_fits(size, bounds);

  PatchProvenance prov;
  const Volume3D normalized = zscore_normalize(flair);
  std::optional<ComponentSet> kept;
  try {
    const BinaryMask roi = extract_roi(normalized, params.roi, stages);
    const ComponentSet all = label_components(roi, params.connectivity);
    prov.components_found = all.components.size();
    kept = filter_small(all, params.min_voxels);
    prov.components_kept = kept->components.size();
  } catch (const DegenerateInputError& e) {
    prov.warnings.push_back(std::string("roi_extraction_failed: ") + e.what());
  } catch (const ConfigError& e) {
    prov.warnings.push_back(std::string("roi_extraction_failed: ") + e.what());
  }

  if (!kept || kept->components.empty()) {
    if (kept) prov.warnings.emplace_back("empty_roi: no component reached the size filter; centered crop used");
    const PatchSpec fallback = centered_spec(bounds, params.size, c.case_id);
    return crop_case(c, PatchSpec(fallback.origin(), size, bounds, Strategy::kCca, {}, c.case_id), std::move(prov));
  }

  const Coord3 centroid = mask_centroid(*kept, params.centroid_mode);
  prov.anchor = centroid;
  if (c.mask) prov.roi_dice = mask_dice(kept->to_mask(), c.mask->whole_tumor());
  const PatchSpec spec(clamp_window(centroid, size, bounds), size, bounds, Strategy::kCca, {}, c.case_id);
  return crop_case(c, spec, std::move(prov));
}

// ---- TDA (2D) ---------------------------------------------------------------------------

Patch2D patch_tda_2d(const Slice2D& slice, const Tda2dParams& params, const std::string& case_id) {
  const Shape3 bounds = slice.shape();
  if (!bounds.is_2d()) throw ShapeError("patch_tda_2d expects a 2D slice");
  const Shape3 size{params.size, params.size, 1};
  check_fits(size, bounds);

  PatchProvenance prov;
  std::optional<ComponentSelection> best;
  try {
    const BinaryMask roi = extract_roi(slice, params.roi);
    if (count_true(roi) != 0) best = strongest_component(slice, Filtration::kSuperlevel, params.connectivity, &roi);
  } catch (const DegenerateInputError& e) {
    prov.warnings.push_back(std::string("roi_extraction_failed: ") + e.what());
  } catch (const ConfigError& e) {
    prov.warnings.push_back(std::string("roi_extraction_failed: ") + e.what());
  }

  Index3 origin{(bounds.nx - size.nx) / 2, (bounds.ny - size.ny) / 2, 0};
  if (best) {
    prov.anchor = best->centroid;
    origin = clamp_window(best->centroid, size, bounds);
  } else if (prov.warnings.empty()) {
    prov.warnings.emplace_back("empty_diagram: ROI is empty; centered crop used");
  }
  const PatchSpec spec(origin, size, bounds, Strategy::kTda2d, {}, case_id);
  return Patch2D{spec, crop(slice, spec), std::move(prov)};
}

Patch patch_tda_case(const Case& c, const Tda2dParams& params) {
  const Volume3D normalized = zscore_normalize(c.flair());
  const Shape3 bounds = normalized.shape();
  const Shape3 size = cube(params.size, bounds);
  check_fits(size, bounds);

  std::size_t best_k = 0;
  double best_mass = -1;
  for (std::size_t k = 0; k < bounds.nz; ++k) {
    double mass = 0;
    for (std::size_t y = 0; y < bounds.ny; ++y) {
      for (std::size_t x = 0; x < bounds.nx; ++x) mass += std::max(0.0F, normalized(x, y, k));
    }
    if (mass > best_mass) {
      best_mass = mass;
      best_k = k;
    }
  }
  const Patch2D p2 = patch_tda_2d(axial_slice(normalized, best_k), params, c.case_id);
  PatchProvenance prov = p2.provenance;
  prov.slice_index = best_k;
  const Index3 origin{p2.spec.origin()[0], p2.spec.origin()[1], (bounds.nz - size.nz) / 2};
  return crop_case(c, PatchSpec(origin, size, bounds, Strategy::kTda2d, {}, c.case_id), std::move(prov));
}

// ---- dispatch -----------------------------------------------------------------------------

std::vector<Patch> generate_patches(const Case& c, Strategy strategy, const PatchingConfig& config,
                                    RoiStages* stages) {
  switch (strategy) {
    case Strategy::kCca: {
      CcaParams p = config.cca;
      p.size = config.size;
      return {patch_cca_3d(c, p, stages)};
    }
    case Strategy::kTda2d: {
      Tda2dParams p = config.tda;
      p.size = config.size;
      return {patch_tda_case(c, p)};
    }
    case Strategy::kCenteredCrop:
      return {patch_centered_crop(c, config.size)};
    case Strategy::kFixedQuadrant:
      return patch_fixed_quadrants(c, config.size);
    case Strategy::kRandom:
      return {patch_random(c, config.seed, Strategy::kRandom, config.size)};
    case Strategy::kRandomSeeded:
      return {patch_random(c, config.seeded_seed, Strategy::kRandomSeeded, config.size)};
    case Strategy::kOverlapping:
      return patch_overlapping(c, config.stride, config.size);
  }
  throw ConfigError("unknown strategy");
}

}  // namespace topopatch
