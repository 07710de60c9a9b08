#include "topopatch/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace topopatch {

Case Phantom::to_case(const std::string& case_id) const {
  Case c;
  c.case_id = case_id;
  c.modalities.emplace("flair", volume);
  c.mask = mask;
  return c;
}

Phantom generate_phantom(std::uint64_t seed, const PhantomParams& p) {
  const Shape3& s = p.shape;
  for (std::size_t a = 0; a < 3; ++a) {
    if (!(p.semi_axes[a] > 0)) throw ConfigError("phantom semi-axes must be positive");
    if (p.center[a] - p.semi_axes[a] < 0 || p.center[a] + p.semi_axes[a] > static_cast<double>(s[a] - 1)) {
      throw ShapeError("phantom tumor leaves the volume on axis " + std::to_string(a));
    }
  }
  if (!(p.noise_sigma >= 0) || !(p.contrast >= 0)) throw ConfigError("phantom contrast and noise must be >= 0");

  SplitMix64 rng(seed);
  std::vector<float> vol(s.size());
  for (auto& v : vol) v = static_cast<float>(p.noise_sigma * rng.normal());
  std::vector<std::uint8_t> labels(s.size(), 0);

  const double offset = p.contrast * p.noise_sigma;
  const auto lo = [&](std::size_t a) { return static_cast<std::size_t>(std::floor(p.center[a] - p.semi_axes[a])); };
  const auto hi = [&](std::size_t a) { return static_cast<std::size_t>(std::ceil(p.center[a] + p.semi_axes[a])); };
  for (std::size_t z = lo(2); z <= hi(2); ++z) {
    const double dz = (static_cast<double>(z) - p.center[2]) / p.semi_axes[2];
    for (std::size_t y = lo(1); y <= hi(1); ++y) {
      const double dy = (static_cast<double>(y) - p.center[1]) / p.semi_axes[1];
      for (std::size_t x = lo(0); x <= hi(0); ++x) {
        const double dx = (static_cast<double>(x) - p.center[0]) / p.semi_axes[0];
        const double r2 = dx * dx + dy * dy + dz * dz;
        if (r2 > 1.0) continue;
        const std::size_t i = x + s.nx * (y + s.ny * z);
        const double r = std::sqrt(r2);
        labels[i] = r <= p.core_fraction ? 1 : (r <= p.rim_fraction ? 4 : 2);
        vol[i] = static_cast<float>(vol[i] + offset);
      }
    }
  }
  return Phantom{Volume3D(s, std::move(vol)), SegMask3D(Grid<std::uint8_t>(s, std::move(labels))), p, seed};
}

std::string phantom_case_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "phantom_%03zu", index);
  return buf;
}

PhantomParams corpus_phantom_params(std::uint64_t seed, std::size_t index, const PhantomCorpusParams& corpus) {
  if (!(corpus.min_semi_axis >= 1) || corpus.max_semi_axis < corpus.min_semi_axis) {
    throw ConfigError("phantom semi-axis range is invalid");
  }
  SplitMix64 rng(case_seed(seed, phantom_case_id(index)));
  PhantomParams p;
  p.shape = corpus.shape;
  p.contrast = corpus.contrast;
  p.noise_sigma = corpus.noise_sigma;
  const auto span = static_cast<std::uint64_t>(corpus.max_semi_axis - corpus.min_semi_axis);
  for (std::size_t a = 0; a < 3; ++a) {
    p.semi_axes[a] = std::floor(corpus.min_semi_axis) + static_cast<double>(rng.below(span + 1));
  }
  for (std::size_t a = 0; a < 3; ++a) {
    const double bound = static_cast<double>(corpus.shape[a]);
    double lo = std::ceil(p.semi_axes[a]);
    double hi = bound - 1 - std::ceil(p.semi_axes[a]);
    if (corpus.placement == Placement::kInterior) {
      lo = std::max(lo, 64.0);
      hi = std::min(hi, bound - 64.0);
    }
    if (hi < lo) throw ConfigError("phantom corpus: no valid tumor position on axis " + std::to_string(a));
    p.center[a] = lo + static_cast<double>(rng.below(static_cast<std::uint64_t>(hi - lo) + 1));
  }
  return p;
}

}  // namespace topopatch
