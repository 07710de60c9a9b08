#include "topopatch/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "topopatch/volume_io.hpp"

namespace topopatch {

namespace {

// Half-sample symmetric reflection: -1 -> 0, n -> n-1. Repeats for
// kernels wider than the image.
inline std::size_t reflect(long i, long n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return static_cast<std::size_t>(i);
}

std::vector<double> gaussian_1d(double sigma, int radius) {
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i) {
    w[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= total;
  return w;
}

// 1D correlation along `axis` with reflection.
template <typename T>
Grid<T> convolve_axis(const Grid<T>& img, const std::vector<double>& w, int axis) {
  const auto& s = img.shape();
  const long n = static_cast<long>(s[static_cast<std::size_t>(axis)]);
  const long r = static_cast<long>(w.size() / 2);
  const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? s.nx : s.nx * s.ny);
  Grid<T> out(s);
  std::vector<double> line(static_cast<std::size_t>(n));
  for (std::size_t z = 0; z < (axis == 2 ? 1 : s.nz); ++z) {
    for (std::size_t y = 0; y < (axis == 1 ? 1 : s.ny); ++y) {
      for (std::size_t x = 0; x < (axis == 0 ? 1 : s.nx); ++x) {
        const std::size_t base = img.index(x, y, z);
        for (long i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = img[base + static_cast<std::size_t>(i) * stride];
        for (long i = 0; i < n; ++i) {
          double acc = 0;
          for (long k = -r; k <= r; ++k) acc += w[static_cast<std::size_t>(k + r)] * line[reflect(i + k, n)];
          out[base + static_cast<std::size_t>(i) * stride] = static_cast<T>(acc);
        }
      }
    }
  }
  return out;
}

}  // namespace

// ---- FilterKernel ------------------------------------------------------------

FilterKernel::FilterKernel(Shape3 s, std::vector<double> w) : shape(s), weights(std::move(w)) {
  if (shape.nx % 2 == 0 || shape.ny % 2 == 0 || shape.nz % 2 == 0) {
    throw ShapeError("kernel side lengths must be odd, got " + to_string(shape));
  }
  if (weights.size() != shape.size()) throw ShapeError("kernel weight count does not match its shape");
}

double FilterKernel::sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

FilterKernel FilterKernel::identity() { return FilterKernel(Shape3{1, 1, 1}, {1.0}); }

FilterKernel FilterKernel::box(int radius, bool three_d) {
  const auto side = static_cast<std::size_t>(2 * radius + 1);
  const Shape3 s{side, side, three_d ? side : 1};
  return FilterKernel(s, std::vector<double>(s.size(), 1.0 / static_cast<double>(s.size())));
}

FilterKernel FilterKernel::gaussian(double sigma, int radius, bool three_d) {
  if (!(sigma > 0)) throw ConfigError("gaussian sigma must be positive");
  if (radius < 0) throw ConfigError("gaussian radius must be non-negative");
  const auto g = gaussian_1d(sigma, radius);
  const auto side = g.size();
  const Shape3 s{side, side, three_d ? side : 1};
  std::vector<double> w(s.size());
  for (std::size_t z = 0; z < s.nz; ++z) {
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        w[x + side * (y + side * z)] = g[x] * g[y] * (three_d ? g[z] : 1.0);
      }
    }
  }
  return FilterKernel(s, std::move(w));
}

FilterKernel FilterKernel::cross(bool three_d) {
  if (!three_d) {
    return FilterKernel(Shape3{3, 3, 1}, {0, -1, 0, -1, 4, -1, 0, -1, 0});
  }
  std::vector<double> w(27, 0.0);
  w[13] = 6;
  for (std::size_t i : {4u, 10u, 12u, 14u, 16u, 22u}) w[i] = -1;
  return FilterKernel(Shape3{3, 3, 3}, std::move(w));
}

// ---- normalization / filtering -----------------------------------------------

template <typename T>
Grid<T> zscore_normalize(const Grid<T>& vol) {
  const std::size_t n = vol.size();
  if (n < 2) throw DegenerateInputError("z-score needs at least 2 voxels");
  double mean = 0;
  for (auto v : vol.values()) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0;
  for (auto v : vol.values()) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 0)) throw DegenerateInputError("z-score of a constant volume (sigma = 0)");
  Grid<T> out(vol.shape());
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>((vol[i] - mean) / sd);
  return out;
}

template <typename T>
Grid<T> convolve(const Grid<T>& img, const FilterKernel& k) {
  const auto& s = img.shape();
  struct Tap {
    int dx, dy, dz;
    double w;
  };
  std::vector<Tap> taps;
  for (int u = -k.half_z(); u <= k.half_z(); ++u) {
    for (int t = -k.half_y(); t <= k.half_y(); ++t) {
      for (int sx = -k.half_x(); sx <= k.half_x(); ++sx) {
        const double w = k.at(sx, t, u);
        if (w != 0.0) taps.push_back({sx, t, u, w});
      }
    }
  }
  const long nx = static_cast<long>(s.nx), ny = static_cast<long>(s.ny), nz = static_cast<long>(s.nz);
  const int hx = k.half_x(), hy = k.half_y(), hz = k.half_z();
  Grid<T> out(s);
  for (long z = 0; z < nz; ++z) {
    const bool z_in = z >= hz && z < nz - hz;
    for (long y = 0; y < ny; ++y) {
      const bool y_in = y >= hy && y < ny - hy;
      for (long x = 0; x < nx; ++x) {
        double acc = 0;
        if (z_in && y_in && x >= hx && x < nx - hx) {
          const std::size_t c = img.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                          static_cast<std::size_t>(z));
          for (const auto& tp : taps) {
            acc += tp.w * img[c + static_cast<std::size_t>(tp.dx + nx * (tp.dy + ny * tp.dz))];
          }
        } else {
          for (const auto& tp : taps) {
            acc += tp.w * img(reflect(x + tp.dx, nx), reflect(y + tp.dy, ny), reflect(z + tp.dz, nz));
          }
        }
        out(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z)) =
            static_cast<T>(acc);
      }
    }
  }
  return out;
}

template <typename T>
Grid<T> gaussian_blur(const Grid<T>& img, double sigma, int radius) {
  if (!(sigma > 0)) throw ConfigError("gaussian sigma must be positive");
  if (radius < 0) throw ConfigError("gaussian radius must be non-negative");
  const auto& s = img.shape();
  const auto w = gaussian_1d(sigma, radius);
  Grid<T> out = convolve_axis(img, w, 0);
  out = convolve_axis(out, w, 1);
  if (!s.is_2d()) out = convolve_axis(out, w, 2);
  return out;
}

GradientField gradient(const Slice2D& img) {
  const auto& s = img.shape();
  if (!s.is_2d() || s.nx < 3 || s.ny < 3) throw ShapeError("gradient needs a 2D image of at least 3x3");
  GradientField g{Slice2D(s), Slice2D(s), Slice2D(s), Slice2D(s)};
  const std::size_t nx = s.nx, ny = s.ny;
  for (std::size_t y = 0; y < ny; ++y) {
    for (std::size_t x = 0; x < nx; ++x) {
      double dx = 0;
      if (x == 0) {
        dx = img(1, y) - img(0, y);
      } else if (x == nx - 1) {
        dx = img(x, y) - img(x - 1, y);
      } else {
        dx = 0.5 * (img(x + 1, y) - img(x - 1, y));
      }
      double dy = 0;
      if (y == 0) {
        dy = img(x, 1) - img(x, 0);
      } else if (y == ny - 1) {
        dy = img(x, y) - img(x, y - 1);
      } else {
        dy = 0.5 * (img(x, y + 1) - img(x, y - 1));
      }
      g.gx(x, y) = dx;
      g.gy(x, y) = dy;
      g.magnitude(x, y) = std::sqrt(dx * dx + dy * dy);
      double theta = std::atan2(dy, dx);
      if (theta <= -std::numbers::pi) theta = std::numbers::pi;
      g.direction(x, y) = theta;
    }
  }
  return g;
}

template <typename T>
Grid<T> sharpen(const Grid<T>& img) {
  const auto& s = img.shape();
  if (s.nx < 3 || s.ny < 3 || (!s.is_2d() && s.nz < 3)) {
    throw ShapeError("sharpen needs at least 3 voxels per axis, got " + to_string(s));
  }
  Grid<T> edges = convolve(img, FilterKernel::cross(!s.is_2d()));
  for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = static_cast<T>(img[i] + edges[i]);
  return edges;
}

// ---- thresholding ----------------------------------------------------------------

template <typename T>
Histogram histogram256(const Grid<T>& img) {
  Histogram h;
  const auto [lo, hi] = std::minmax_element(img.raw().begin(), img.raw().end());
  h.min = *lo;
  h.max = *hi;
  const double range = h.max - h.min;
  for (auto v : img.values()) {
    std::size_t bin = 0;
    if (range > 0) {
      const double pos = (v - h.min) / range * static_cast<double>(kHistogramBins);
      bin = std::min<std::size_t>(kHistogramBins - 1, static_cast<std::size_t>(pos));
    }
    ++h.counts[bin];
  }
  return h;
}

double yen_criterion(std::span<const std::uint64_t> hist, int lo, int t, int hi) {
  double c1 = 0, c2 = 0, s1 = 0, s2 = 0;
  for (int i = lo; i <= t; ++i) {
    const auto c = static_cast<double>(hist[static_cast<std::size_t>(i)]);
    c1 += c;
    s1 += c * c;
  }
  for (int i = t + 1; i <= hi; ++i) {
    const auto c = static_cast<double>(hist[static_cast<std::size_t>(i)]);
    c2 += c;
    s2 += c * c;
  }
  return 2.0 * (std::log(c1) + std::log(c2)) - (std::log(s1) + std::log(s2));
}

namespace {

// Best cut in [lo, hi); -1 if no cut leaves both classes nonempty.
int yen_single(std::span<const std::uint64_t> hist, int lo, int hi) {
  // Counts and squared counts stay exact in 64-bit integers for any
  // histogram of fewer than 2^32 voxels; the criterion is formed from them.
  std::uint64_t total = 0, total_sq = 0;
  for (int i = lo; i <= hi; ++i) {
    const std::uint64_t c = hist[static_cast<std::size_t>(i)];
    total += c;
    total_sq += c * c;
  }
  std::uint64_t c1 = 0, s1 = 0;
  int best = -1;
  double best_crit = 0;
  for (int t = lo; t < hi; ++t) {
    const std::uint64_t c = hist[static_cast<std::size_t>(t)];
    c1 += c;
    s1 += c * c;
    const std::uint64_t c2 = total - c1;
    const std::uint64_t s2 = total_sq - s1;
    if (c1 == 0 || c2 == 0) continue;
    const double crit = 2.0 * (std::log(static_cast<double>(c1)) + std::log(static_cast<double>(c2))) -
                        (std::log(static_cast<double>(s1)) + std::log(static_cast<double>(s2)));
    if (best < 0 || crit > best_crit) {
      best = t;
      best_crit = crit;
    }
  }
  return best;
}

int nonempty_bins(std::span<const std::uint64_t> hist, int lo, int hi) {
  int n = 0;
  for (int i = lo; i <= hi; ++i) n += hist[static_cast<std::size_t>(i)] != 0;
  return n;
}

}  // namespace

std::vector<int> yen_thresholds(std::span<const std::uint64_t> hist, int levels) {
  if (hist.empty()) throw DegenerateInputError("empty histogram");
  if (levels < 1) throw ConfigError("yen levels must be >= 1");
  const int hi = static_cast<int>(hist.size()) - 1;
  const int nonempty = nonempty_bins(hist, 0, hi);
  if (nonempty < 2) throw DegenerateInputError("histogram has fewer than 2 nonempty bins");
  if (levels > nonempty - 1) {
    throw ConfigError("yen levels " + std::to_string(levels) + " exceed nonempty bins - 1 (" +
                      std::to_string(nonempty - 1) + ")");
  }
  std::vector<int> out;
  int lo = 0;
  for (int level = 0; level < levels; ++level) {
    if (nonempty_bins(hist, lo, hi) < 2) break;
    const int t = yen_single(hist, lo, hi);
    if (t < 0) break;
    out.push_back(t);
    lo = t + 1;
  }
  return out;
}

template <typename T>
BinaryMask threshold_top_class(const Grid<T>& img, std::span<const double> thresholds) {
  BinaryMask out(img.shape());
  if (thresholds.empty()) return out;
  const double top = thresholds.back();
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i] > top ? 1 : 0;
  return out;
}

// ---- morphology ----------------------------------------------------------------

namespace {

// Running min (erode) or max (dilate) over a box, one axis at a time.
BinaryMask box_filter(const BinaryMask& mask, int radius, bool take_max) {
  if (radius < 1) throw ConfigError("structuring element radius must be >= 1");
  const auto& s = mask.shape();
  BinaryMask cur = mask;
  BinaryMask next(s);
  const int axes = s.is_2d() ? 2 : 3;
  for (int axis = 0; axis < axes; ++axis) {
    const long n = static_cast<long>(s[static_cast<std::size_t>(axis)]);
    const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? s.nx : s.nx * s.ny);
    for (std::size_t z = 0; z < (axis == 2 ? 1 : s.nz); ++z) {
      for (std::size_t y = 0; y < (axis == 1 ? 1 : s.ny); ++y) {
        for (std::size_t x = 0; x < (axis == 0 ? 1 : s.nx); ++x) {
          const std::size_t base = cur.index(x, y, z);
          for (long i = 0; i < n; ++i) {
            const long a = std::max(0L, i - radius);
            const long b = std::min(n - 1, i + static_cast<long>(radius));
            std::uint8_t v = take_max ? 0 : 1;
            for (long j = a; j <= b; ++j) {
              const std::uint8_t m = cur[base + static_cast<std::size_t>(j) * stride];
              if (take_max ? m != 0 : m == 0) {
                v = take_max ? 1 : 0;
                break;
              }
            }
            next[base + static_cast<std::size_t>(i) * stride] = v;
          }
        }
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

}  // namespace

BinaryMask erode(const BinaryMask& mask, int radius) { return box_filter(mask, radius, false); }
BinaryMask dilate(const BinaryMask& mask, int radius) { return box_filter(mask, radius, true); }
BinaryMask morph_open(const BinaryMask& mask, int radius) { return dilate(erode(mask, radius), radius); }
BinaryMask morph_close(const BinaryMask& mask, int radius) { return erode(dilate(mask, radius), radius); }
BinaryMask morph_open_close(const BinaryMask& mask, int se_radius) {
  return morph_close(morph_open(mask, se_radius), se_radius);
}

// ---- ROI chain -------------------------------------------------------------------

template <typename T>
BinaryMask extract_roi(const Grid<T>& img, const RoiParams& p, RoiStages* stages) {
  const auto record = [&](const char* name, auto&& grid) {
    if (stages != nullptr) stages->stages.emplace_back(name, grid_cast<float>(grid));
  };
  record("1_original", img);
  const Grid<T> blurred = gaussian_blur(img, p.sigma, p.radius);
  record("2_blur", blurred);
  const Grid<T> enhanced = sharpen(blurred);
  record("3_enhanced", enhanced);

  const Histogram hist = histogram256(enhanced);
  const auto bins = yen_thresholds(hist.counts, p.yen_levels);
  std::vector<double> thresholds;
  thresholds.reserve(bins.size());
  for (int b : bins) thresholds.push_back(hist.upper_edge(b));
  const BinaryMask top = threshold_top_class(enhanced, thresholds);
  record("4_threshold", top);

  BinaryMask cleaned = morph_open_close(top, p.se_radius);
  record("5_open_close", cleaned);
  if (stages != nullptr) {
    Grid<float> roi(img.shape());
    for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = cleaned[i] ? static_cast<float>(img[i]) : 0.0F;
    stages->stages.emplace_back("6_roi", std::move(roi));
  }
  return cleaned;
}

void dump_roi_stages(const RoiStages& stages, const std::filesystem::path& dir, const std::string& case_id) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, grid] : stages.stages) {
    save_volume(grid, dir / (case_id + "_" + name + ".raw"), VolumeFormat::kRawF32);
  }
}

#define TOPOPATCH_INSTANTIATE(T)                                                       \
  template Grid<T> zscore_normalize(const Grid<T>&);                                   \
  template Grid<T> convolve(const Grid<T>&, const FilterKernel&);                      \
  template Grid<T> gaussian_blur(const Grid<T>&, double, int);                         \
  template Grid<T> sharpen(const Grid<T>&);                                            \
  template Histogram histogram256(const Grid<T>&);                                     \
  template BinaryMask threshold_top_class(const Grid<T>&, std::span<const double>);    \
  template BinaryMask extract_roi(const Grid<T>&, const RoiParams&, RoiStages*);

TOPOPATCH_INSTANTIATE(float)
TOPOPATCH_INSTANTIATE(double)

#undef TOPOPATCH_INSTANTIATE

}  // namespace topopatch
