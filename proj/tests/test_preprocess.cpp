#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "topopatch/metrics.hpp"
#include "topopatch/phantom.hpp"
#include "topopatch/preprocess.hpp"

using namespace topopatch;

namespace {

// Half-sample symmetric reflection: -1 -> 0, -2 -> 1, n -> n - 1.
long reflect(long i, long n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

// Direct evaluation of g(x) = sum_s w(s) f(x + s).
Grid<double> direct_convolve(const Grid<double>& f, const FilterKernel& k) {
  const auto& s = f.shape();
  Grid<double> g(s);
  for (long z = 0; z < static_cast<long>(s.nz); ++z)
    for (long y = 0; y < static_cast<long>(s.ny); ++y)
      for (long x = 0; x < static_cast<long>(s.nx); ++x) {
        double acc = 0;
        for (int u = -k.half_z(); u <= k.half_z(); ++u)
          for (int t = -k.half_y(); t <= k.half_y(); ++t)
            for (int q = -k.half_x(); q <= k.half_x(); ++q)
              acc += k.at(q, t, u) * f(reflect(x + q, s.nx), reflect(y + t, s.ny), reflect(z + u, s.nz));
        g(x, y, z) = acc;
      }
  return g;
}

Grid<double> random_grid(SplitMix64& rng, Shape3 s) {
  Grid<double> g(s);
  for (auto& v : g.values()) v = rng.uniform() * 10.0 - 5.0;
  return g;
}

FilterKernel random_kernel(SplitMix64& rng, Shape3 s) {
  std::vector<double> w(s.size());
  for (auto& v : w) v = rng.uniform() - 0.5;
  return FilterKernel(s, w);
}

double max_abs_diff(const Grid<double>& a, const Grid<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Slice2D plane(std::size_t nx, std::size_t ny, double (*f)(double, double)) {
  Slice2D g(Shape3{nx, ny, 1});
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) g(x, y) = f(static_cast<double>(x), static_cast<double>(y));
  return g;
}

}  // namespace

// ---- z-score --------------------------------------------------------------------

TEST_CASE("z-score uses the population standard deviation") {
  const Grid<double> v(Shape3{3, 1, 1}, std::vector<double>{1, 2, 3});
  const auto z = zscore_normalize(v);
  CHECK(z[0] == doctest::Approx(-1.224744871391589).epsilon(1e-12));
  CHECK(z[1] == doctest::Approx(0.0));
  CHECK(z[2] == doctest::Approx(1.224744871391589).epsilon(1e-12));
}

TEST_CASE("z-score output has mean 0 and std 1 and is a fixed point") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto v = random_grid(rng, {7, 5, 3});
    for (auto& x : v.values()) x = x * 30 + 100;
    const auto z = zscore_normalize(v);
    double mean = 0, sq = 0;
    for (double x : z.values()) mean += x;
    mean /= static_cast<double>(z.size());
    for (double x : z.values()) sq += (x - mean) * (x - mean);
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(std::sqrt(sq / static_cast<double>(z.size())) - 1.0) < 1e-6);
    CHECK(max_abs_diff(zscore_normalize(z), z) < 1e-6);
  }
}

TEST_CASE("z-score of a constant volume is degenerate") {
  CHECK_THROWS_AS(zscore_normalize(Volume3D(Shape3{4, 4, 4}, 3.0F)), DegenerateInputError);
}

// ---- kernels and convolution ------------------------------------------------------

TEST_CASE("kernels need odd side lengths") {
  CHECK_THROWS_AS(FilterKernel(Shape3{2, 3, 1}, std::vector<double>(6)), ShapeError);
  CHECK_THROWS_AS(FilterKernel(Shape3{3, 3, 1}, std::vector<double>(8)), ShapeError);
}

TEST_CASE("gaussian kernels sum to 1") {
  for (double sigma : {0.5, 1.0, 2.5})
    for (int r : {0, 1, 2, 5})
      for (bool three_d : {false, true}) CHECK(std::abs(FilterKernel::gaussian(sigma, r, three_d).sum() - 1.0) < 1e-9);
}

TEST_CASE("identity kernel leaves the image unchanged") {
  SplitMix64 rng(1);
  const auto f = random_grid(rng, {6, 5, 1});
  CHECK(convolve(f, FilterKernel::identity()) == f);
}

TEST_CASE("box kernel on a constant image returns the constant") {
  const Grid<double> f(Shape3{5, 5, 1}, 7.0);
  const auto g = convolve(f, FilterKernel::box(1, false));
  for (double v : g.values()) CHECK(v == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("box kernel hand sum") {
  const Grid<double> f(Shape3{3, 3, 1}, std::vector<double>{0, 9, 0, 0, 0, 0, 0, 0, 0});
  CHECK(convolve(f, FilterKernel::box(1, false))(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("convolution matches direct evaluation with reflected borders") {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const bool three_d = trial % 2 == 1;
    const Shape3 s = three_d ? Shape3{6, 5, 7} : Shape3{9, 8, 1};
    const Shape3 ks = three_d ? Shape3{3, 5, 3} : Shape3{5, 3, 1};
    const auto f = random_grid(rng, s);
    const auto k = random_kernel(rng, ks);
    CHECK(max_abs_diff(convolve(f, k), direct_convolve(f, k)) < 1e-12);
  }
}

TEST_CASE("convolution is linear") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_grid(rng, {8, 7, 3});
    const auto g = random_grid(rng, {8, 7, 3});
    const auto k = random_kernel(rng, {3, 3, 3});
    const double a = rng.uniform() * 4 - 2, b = rng.uniform() * 4 - 2;
    Grid<double> mix(f.shape());
    for (std::size_t i = 0; i < f.size(); ++i) mix[i] = a * f[i] + b * g[i];
    const auto lhs = convolve(mix, k);
    const auto cf = convolve(f, k), cg = convolve(g, k);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(lhs[i] - (a * cf[i] + b * cg[i])) < 1e-6);
  }
}

// ---- gaussian blur ------------------------------------------------------------------

TEST_CASE("gaussian impulse response is the kernel") {
  Grid<double> f(Shape3{9, 9, 1}, 0.0);
  f(4, 4) = 1.0;
  const auto g = gaussian_blur(f, 1.0, 2);
  const auto k = FilterKernel::gaussian(1.0, 2, false);
  for (int t = -2; t <= 2; ++t)
    for (int s = -2; s <= 2; ++s) CHECK(std::abs(g(4 + s, 4 + t) - k.at(s, t)) < 1e-12);
  CHECK(g(0, 0) == 0.0);
}

TEST_CASE("separable blur equals the full kernel") {
  SplitMix64 rng(4);
  for (const Shape3 s : {Shape3{12, 9, 1}, Shape3{8, 7, 6}}) {
    const auto f = random_grid(rng, s);
    const auto full = direct_convolve(f, FilterKernel::gaussian(1.3, 2, !s.is_2d()));
    CHECK(max_abs_diff(gaussian_blur(f, 1.3, 2), full) < 1e-12);
  }
}

TEST_CASE("blur keeps constants and shrinks a checkerboard's range") {
  const Grid<double> c(Shape3{6, 6, 1}, 2.5);
  const auto blurred = gaussian_blur(c, 1.0, 2);
  for (double v : blurred.values()) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
  Grid<double> board(Shape3{10, 10, 1});
  for (std::size_t y = 0; y < 10; ++y)
    for (std::size_t x = 0; x < 10; ++x) board(x, y) = (x + y) % 2 ? 1.0 : 0.0;
  const auto b = gaussian_blur(board, 1.0, 2);
  const auto [lo, hi] = std::minmax_element(b.raw().begin(), b.raw().end());
  CHECK(*hi - *lo < 1.0);
  CHECK(max_abs_diff(b, direct_convolve(board, FilterKernel::gaussian(1.0, 2, false))) < 1e-12);
}

TEST_CASE("kernels wider than the image reflect repeatedly") {
  SplitMix64 rng(10);
  const auto f = random_grid(rng, {3, 2, 1});
  const auto k = random_kernel(rng, {7, 5, 1});
  CHECK(max_abs_diff(convolve(f, k), direct_convolve(f, k)) < 1e-12);
}

TEST_CASE("float blur agrees with double blur") {
  SplitMix64 rng(9);
  const auto d = random_grid(rng, {10, 9, 4});
  const auto f = gaussian_blur(grid_cast<float>(d), 1.0, 2);
  const auto g = gaussian_blur(d, 1.0, 2);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(f[i] - g[i]) < 1e-5);
}

// ---- gradient ----------------------------------------------------------------------

TEST_CASE("gradient of a ramp") {
  const auto g = gradient(plane(6, 5, [](double x, double) { return x; }));
  for (std::size_t y = 1; y < 4; ++y)
    for (std::size_t x = 1; x < 5; ++x) {
      CHECK(g.gx(x, y) == doctest::Approx(1.0));
      CHECK(g.gy(x, y) == doctest::Approx(0.0));
      CHECK(g.magnitude(x, y) == doctest::Approx(1.0));
      CHECK(g.direction(x, y) == doctest::Approx(0.0));
    }
}

TEST_CASE("gradient magnitude of 3x + 4y is 5") {
  const auto g = gradient(plane(7, 7, [](double x, double y) { return 3 * x + 4 * y; }));
  for (std::size_t y = 1; y < 6; ++y)
    for (std::size_t x = 1; x < 6; ++x) CHECK(std::abs(g.magnitude(x, y) - 5.0) < 1e-9);
}

TEST_CASE("gradient of a constant is zero; directions lie in (-pi, pi]") {
  const auto c = gradient(Slice2D(Shape3{5, 5, 1}, 3.0));
  for (double v : c.magnitude.values()) CHECK(v == 0.0);
  SplitMix64 rng(6);
  const auto g = gradient(random_grid(rng, {8, 8, 1}));
  for (std::size_t i = 0; i < g.magnitude.size(); ++i) {
    CHECK(std::abs(g.magnitude[i] - std::hypot(g.gx[i], g.gy[i])) < 1e-9);
    CHECK(g.direction[i] > -std::numbers::pi);
    CHECK(g.direction[i] <= std::numbers::pi);
  }
  // Pointing along -x gives exactly pi.
  const auto left = gradient(plane(5, 5, [](double x, double) { return -x; }));
  CHECK(left.direction(2, 2) == doctest::Approx(std::numbers::pi));
}

// ---- sharpen -------------------------------------------------------------------------

TEST_CASE("sharpen leaves constants and ramps unchanged") {
  const Slice2D c(Shape3{5, 5, 1}, 4.0);
  CHECK(sharpen(c) == c);
  const auto ramp = plane(6, 6, [](double x, double) { return x; });
  const auto s = sharpen(ramp);
  for (std::size_t y = 1; y < 5; ++y)
    for (std::size_t x = 1; x < 5; ++x) CHECK(s(x, y) == doctest::Approx(ramp(x, y)));
}

TEST_CASE("sharpen of an impulse") {
  Slice2D f(Shape3{5, 5, 1}, 0.0);
  f(2, 2) = 1.0;
  const auto s = sharpen(f);
  CHECK(s(2, 2) == 5.0);
  CHECK(s(1, 2) == -1.0);
  CHECK(s(3, 2) == -1.0);
  CHECK(s(2, 1) == -1.0);
  CHECK(s(2, 3) == -1.0);
  CHECK(s(1, 1) == 0.0);
}

TEST_CASE("3D sharpen uses the six face neighbors") {
  Grid<double> f(Shape3{5, 5, 5}, 0.0);
  f(2, 2, 2) = 1.0;
  const auto s = sharpen(f);
  CHECK(s(2, 2, 2) == 7.0);
  CHECK(s(2, 2, 1) == -1.0);
  CHECK(s(2, 1, 1) == 0.0);
}

// ---- histogram and Yen --------------------------------------------------------------------

TEST_CASE("histogram spans min..max and the max lands in the last bin") {
  const Grid<double> g(Shape3{4, 1, 1}, std::vector<double>{0, 1, 2, 256});
  const auto h = histogram256(g);
  CHECK(h.min == 0);
  CHECK(h.max == 256);
  CHECK(h.counts[0] == 1);
  CHECK(h.counts[1] == 1);
  CHECK(h.counts[2] == 1);
  CHECK(h.counts[255] == 1);
}

TEST_CASE("two deltas are separated") {
  std::vector<std::uint64_t> h(256, 0);
  h[10] = 500;
  h[200] = 300;
  const auto t = yen_thresholds(h, 1);
  REQUIRE(t.size() == 1);
  CHECK(t[0] >= 10);
  CHECK(t[0] < 200);
}

TEST_CASE("Yen rejects degenerate histograms and impossible depths") {
  std::vector<std::uint64_t> h(256, 0);
  h[5] = 10;
  CHECK_THROWS_AS(yen_thresholds(h, 1), DegenerateInputError);
  h[9] = 10;
  CHECK_THROWS_AS(yen_thresholds(h, 2), ConfigError);
  CHECK_THROWS_AS(yen_thresholds(h, 0), ConfigError);
}

TEST_CASE("single-level Yen matches the exhaustive criterion argmax") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::uint64_t> h(256);
    const double zero_rate = rng.uniform() * 0.8;
    for (auto& c : h) c = rng.uniform() < zero_rate ? 0 : rng.below(1000);
    h[rng.below(256)] += 1;
    h[rng.below(256)] += 1;
    if (std::count_if(h.begin(), h.end(), [](auto c) { return c != 0; }) < 2) continue;
    const auto t = yen_thresholds(h, 1);
    REQUIRE(t.size() == 1);
    CHECK(t[0] == oracle::yen_argmax(h));
  }
}

TEST_CASE("multilevel Yen searches the upper class") {
  std::vector<std::uint64_t> h(256, 0);
  h[10] = 100;
  h[100] = 400;
  h[200] = 1000;
  const auto t = yen_thresholds(h, 2);
  REQUIRE(t.size() == 2);
  CHECK(t[0] < t[1]);
  CHECK(t[1] >= 100);
  CHECK(t[1] < 200);
  CHECK(oracle::yen_argmax(std::vector<std::uint64_t>(h.begin() + t[0] + 1, h.end())) + t[0] + 1 == t[1]);
}

TEST_CASE("criterion helper agrees with the normalized form") {
  std::vector<std::uint64_t> h{3, 0, 7, 2, 9, 1};
  for (int t = 0; t < 5; ++t) {
    long double n = 22, p1 = 0, p2 = 0, q1 = 0, q2 = 0;
    for (int i = 0; i <= t; ++i) p1 += h[i] / n;
    for (int i = t + 1; i < 6; ++i) p2 += h[i] / n;
    for (int i = 0; i <= t; ++i) q1 += std::pow(h[i] / n / p1, 2.0L);
    for (int i = t + 1; i < 6; ++i) q2 += std::pow(h[i] / n / p2, 2.0L);
    CHECK(yen_criterion(h, 0, t, 5) == doctest::Approx(static_cast<double>(-std::log(q1) - std::log(q2))).epsilon(1e-12));
  }
}

// ---- thresholding ------------------------------------------------------------------------------

TEST_CASE("only the top class survives thresholding") {
  const Grid<double> g(Shape3{2, 1, 1}, std::vector<double>{50, 150});
  const std::vector<double> one{100};
  CHECK(threshold_top_class(g, one).raw() == std::vector<std::uint8_t>{0, 1});
  const Grid<double> h(Shape3{1, 1, 1}, std::vector<double>{100});
  const std::vector<double> two{50, 150};
  CHECK(threshold_top_class(h, two).raw() == std::vector<std::uint8_t>{0});
  const std::vector<double> high{1000};
  CHECK(count_true(threshold_top_class(g, high)) == 0);
}

TEST_CASE("top class shrinks as the threshold grows") {
  SplitMix64 rng(12);
  const auto g = random_grid(rng, {10, 10, 1});
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> a{rng.uniform() * 10 - 5};
    const std::vector<double> b{a[0] + rng.uniform()};
    const auto ma = threshold_top_class(g, a), mb = threshold_top_class(g, b);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(mb[k] <= ma[k]);
  }
}

// ---- morphology ---------------------------------------------------------------------------------

TEST_CASE("opening removes an isolated voxel; closing fills a pinhole") {
  BinaryMask dot(Shape3{7, 7, 1});
  dot(3, 3) = 1;
  CHECK(count_true(morph_open_close(dot, 1)) == 0);

  BinaryMask block(Shape3{9, 9, 1});
  for (std::size_t y = 2; y < 7; ++y)
    for (std::size_t x = 2; x < 7; ++x) block(x, y) = 1;
  block(4, 4) = 0;
  CHECK(morph_close(block, 1)(4, 4) == 1);
  // Opening runs first, and every 3x3 window inside this block touches the
  // hole, so the combined operator removes the block entirely.
  CHECK(count_true(morph_open_close(block, 1)) == 0);
}

TEST_CASE("a 7x7 block survives open/close unchanged") {
  BinaryMask block(Shape3{11, 11, 1});
  for (std::size_t y = 2; y < 9; ++y)
    for (std::size_t x = 2; x < 9; ++x) block(x, y) = 1;
  const auto oracle_result =
      oracle::set_erode(oracle::set_erode(oracle::set_erode(oracle::set_erode(block, 1), 1, true), 1, true), 1);
  CHECK(morph_open_close(block, 1) == block);
  CHECK(oracle_result == block);
}

TEST_CASE("erosion and dilation match the set definitions") {
  SplitMix64 rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const Shape3 s = trial % 2 ? Shape3{7, 6, 5} : Shape3{12, 9, 1};
    const auto m = oracle::random_mask(rng, s, 0.3 + 0.4 * rng.uniform());
    const int r = 1 + static_cast<int>(rng.below(2));
    CHECK(erode(m, r) == oracle::set_erode(m, r));
    CHECK(dilate(m, r) == oracle::set_erode(m, r, true));
    const auto open = oracle::set_erode(oracle::set_erode(m, r), r, true);
    CHECK(morph_open(m, r) == open);
    CHECK(morph_close(m, r) == oracle::set_erode(oracle::set_erode(m, r, true), r));
    CHECK(morph_open(morph_open(m, r), r) == morph_open(m, r));
    CHECK(morph_close(morph_close(m, r), r) == morph_close(m, r));
  }
}

TEST_CASE("structuring element radius must be positive") {
  CHECK_THROWS_AS(morph_open_close(BinaryMask(Shape3{3, 3, 1}), 0), ConfigError);
}

// ---- ROI ----------------------------------------------------------------------------------------

TEST_CASE("ROI of a constant image is degenerate") {
  CHECK_THROWS_AS(extract_roi(Slice2D(Shape3{16, 16, 1}, 1.0), RoiParams{}), DegenerateInputError);
}

TEST_CASE("ROI recovers a phantom tumor and records every stage") {
  PhantomParams p;
  p.shape = {64, 64, 48};
  p.center = {30, 34, 24};
  p.semi_axes = {12, 9, 10};
  p.contrast = 4.0;
  const Phantom ph = generate_phantom(17, p);
  RoiStages stages;
  const auto roi = extract_roi(zscore_normalize(ph.volume), RoiParams{}, &stages);
  CHECK(dice(roi, ph.mask.whole_tumor()) >= 0.9);
  REQUIRE(stages.stages.size() == 6);
  const std::vector<std::string> names{"1_original", "2_blur", "3_enhanced", "4_threshold", "5_open_close", "6_roi"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    CHECK(stages.stages[i].first == names[i]);
    CHECK(stages.stages[i].second.shape() == p.shape);
  }

  const auto dir = oracle::temp_dir("roi_stages");
  dump_roi_stages(stages, dir, "case");
  CHECK(std::filesystem::exists(dir / "case_4_threshold.raw"));
  CHECK(std::filesystem::exists(dir / "case_4_threshold.raw.hdr"));
}

TEST_CASE("2D ROI on a bright disk") {
  Slice2D img(Shape3{64, 64, 1});
  SplitMix64 rng(21);
  BinaryMask truth(img.shape());
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      const bool in = (x - 40.0) * (x - 40.0) + (y - 20.0) * (y - 20.0) <= 100.0;
      truth(x, y) = in;
      img(x, y) = rng.normal() + (in ? 5.0 : 0.0);
    }
  CHECK(dice(extract_roi(img, RoiParams{}), truth) >= 0.9);
}
