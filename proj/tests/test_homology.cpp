#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "topopatch/homology.hpp"

using namespace topopatch;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::multiset<oracle::Pair> as_set(const PersistenceDiagram0& d) {
  std::multiset<oracle::Pair> out;
  for (const auto& p : d.pairs) out.insert({p.birth, p.death, p.birth_index});
  return out;
}

Grid<double> random_int_image(SplitMix64& rng, Shape3 s, std::uint64_t levels) {
  Grid<double> g(s);
  for (auto& v : g.values()) v = static_cast<double>(rng.below(levels));
  return g;
}

// Bottleneck distance <= delta between the finite parts of two diagrams,
// decided by a perfect matching where points may also go to the diagonal.
bool within_bottleneck(const std::vector<std::pair<double, double>>& a,
                       const std::vector<std::pair<double, double>>& b, double delta) {
  const std::size_t n = a.size() + b.size();
  const auto diag = [](const std::pair<double, double>& p) { return std::abs(p.second - p.first) / 2; };
  // Left: a points then b's diagonal copies. Right: b points then a's diagonal copies.
  const auto ok = [&](std::size_t l, std::size_t r) {
    if (l < a.size() && r < b.size())
      return std::max(std::abs(a[l].first - b[r].first), std::abs(a[l].second - b[r].second)) <= delta + 1e-12;
    if (l < a.size()) return r - b.size() == l && diag(a[l]) <= delta + 1e-12;
    if (r < b.size()) return l - a.size() == r && diag(b[r]) <= delta + 1e-12;
    return true;  // diagonal to diagonal
  };
  std::vector<long> match_r(n, -1);
  std::vector<char> seen;
  std::function<bool(std::size_t)> augment = [&](std::size_t l) {
    for (std::size_t r = 0; r < n; ++r) {
      if (seen[r] || !ok(l, r)) continue;
      seen[r] = 1;
      if (match_r[r] < 0 || augment(static_cast<std::size_t>(match_r[r]))) {
        match_r[r] = static_cast<long>(l);
        return true;
      }
    }
    return false;
  };
  for (std::size_t l = 0; l < n; ++l) {
    seen.assign(n, 0);
    if (!augment(l)) return false;
  }
  return true;
}

std::vector<std::pair<double, double>> finite_points(const PersistenceDiagram0& d) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : d.pairs)
    if (!p.essential()) out.emplace_back(p.birth, p.death);
  return out;
}

}  // namespace

TEST_CASE("1D hand trace") {
  const Grid<double> f(Shape3{5, 1, 1}, std::vector<double>{2, 0, 3, 1, 4});
  const auto d = persistence_0d(f, Filtration::kSublevel, 4);
  REQUIRE(d.pairs.size() == 2);
  CHECK(as_set(d) == std::multiset<oracle::Pair>{{0, kInf, 1}, {1, 3, 3}});
}

TEST_CASE("constant image has one essential class") {
  const auto d = persistence_0d(Grid<double>(Shape3{4, 4, 1}, 2.0), Filtration::kSublevel);
  REQUIRE(d.pairs.size() == 1);
  CHECK(d.pairs[0].birth == 2.0);
  CHECK(d.pairs[0].essential());
  CHECK(d.pairs[0].birth_location == Index3{0, 0, 0});
}

TEST_CASE("dimmer of two bright blobs dies at the gap") {
  const std::vector<double> row{1, 10, 10, 3, 3, 3, 7, 7, 1};
  Grid<double> f(Shape3{9, 3, 1});
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 9; ++x) f(x, y) = row[x];
  const auto d = persistence_0d(f, Filtration::kSuperlevel);
  REQUIRE(d.pairs.size() == 2);
  std::vector<PersistencePair> finite;
  for (const auto& p : d.pairs)
    if (!p.essential()) finite.push_back(p);
  REQUIRE(finite.size() == 1);
  CHECK(finite[0].birth == 7);
  CHECK(finite[0].death == 3);
  CHECK(d.essential_count() == 1);
}

TEST_CASE("sublevel diagrams match the threshold sweep oracle") {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_int_image(rng, {8, 8, 1}, 2 + rng.below(20));
    for (int conn : {4, 8}) CHECK(as_set(persistence_0d(f, Filtration::kSublevel, conn)) == oracle::sweep_persistence(f, conn));
  }
}

TEST_CASE("3D diagrams match the threshold sweep oracle") {
  SplitMix64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_int_image(rng, {4, 4, 4}, 2 + rng.below(10));
    for (int conn : {6, 18, 26}) CHECK(as_set(persistence_0d(f, Filtration::kSublevel, conn)) == oracle::sweep_persistence(f, conn));
  }
}

TEST_CASE("superlevel is the sign flip of sublevel on the negated image") {
  SplitMix64 rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_int_image(rng, {8, 8, 1}, 10);
    Grid<double> neg(f.shape());
    for (std::size_t i = 0; i < f.size(); ++i) neg[i] = -f[i];
    const auto up = persistence_0d(f, Filtration::kSuperlevel);
    auto down = persistence_0d(neg, Filtration::kSublevel);
    for (auto& p : down.pairs) {
      p.birth = -p.birth;
      p.death = -p.death;
    }
    CHECK(up.pairs == down.pairs);
  }
}

TEST_CASE("adding a constant shifts every pair") {
  SplitMix64 rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_int_image(rng, {8, 8, 1}, 12);
    const double c = static_cast<double>(rng.below(100)) - 50;
    Grid<double> g(f.shape());
    for (std::size_t i = 0; i < f.size(); ++i) g[i] = f[i] + c;
    const auto a = persistence_0d(f, Filtration::kSublevel);
    const auto b = persistence_0d(g, Filtration::kSublevel);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
      CHECK(b.pairs[i].birth == a.pairs[i].birth + c);
      CHECK(b.pairs[i].death == a.pairs[i].death + c);
    }
  }
}

TEST_CASE("one essential class per connected component of the support") {
  SplitMix64 rng(35);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_int_image(rng, {8, 8, 1}, 6);
    CHECK(persistence_0d(f, Filtration::kSublevel).essential_count() == 1);
    const auto support = oracle::random_mask(rng, f.shape(), 0.5);
    const auto labels = oracle::flood_fill(support, 8);
    const int components = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
    const auto d = persistence_0d(f, Filtration::kSublevel, 8, &support);
    CHECK(d.essential_count() == static_cast<std::size_t>(components));
    for (const auto& p : d.pairs) CHECK(support[p.birth_index] == 1);
  }
}

TEST_CASE("pairs satisfy death >= birth and lie inside the grid") {
  SplitMix64 rng(36);
  const auto f = random_int_image(rng, {9, 7, 3}, 50);
  const auto d = persistence_0d(f, Filtration::kSublevel);
  for (const auto& p : d.pairs) {
    CHECK(p.death >= p.birth);
    CHECK(p.death != p.birth);
    CHECK(f.contains(static_cast<long>(p.birth_location[0]), static_cast<long>(p.birth_location[1]),
                     static_cast<long>(p.birth_location[2])));
    CHECK(f[p.birth_index] == p.birth);
  }
}

TEST_CASE("small perturbations move the diagram by at most their size") {
  SplitMix64 rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    const auto f = random_int_image(rng, {5, 5, 1}, 8);
    const double delta = 0.05 + 0.4 * rng.uniform();
    Grid<double> g(f.shape());
    for (std::size_t i = 0; i < f.size(); ++i) g[i] = f[i] + (2 * rng.uniform() - 1) * delta;
    const auto a = persistence_0d(f, Filtration::kSublevel);
    const auto b = persistence_0d(g, Filtration::kSublevel);
    CHECK(within_bottleneck(finite_points(a), finite_points(b), delta));
  }
}

TEST_CASE("non-finite input is rejected") {
  Grid<double> f(Shape3{3, 3, 1}, 0.0);
  f[4] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(persistence_0d(f, Filtration::kSublevel), RangeError);
}

TEST_CASE("lifetime image") {
  PersistenceDiagram0 d;
  d.source_shape = {4, 4, 1};
  d.value_max = 10;
  PersistencePair p;
  p.birth = 1;
  p.death = 3;
  p.birth_index = 5;
  p.birth_location = {1, 1, 0};
  d.pairs.push_back(p);
  auto img = lifetime_image(d);
  CHECK(img[5] == 2.0);
  CHECK(std::count_if(img.values().begin(), img.values().end(), [](double v) { return v != 0; }) == 1);

  p.death = 6;
  d.pairs.push_back(p);
  CHECK(lifetime_image(d)[5] == 5.0);

  PersistenceDiagram0 e;
  e.source_shape = {3, 3, 1};
  e.value_max = 4;
  p.birth = 1;
  p.death = kInf;
  p.birth_index = 0;
  e.pairs = {p};
  CHECK(lifetime_image(e, EssentialPolicy::kCapAtMax)[0] == 3.0);
  const auto dropped = lifetime_image(e, EssentialPolicy::kDrop);
  for (double v : dropped.values()) CHECK(v == 0.0);
}

TEST_CASE("lifetime image is sparse and non-negative") {
  SplitMix64 rng(38);
  const auto f = random_int_image(rng, {10, 10, 1}, 20);
  const auto d = persistence_0d(f, Filtration::kSuperlevel);
  const auto img = lifetime_image(d);
  std::size_t nonzero = 0;
  for (double v : img.values()) {
    CHECK(v >= 0);
    nonzero += v != 0;
  }
  CHECK(nonzero <= d.pairs.size());
}

TEST_CASE("persistence surface") {
  PersistenceDiagram0 d;
  d.source_shape = {21, 21, 1};
  PersistencePair p;
  p.birth = 2;
  p.death = 5.5;
  p.birth_location = {10, 10, 0};
  p.birth_index = 10 + 21 * 10;
  d.pairs.push_back(p);

  const auto surf = persistence_surface(d, 0.3);
  double total = 0;
  for (double v : surf.values()) {
    CHECK(v >= 0);
    total += v;
  }
  CHECK(std::abs(total - 3.5) < 1e-3);

  auto doubled = d;
  doubled.pairs[0].death = 2 + 2 * 3.5;
  const auto s2 = persistence_surface(doubled, 1.5);
  const auto s1 = persistence_surface(d, 1.5);
  for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s2[i] == doctest::Approx(2 * s1[i]).epsilon(1e-12));

  PersistenceDiagram0 empty;
  empty.source_shape = {5, 5, 1};
  const auto zero = persistence_surface(empty, 1.0);
  for (double v : zero.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(persistence_surface(d, 0.0), ConfigError);
}

TEST_CASE("surface is zero exactly when no finite class has positive lifetime") {
  const auto d = persistence_0d(Grid<double>(Shape3{6, 6, 1}, 1.0), Filtration::kSublevel);
  const auto surf = persistence_surface(d, 1.0);
  for (double v : surf.values()) CHECK(v == 0.0);
}

TEST_CASE("strongest component of a single blob is its center of mass") {
  Grid<double> f(Shape3{20, 20, 1}, 0.0);
  std::size_t n = 0;
  double sx = 0, sy = 0;
  for (std::size_t y = 0; y < 20; ++y)
    for (std::size_t x = 0; x < 20; ++x)
      if ((x - 12.0) * (x - 12.0) + (y - 7.0) * (y - 7.0) <= 9.0) {
        f(x, y) = 5.0 + 0.01 * static_cast<double>(x);
        sx += static_cast<double>(x);
        sy += static_cast<double>(y);
        ++n;
      }
  BinaryMask support(f.shape());
  for (std::size_t i = 0; i < f.size(); ++i) support[i] = f[i] > 0;
  const auto c = strongest_component(f, Filtration::kSuperlevel, 8, &support);
  CHECK(c.voxel_count == n);
  CHECK(c.centroid[0] == doctest::Approx(sx / static_cast<double>(n)));
  CHECK(c.centroid[1] == doctest::Approx(sy / static_cast<double>(n)));
}

TEST_CASE("persistent blob wins over a noise-level blob") {
  Grid<double> f(Shape3{30, 30, 1}, 0.0);
  for (std::size_t y = 8; y < 13; ++y)
    for (std::size_t x = 20; x < 25; ++x) f(x, y) = 10.0;
  f(5, 25) = 0.5;
  f(6, 25) = 0.4;
  BinaryMask support(f.shape());
  for (std::size_t i = 0; i < f.size(); ++i) support[i] = f[i] > 0;
  const auto c = strongest_component_centroid(f, Filtration::kSuperlevel, 8, &support);
  CHECK(c[0] == doctest::Approx(22.0));
  CHECK(c[1] == doctest::Approx(10.0));
}

TEST_CASE("without a support the essential class spans the whole grid") {
  Grid<double> f(Shape3{10, 6, 1}, 0.0);
  f(2, 2) = 5.0;
  const auto c = strongest_component(f, Filtration::kSuperlevel);
  CHECK(c.voxel_count == 60);
  CHECK(c.centroid == Coord3{4.5, 2.5, 0});
}

TEST_CASE("the essential class takes its whole support component") {
  // Two peaks joined through a saddle of height 2; the lower peak's class
  // dies at 2, the elder one covers the support.
  const std::vector<double> row{9, 8, 2, 6, 6, 6, 0};
  const Grid<double> f(Shape3{7, 1, 1}, row);
  const auto d = persistence_0d(f, Filtration::kSuperlevel, 4);
  REQUIRE(d.pairs.size() == 2);
  BinaryMask upper(f.shape());
  for (std::size_t i = 0; i < 7; ++i) upper[i] = f[i] > 0;
  const auto c = strongest_component(f, Filtration::kSuperlevel, 4, &upper);
  CHECK(c.pair.essential());
  CHECK(c.voxel_count == 6);
}

TEST_CASE("single-pixel component returns its own coordinates") {
  Grid<double> f(Shape3{9, 9, 1}, 0.0);
  f(3, 6) = 1.0;
  BinaryMask support(f.shape());
  support(3, 6) = 1;
  const auto c = strongest_component_centroid(f, Filtration::kSuperlevel, 8, &support);
  CHECK(c == Coord3{3, 6, 0});
}

TEST_CASE("empty support has no strongest component") {
  const Grid<double> f(Shape3{4, 4, 1}, 1.0);
  const BinaryMask none(f.shape());
  CHECK(persistence_0d(f, Filtration::kSublevel, 0, &none).pairs.empty());
  CHECK_THROWS_AS(strongest_component(f, Filtration::kSuperlevel, 0, &none), DegenerateInputError);
}

TEST_CASE("diagram CSV") {
  const Grid<double> f(Shape3{5, 1, 1}, std::vector<double>{2, 0, 3, 1, 4});
  const auto csv = diagram_to_csv(persistence_0d(f, Filtration::kSublevel, 4));
  CHECK(csv == "birth,death,bx,by\n1,3,3,0\n0,inf,1,0\n");
  const auto up = diagram_to_csv(persistence_0d(f, Filtration::kSuperlevel, 4));
  CHECK(up.find("-inf") != std::string::npos);
  const auto dir = oracle::temp_dir("diagram_csv");
  write_diagram_csv(persistence_0d(Grid<double>(Shape3{2, 2, 2}, 1.0), Filtration::kSublevel), dir / "d.csv");
  std::ifstream in(dir / "d.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "birth,death,bx,by,bz");
}
