#include "topopatch/homology.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "topopatch/connectivity.hpp"
#include "topopatch/volume_io.hpp"
#include "union_find.hpp"

namespace topopatch {

std::size_t PersistenceDiagram0::essential_count() const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const PersistencePair& p) { return p.essential(); }));
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Filtration value: the image itself for sublevel, its negation for
// superlevel, so both run through the same ascending sweep.
template <typename T>
std::vector<double> filtration_values(const Grid<T>& img, Filtration kind) {
  std::vector<double> f(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = static_cast<double>(img[i]);
    if (!std::isfinite(v)) throw RangeError("persistence input has a non-finite value at flat index " + std::to_string(i));
    f[i] = kind == Filtration::kSublevel ? v : -v;
  }
  return f;
}

bool in_support(const BinaryMask* support, std::size_t i) { return support == nullptr || (*support)[i] != 0; }

template <typename Fn>
void for_each_neighbor(const Shape3& s, std::size_t flat, const std::vector<Offset3>& offsets, Fn&& fn) {
  const long x = static_cast<long>(flat % s.nx);
  const long y = static_cast<long>((flat / s.nx) % s.ny);
  const long z = static_cast<long>(flat / (s.nx * s.ny));
  for (const auto& o : offsets) {
    const long qx = x + o[0], qy = y + o[1], qz = z + o[2];
    if (qx < 0 || qy < 0 || qz < 0 || qx >= static_cast<long>(s.nx) || qy >= static_cast<long>(s.ny) ||
        qz >= static_cast<long>(s.nz)) {
      continue;
    }
    fn(static_cast<std::size_t>(qx) + s.nx * (static_cast<std::size_t>(qy) + s.ny * static_cast<std::size_t>(qz)));
  }
}

}  // namespace

template <typename T>
PersistenceDiagram0 persistence_0d(const Grid<T>& img, Filtration kind, int connectivity, const BinaryMask* support) {
  if (img.empty()) throw ShapeError("persistence of an empty grid");
  const Shape3& s = img.shape();
  if (support != nullptr && support->shape() != s) throw ShapeError("support mask shape differs from image");

  PersistenceDiagram0 d;
  d.kind = kind;
  d.source_shape = s;
  d.connectivity = resolve_connectivity(connectivity, s);
  const auto offsets = neighbor_offsets(d.connectivity, s);
  const auto f = filtration_values(img, kind);

  std::vector<std::uint32_t> order;
  order.reserve(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (in_support(support, i)) order.push_back(static_cast<std::uint32_t>(i));
  }
  if (order.empty()) return d;
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return f[a] < f[b] || (f[a] == f[b] && a < b);
  });
  d.value_min = kind == Filtration::kSublevel ? f[order.front()] : -f[order.back()];
  d.value_max = kind == Filtration::kSublevel ? f[order.back()] : -f[order.front()];

  detail::DisjointSet sets(img.size());
  std::vector<std::uint8_t> entered(img.size(), 0);
  // Birth of the component rooted at an index; only meaningful at roots.
  std::vector<std::uint32_t> birth_of(img.size());
  std::iota(birth_of.begin(), birth_of.end(), std::uint32_t{0});
  const auto older = [&](std::uint32_t a, std::uint32_t b) {
    return f[a] < f[b] || (f[a] == f[b] && a < b);
  };

  std::vector<std::pair<std::uint32_t, double>> finite;  // (birth pixel, death value)
  for (const std::uint32_t p : order) {
    entered[p] = 1;
    for_each_neighbor(s, p, offsets, [&](std::size_t q) {
      if (!entered[q]) return;
      const std::uint32_t ra = sets.find(p);
      const std::uint32_t rb = sets.find(static_cast<std::uint32_t>(q));
      if (ra == rb) return;
      const std::uint32_t ba = birth_of[ra];
      const std::uint32_t bb = birth_of[rb];
      const std::uint32_t elder = older(ba, bb) ? ba : bb;
      const std::uint32_t younger = elder == ba ? bb : ba;
      if (f[younger] < f[p]) finite.emplace_back(younger, f[p]);
      birth_of[sets.unite(ra, rb)] = elder;
    });
  }

  const double sign = kind == Filtration::kSublevel ? 1.0 : -1.0;
  const auto make_pair = [&](std::uint32_t birth_pixel, double death_f) {
    PersistencePair pp;
    pp.birth = sign * f[birth_pixel];
    pp.death = sign * death_f;
    pp.birth_index = birth_pixel;
    pp.birth_location = img.coords(birth_pixel);
    return pp;
  };
  d.pairs.reserve(finite.size() + 1);
  for (const auto& [b, death] : finite) d.pairs.push_back(make_pair(b, death));
  for (const std::uint32_t p : order) {
    if (sets.find(p) == p) d.pairs.push_back(make_pair(birth_of[p], kInf));
  }
  return d;
}

Grid<double> lifetime_image(const PersistenceDiagram0& d, EssentialPolicy policy) {
  Grid<double> out(d.source_shape, 0.0);
  for (const auto& p : d.pairs) {
    double life = p.lifetime();
    if (p.essential()) {
      if (policy == EssentialPolicy::kDrop) continue;
      life = std::abs(d.cap_value() - p.birth);
    }
    auto& cell = out[p.birth_index];
    cell = std::max(cell, life);
  }
  return out;
}

Grid<double> persistence_surface(const PersistenceDiagram0& d, double sigma, SurfaceWeight weight,
                                 EssentialPolicy policy) {
  if (!(sigma > 0)) throw ConfigError("persistence surface sigma must be positive");
  const Shape3& s = d.source_shape;
  Grid<double> out(s, 0.0);
  const long r = static_cast<long>(std::ceil(4.0 * sigma));
  const long rz = s.is_2d() ? 0 : r;
  std::vector<double> bump;
  for (const auto& p : d.pairs) {
    double w = 0;
    switch (weight) {
      case SurfaceWeight::kLinearLifetime:
        w = p.essential() ? (policy == EssentialPolicy::kDrop ? 0.0 : std::abs(d.cap_value() - p.birth))
                          : p.lifetime();
        break;
    }
    if (!(w > 0)) continue;
    const long cx = static_cast<long>(p.birth_location[0]);
    const long cy = static_cast<long>(p.birth_location[1]);
    const long cz = static_cast<long>(p.birth_location[2]);
    const long x0 = std::max(0L, cx - r), x1 = std::min(static_cast<long>(s.nx) - 1, cx + r);
    const long y0 = std::max(0L, cy - r), y1 = std::min(static_cast<long>(s.ny) - 1, cy + r);
    const long z0 = std::max(0L, cz - rz), z1 = std::min(static_cast<long>(s.nz) - 1, cz + rz);
    bump.clear();
    double total = 0;
    for (long z = z0; z <= z1; ++z) {
      for (long y = y0; y <= y1; ++y) {
        for (long x = x0; x <= x1; ++x) {
          const double r2 = static_cast<double>((x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz));
          const double g = std::exp(-0.5 * r2 / (sigma * sigma));
          bump.push_back(g);
          total += g;
        }
      }
    }
    std::size_t k = 0;
    for (long z = z0; z <= z1; ++z) {
      for (long y = y0; y <= y1; ++y) {
        for (long x = x0; x <= x1; ++x) {
          out(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z)) +=
              w * bump[k++] / total;
        }
      }
    }
  }
  return out;
}

template <typename T>
ComponentSelection strongest_component(const Grid<T>& img, Filtration kind, int connectivity,
                                       const BinaryMask* support) {
  const PersistenceDiagram0 d = persistence_0d(img, kind, connectivity, support);
  if (d.pairs.empty()) throw DegenerateInputError("empty persistence diagram");

  const auto rank = [&](const PersistencePair& p) {
    return std::pair<int, double>{p.essential() ? 1 : 0,
                                  p.essential() ? std::abs(d.cap_value() - p.birth) : p.lifetime()};
  };
  auto best_rank = rank(d.pairs.front());
  for (const auto& p : d.pairs) best_rank = std::max(best_rank, rank(p));

  const auto f = filtration_values(img, kind);
  const auto offsets = neighbor_offsets(d.connectivity, img.shape());
  std::vector<std::uint8_t> seen(img.size());

  std::optional<ComponentSelection> best;
  for (const auto& p : d.pairs) {
    if (rank(p) != best_rank) continue;
    // Flood the component from the birth pixel.
    const double death_f = kind == Filtration::kSublevel ? p.death : -p.death;
    std::fill(seen.begin(), seen.end(), 0);
    std::vector<std::size_t> stack{p.birth_index};
    seen[p.birth_index] = 1;
    Coord3 sum{0, 0, 0};
    std::size_t count = 0;
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const auto c = img.coords(cur);
      for (int a = 0; a < 3; ++a) sum[a] += static_cast<double>(c[a]);
      ++count;
      for_each_neighbor(img.shape(), cur, offsets, [&](std::size_t q) {
        if (seen[q] || !in_support(support, q)) return;
        if (!p.essential() && !(f[q] < death_f)) return;
        seen[q] = 1;
        stack.push_back(q);
      });
    }
    ComponentSelection cand{p, {sum[0] / count, sum[1] / count, sum[2] / count}, count};
    if (!best || cand.voxel_count > best->voxel_count ||
        (cand.voxel_count == best->voxel_count && cand.pair.birth_location < best->pair.birth_location)) {
      best = cand;
    }
  }
  return *best;
}

std::string diagram_to_csv(const PersistenceDiagram0& d) {
  std::ostringstream out;
  const bool three_d = !d.source_shape.is_2d();
  out << "birth,death,bx,by" << (three_d ? ",bz" : "") << '\n';
  const auto num = [](double v) {
    if (std::isinf(v)) return std::string(v > 0 ? "inf" : "-inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& p : d.pairs) {
    out << num(p.birth) << ',' << num(p.death) << ',' << p.birth_location[0] << ',' << p.birth_location[1];
    if (three_d) out << ',' << p.birth_location[2];
    out << '\n';
  }
  return out.str();
}

void write_diagram_csv(const PersistenceDiagram0& d, const std::filesystem::path& path) {
  write_file_atomic(path, diagram_to_csv(d));
}

template PersistenceDiagram0 persistence_0d(const Grid<float>&, Filtration, int, const BinaryMask*);
template PersistenceDiagram0 persistence_0d(const Grid<double>&, Filtration, int, const BinaryMask*);
template ComponentSelection strongest_component(const Grid<float>&, Filtration, int, const BinaryMask*);
template ComponentSelection strongest_component(const Grid<double>&, Filtration, int, const BinaryMask*);

}  // namespace topopatch
