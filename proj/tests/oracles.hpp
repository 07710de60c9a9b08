#pragma once

// Slow reference implementations used as test oracles. Each one follows the
// textbook definition directly and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "topopatch/grid.hpp"
#include "topopatch/rng.hpp"

namespace oracle {

using topopatch::BinaryMask;
using topopatch::Grid;
using topopatch::Shape3;

inline bool adjacent(long dx, long dy, long dz, int conn) {
  const long l1 = std::abs(dx) + std::abs(dy) + std::abs(dz);
  const long linf = std::max({std::abs(dx), std::abs(dy), std::abs(dz)});
  if (l1 == 0 || linf > 1) return false;
  switch (conn) {
    case 4:
    case 6: return l1 == 1;
    case 18: return l1 <= 2;
    default: return true;  // 8, 26
  }
}

// Neighbors of flat index i, by scanning the 3x3x3 block around it.
inline std::vector<std::size_t> neighbors(const Shape3& s, std::size_t i, int conn) {
  const long x = static_cast<long>(i % s.nx), y = static_cast<long>((i / s.nx) % s.ny),
             z = static_cast<long>(i / (s.nx * s.ny));
  std::vector<std::size_t> out;
  for (long dz = -1; dz <= 1; ++dz)
    for (long dy = -1; dy <= 1; ++dy)
      for (long dx = -1; dx <= 1; ++dx) {
        if (!adjacent(dx, dy, dz, conn)) continue;
        const long qx = x + dx, qy = y + dy, qz = z + dz;
        if (qx < 0 || qy < 0 || qz < 0 || qx >= static_cast<long>(s.nx) || qy >= static_cast<long>(s.ny) ||
            qz >= static_cast<long>(s.nz))
          continue;
        out.push_back(static_cast<std::size_t>(qx + static_cast<long>(s.nx) * (qy + static_cast<long>(s.ny) * qz)));
      }
  return out;
}

// Breadth-first flood fill of the true voxels; labels in order of first
// voxel, starting at 1.
inline std::vector<int> flood_fill(const BinaryMask& m, int conn) {
  std::vector<int> label(m.size(), 0);
  int next = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i] || label[i]) continue;
    label[i] = ++next;
    std::deque<std::size_t> q{i};
    while (!q.empty()) {
      const std::size_t cur = q.front();
      q.pop_front();
      for (std::size_t n : neighbors(m.shape(), cur, conn)) {
        if (m[n] && !label[n]) {
          label[n] = next;
          q.push_back(n);
        }
      }
    }
  }
  return label;
}

// (birth, death, birth_index) triples; death = +inf for essential classes.
using Pair = std::tuple<double, double, std::size_t>;

// 0-dim sublevel persistence by sweeping every distinct value v, labeling
// {f <= v} from scratch and matching components across levels. A component's
// birth is its (value, index)-smallest pixel; when components merge the one
// with the smallest such pixel survives and the others die at v.
inline std::multiset<Pair> sweep_persistence(const Grid<double>& f, int conn) {
  std::vector<double> levels(f.values().begin(), f.values().end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  const auto older = [&](std::size_t a, std::size_t b) { return f[a] < f[b] || (f[a] == f[b] && a < b); };

  std::multiset<Pair> out;
  std::set<std::size_t> alive;  // birth pixels of components alive at the previous level
  for (double v : levels) {
    BinaryMask m(f.shape());
    for (std::size_t i = 0; i < f.size(); ++i) m[i] = f[i] <= v;
    const auto label = flood_fill(m, conn);
    std::map<int, std::vector<std::size_t>> old_in;  // label -> previous births inside
    for (std::size_t b : alive) old_in[label[b]].push_back(b);
    std::set<std::size_t> now;
    std::map<int, std::size_t> oldest;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!label[i]) continue;
      auto it = oldest.find(label[i]);
      if (it == oldest.end() || older(i, it->second)) oldest[label[i]] = i;
    }
    for (const auto& [lab, births] : old_in) {
      for (std::size_t b : births) {
        if (b != oldest[lab]) out.insert({f[b], v, b});
      }
    }
    for (const auto& [lab, b] : oldest) now.insert(b);
    alive = now;
  }
  for (std::size_t b : alive) out.insert({f[b], std::numeric_limits<double>::infinity(), b});
  return out;
}

// Yen criterion in its normalized-probability form, evaluated at every cut.
// Returns the lowest cut whose value equals the maximum (within 1e-12
// relative), or -1 when no cut splits the mass.
inline int yen_argmax(const std::vector<std::uint64_t>& h) {
  long double total = 0;
  for (auto c : h) total += static_cast<long double>(c);
  std::vector<std::pair<int, long double>> crit;
  for (int t = 0; t + 1 < static_cast<int>(h.size()); ++t) {
    long double p1 = 0, p2 = 0;
    for (int i = 0; i <= t; ++i) p1 += h[i] / total;
    for (int i = t + 1; i < static_cast<int>(h.size()); ++i) p2 += h[i] / total;
    if (p1 <= 0 || p2 <= 0) continue;
    long double q1 = 0, q2 = 0;
    for (int i = 0; i <= t; ++i) q1 += std::pow(h[i] / total / p1, 2.0L);
    for (int i = t + 1; i < static_cast<int>(h.size()); ++i) q2 += std::pow(h[i] / total / p2, 2.0L);
    crit.emplace_back(t, -std::log(q1) - std::log(q2));
  }
  if (crit.empty()) return -1;
  long double best = crit.front().second;
  for (const auto& c : crit) best = std::max(best, c.second);
  for (const auto& c : crit) {
    if (c.second >= best - 1e-12L * std::max(1.0L, std::abs(best))) return c.first;
  }
  return -1;
}

// Erosion / dilation straight from the set definitions with a box of
// radius r (in-plane only for 2D); positions outside the grid are ignored.
inline BinaryMask set_erode(const BinaryMask& m, int r, bool dilate = false) {
  const auto& s = m.shape();
  const long rz = s.is_2d() ? 0 : r;
  BinaryMask out(s);
  for (long z = 0; z < static_cast<long>(s.nz); ++z)
    for (long y = 0; y < static_cast<long>(s.ny); ++y)
      for (long x = 0; x < static_cast<long>(s.nx); ++x) {
        bool all = true, any = false;
        for (long dz = -rz; dz <= rz; ++dz)
          for (long dy = -r; dy <= r; ++dy)
            for (long dx = -r; dx <= r; ++dx) {
              if (!m.contains(x + dx, y + dy, z + dz)) continue;
              const bool v = m(x + dx, y + dy, z + dz) != 0;
              all = all && v;
              any = any || v;
            }
        out(x, y, z) = dilate ? any : all;
      }
  return out;
}

inline BinaryMask random_mask(topopatch::SplitMix64& rng, const Shape3& s, double density) {
  BinaryMask m(s);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform() < density;
  return m;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("topopatch_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle
