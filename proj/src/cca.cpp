#include "topopatch/cca.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "topopatch/connectivity.hpp"
#include "topopatch/metrics.hpp"
#include "union_find.hpp"

namespace topopatch {

std::size_t ComponentSet::total_voxels() const {
  std::size_t n = 0;
  for (const auto& c : components) n += c.voxel_count;
  return n;
}

BinaryMask ComponentSet::to_mask() const {
  BinaryMask out(labels.shape());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] != 0 ? 1 : 0;
  return out;
}

ComponentSet label_components(const BinaryMask& mask, int connectivity) {
  const Shape3& s = mask.shape();
  ComponentSet cs;
  cs.connectivity = resolve_connectivity(connectivity, s);
  cs.labels = LabelGrid(s, 0);
  const auto back = backward_offsets(cs.connectivity, s);

  // Pass 1: provisional labels (1-based) with recorded equivalences.
  detail::DisjointSet eq;
  eq.add();  // slot 0 = background
  std::vector<std::uint32_t> provisional(mask.size(), 0);
  const long nx = static_cast<long>(s.nx), ny = static_cast<long>(s.ny), nz = static_cast<long>(s.nz);
  for (long z = 0; z < nz; ++z) {
    for (long y = 0; y < ny; ++y) {
      for (long x = 0; x < nx; ++x) {
        const std::size_t i = static_cast<std::size_t>(x + nx * (y + ny * z));
        if (!mask[i]) continue;
        std::uint32_t label = 0;
        for (const auto& o : back) {
          const long qx = x + o[0], qy = y + o[1], qz = z + o[2];
          if (qx < 0 || qy < 0 || qz < 0 || qx >= nx || qy >= ny) continue;
          const std::uint32_t ql = provisional[static_cast<std::size_t>(qx + nx * (qy + ny * qz))];
          if (ql == 0) continue;
          if (label == 0) {
            label = ql;
          } else if (ql != label) {
            eq.unite(label, ql);
          }
        }
        provisional[i] = label != 0 ? label : eq.add();
      }
    }
  }

  // Pass 2: resolve roots, gather per-component statistics.
  std::vector<std::int32_t> root_slot(eq.size(), -1);
  std::vector<Component> comps;
  std::vector<std::size_t> first_voxel;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (provisional[i] == 0) continue;
    const std::uint32_t root = eq.find(provisional[i]);
    if (root_slot[root] < 0) {
      root_slot[root] = static_cast<std::int32_t>(comps.size());
      Component c;
      c.bbox_min = {s.nx, s.ny, s.nz};
      comps.push_back(c);
      first_voxel.push_back(i);
    }
    const auto slot = static_cast<std::size_t>(root_slot[root]);
    cs.labels[i] = static_cast<std::int32_t>(slot + 1);
    auto& c = comps[slot];
    const auto p = mask.coords(i);
    ++c.voxel_count;
    for (int a = 0; a < 3; ++a) {
      c.coord_sum[a] += p[a];
      c.bbox_min[a] = std::min(c.bbox_min[a], p[a]);
      c.bbox_max[a] = std::max(c.bbox_max[a], p[a]);
    }
  }

  // Relabel by decreasing size; slots already follow first-voxel order.
  std::vector<std::size_t> order(comps.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return comps[a].voxel_count > comps[b].voxel_count; });
  std::vector<std::int32_t> new_id(comps.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    Component c = comps[order[rank]];
    c.id = static_cast<std::int32_t>(rank + 1);
    for (int a = 0; a < 3; ++a) {
      c.centroid[a] = static_cast<double>(c.coord_sum[a]) / static_cast<double>(c.voxel_count);
    }
    new_id[order[rank]] = c.id;
    cs.components.push_back(c);
  }
  for (auto& l : cs.labels.raw()) {
    if (l != 0) l = new_id[static_cast<std::size_t>(l - 1)];
  }
  return cs;
}

ComponentSet filter_small(const ComponentSet& cs, std::size_t min_voxels) {
  ComponentSet out;
  out.connectivity = cs.connectivity;
  out.labels = cs.labels;
  std::vector<std::int32_t> remap(cs.components.size() + 1, 0);
  for (const auto& c : cs.components) {
    if (c.voxel_count < min_voxels) continue;
    Component kept = c;
    kept.id = static_cast<std::int32_t>(out.components.size() + 1);
    remap[static_cast<std::size_t>(c.id)] = kept.id;
    out.components.push_back(kept);
  }
  for (auto& l : out.labels.raw()) l = remap[static_cast<std::size_t>(l)];
  return out;
}

Coord3 mask_centroid(const ComponentSet& cs, CentroidMode mode) {
  if (cs.components.empty()) throw DegenerateInputError("centroid of an empty mask");
  std::array<std::uint64_t, 3> sum{};
  std::uint64_t count = 0;
  for (const auto& c : cs.components) {
    if (mode == CentroidMode::kLargest && c.id != 1) continue;
    for (int a = 0; a < 3; ++a) sum[a] += c.coord_sum[a];
    count += c.voxel_count;
  }
  const auto n = static_cast<double>(count);
  return {static_cast<double>(sum[0]) / n, static_cast<double>(sum[1]) / n, static_cast<double>(sum[2]) / n};
}

double mask_dice(const BinaryMask& extracted, const BinaryMask& whole_tumor) { return dice(extracted, whole_tumor); }

std::string components_to_csv(const ComponentSet& cs) {
  std::ostringstream out;
  out << "id,voxel_count,cx,cy,cz,bbox\n";
  char buf[160];
  for (const auto& c : cs.components) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g,%.17g,%zu:%zu;%zu:%zu;%zu:%zu\n", c.id, c.voxel_count,
                  c.centroid[0], c.centroid[1], c.centroid[2], c.bbox_min[0], c.bbox_max[0], c.bbox_min[1],
                  c.bbox_max[1], c.bbox_min[2], c.bbox_max[2]);
    out << buf;
  }
  return out.str();
}

}  // namespace topopatch
