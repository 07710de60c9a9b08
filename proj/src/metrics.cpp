#include "topopatch/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace topopatch {

namespace {

void check_same_shape(const Shape3& a, const Shape3& b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": shape " + to_string(a) + " vs " + to_string(b));
}

void check_binary(const BinaryMask& m, const char* what) {
  for (auto v : m.values()) {
    if (v > 1) throw RangeError(std::string(what) + ": target must be binary");
  }
}

template <typename P>
double dice_impl(const Grid<P>& p, const BinaryMask& t, double eps) {
  check_same_shape(p.shape(), t.shape(), "dice");
  check_binary(t, "dice");
  double inter = 0, pp = 0, tt = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto pv = static_cast<double>(p[i]);
    if (!(pv >= 0.0 && pv <= 1.0)) throw RangeError("dice: prediction outside [0, 1]");
    const double tv = t[i];
    inter += pv * tv;
    pp += pv * pv;
    tt += tv * tv;
  }
  return (2.0 * inter + eps) / (pp + tt + eps);
}

}  // namespace

double dice(const BinaryMask& p, const BinaryMask& t, double eps) { return dice_impl(p, t, eps); }
double dice(const Grid<double>& p, const BinaryMask& t, double eps) { return dice_impl(p, t, eps); }
double dice_loss(const BinaryMask& p, const BinaryMask& t, double eps) { return 1.0 - dice(p, t, eps); }
double dice_loss(const Grid<double>& p, const BinaryMask& t, double eps) { return 1.0 - dice(p, t, eps); }

double focal_loss(double p_t, double alpha_t, double gamma) {
  if (!(p_t >= 0.0 && p_t <= 1.0)) throw RangeError("focal loss: p_t outside [0, 1]");
  if (!(alpha_t >= 0.0) || !(gamma >= 0.0)) throw RangeError("focal loss: alpha and gamma must be >= 0");
  const double p = std::max(p_t, kFocalFloor);
  return -alpha_t * std::pow(1.0 - p, gamma) * std::log(p);
}

double focal_loss(const Grid<double>& p, const BinaryMask& t, double alpha, double gamma) {
  check_same_shape(p.shape(), t.shape(), "focal loss");
  check_binary(t, "focal loss");
  double total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pos = t[i] != 0;
    total += focal_loss(pos ? p[i] : 1.0 - p[i], pos ? alpha : 1.0 - alpha, gamma);
  }
  return total / static_cast<double>(p.size());
}

ConfusionCounts confusion(const BinaryMask& p, const BinaryMask& t) {
  check_same_shape(p.shape(), t.shape(), "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pv = p[i] != 0, tv = t[i] != 0;
    if (pv && tv) {
      ++c.tp;
    } else if (pv) {
      ++c.fp;
    } else if (tv) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

double sensitivity(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) throw UndefinedMetricError("sensitivity undefined: no positive voxels in ground truth");
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double specificity(const ConfusionCounts& c) {
  if (c.tn + c.fp == 0) throw UndefinedMetricError("specificity undefined: no negative voxels in ground truth");
  return static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
}

double tumor_fraction(const SegMask3D& mask) {
  std::size_t tumor = 0;
  for (auto v : mask.labels().values()) tumor += v != 0;
  return static_cast<double>(tumor) / static_cast<double>(mask.labels().size());
}

Coord3 whole_tumor_centroid(const SegMask3D& gt) {
  const auto& labels = gt.labels();
  double sx = 0, sy = 0, sz = 0;
  std::size_t n = 0;
  for (std::size_t z = 0; z < labels.shape().nz; ++z) {
    for (std::size_t y = 0; y < labels.shape().ny; ++y) {
      for (std::size_t x = 0; x < labels.shape().nx; ++x) {
        if (labels(x, y, z) == 0) continue;
        sx += static_cast<double>(x);
        sy += static_cast<double>(y);
        sz += static_cast<double>(z);
        ++n;
      }
    }
  }
  if (n == 0) throw UndefinedMetricError("ground-truth mask has no tumor voxels");
  const auto c = static_cast<double>(n);
  return {sx / c, sy / c, sz / c};
}

double center_distance(const PatchSpec& patch, const SegMask3D& gt) {
  check_same_shape(patch.bounds(), gt.shape(), "center distance");
  const Coord3 t = whole_tumor_centroid(gt);
  const Coord3 c = patch.center();
  return std::sqrt((t[0] - c[0]) * (t[0] - c[0]) + (t[1] - c[1]) * (t[1] - c[1]) + (t[2] - c[2]) * (t[2] - c[2]));
}

double region_recall(const PatchSpec& patch, const SegMask3D& gt, Region region) {
  check_same_shape(patch.bounds(), gt.shape(), "region recall");
  const auto& labels = gt.labels();
  std::size_t total = 0, inside = 0;
  for (std::size_t z = 0; z < labels.shape().nz; ++z) {
    for (std::size_t y = 0; y < labels.shape().ny; ++y) {
      for (std::size_t x = 0; x < labels.shape().nx; ++x) {
        if (!region_contains(region, labels(x, y, z))) continue;
        ++total;
        inside += patch.contains(x, y, z);
      }
    }
  }
  if (total == 0) {
    throw UndefinedMetricError(std::string("recall undefined: region ") + region_name(region) + " is empty");
  }
  return static_cast<double>(inside) / static_cast<double>(total);
}

}  // namespace topopatch
