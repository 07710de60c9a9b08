#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "topopatch/error.hpp"

namespace topopatch {

// Grid extents. Axis order is (x, y, z) = (sagittal, coronal, axial); a 2D
// grid is a 3D grid with nz == 1. Storage is x-fastest.
struct Shape3 {
  std::size_t nx = 1;
  std::size_t ny = 1;
  std::size_t nz = 1;

  constexpr std::size_t size() const { return nx * ny * nz; }
  constexpr bool is_2d() const { return nz == 1; }
  constexpr std::size_t operator[](std::size_t axis) const {
    return axis == 0 ? nx : (axis == 1 ? ny : nz);
  }
  friend constexpr bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& s);

using Index3 = std::array<std::size_t, 3>;
using Coord3 = std::array<double, 3>;

template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  explicit Grid(Shape3 shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {
    check_shape(shape);
  }
  Grid(Shape3 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    check_shape(shape);
    if (data_.size() != shape_.size()) {
      throw ShapeError("grid data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  const Shape3& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z = 0) const {
    return x + shape_.nx * (y + shape_.ny * z);
  }
  Index3 coords(std::size_t flat) const {
    const std::size_t x = flat % shape_.nx;
    const std::size_t rest = flat / shape_.nx;
    return {x, rest % shape_.ny, rest / shape_.ny};
  }
  bool contains(long x, long y, long z) const {
    return x >= 0 && y >= 0 && z >= 0 && static_cast<std::size_t>(x) < shape_.nx &&
           static_cast<std::size_t>(y) < shape_.ny && static_cast<std::size_t>(z) < shape_.nz;
  }

  T& operator()(std::size_t x, std::size_t y, std::size_t z = 0) { return data_[index(x, y, z)]; }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z = 0) const {
    return data_[index(x, y, z)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static void check_shape(const Shape3& s) {
    if (s.nx == 0 || s.ny == 0 || s.nz == 0) {
      throw ShapeError("grid shape components must be >= 1, got " + to_string(s));
    }
  }

  Shape3 shape_{};
  std::vector<T> data_;
};

// Intensity volume (ingestion unit, stored as float like the on-disk formats).
using Volume3D = Grid<float>;
// 2D working image; nz == 1. Double precision for derivative work.
using Slice2D = Grid<double>;
// Boolean grid, 0 or 1 per voxel.
using BinaryMask = Grid<std::uint8_t>;
// Component labels, 0 = background.
using LabelGrid = Grid<std::int32_t>;

template <typename To, typename From>
Grid<To> grid_cast(const Grid<From>& in) {
  std::vector<To> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<To>(in[i]);
  return Grid<To>(in.shape(), std::move(out));
}

inline std::size_t count_true(const BinaryMask& m) {
  std::size_t n = 0;
  for (auto v : m.values()) n += v != 0;
  return n;
}

}  // namespace topopatch
