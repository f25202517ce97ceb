#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "energs/geometry.hpp"

namespace energs {

struct Index3 {
  int x = 0;
  int y = 0;
  int z = 0;
  friend constexpr bool operator==(const Index3&, const Index3&) = default;
};

struct Dims {
  int x = 0;
  int y = 0;
  int z = 0;

  constexpr std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  constexpr int operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
  constexpr bool contains(const Index3& i) const {
    return i.x >= 0 && i.y >= 0 && i.z >= 0 && i.x < x && i.y < y && i.z < z;
  }
  /// Row-major linear index, x fastest.
  constexpr std::size_t linear(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(y) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(x) +
           static_cast<std::size_t>(i);
  }
  constexpr std::size_t linear(const Index3& i) const { return linear(i.x, i.y, i.z); }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

/// Dense 3-D grid, row-major with x fastest.
template <typename T>
class Grid3 {
 public:
  Grid3() = default;
  Grid3(Dims dims, T fill) : dims_(dims), data_(dims.count(), fill) {}

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int i, int j, int k) { return data_[dims_.linear(i, j, k)]; }
  const T& operator()(int i, int j, int k) const { return data_[dims_.linear(i, j, k)]; }
  T& operator[](const Index3& i) { return data_[dims_.linear(i)]; }
  const T& operator[](const Index3& i) const { return data_[dims_.linear(i)]; }
  T& at_linear(std::size_t n) { return data_[n]; }
  const T& at_linear(std::size_t n) const { return data_[n]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  Dims dims_{};
  std::vector<T> data_;
};

/// Placement of a voxel grid in world space. Voxel (i,j,k) spans
/// [origin + (i,j,k)*voxel_size, origin + (i+1,j+1,k+1)*voxel_size];
/// grid nodes sit at voxel centers.
struct GridFrame {
  Vec3 origin;
  double voxel_size = 0.25;
  Dims dims;

  Vec3 center(const Index3& i) const {
    return {origin.x + (i.x + 0.5) * voxel_size, origin.y + (i.y + 0.5) * voxel_size,
            origin.z + (i.z + 0.5) * voxel_size};
  }
  Aabb bounds() const {
    return {origin, {origin.x + dims.x * voxel_size, origin.y + dims.y * voxel_size,
                     origin.z + dims.z * voxel_size}};
  }
  /// Containing voxel (floor), possibly outside the grid.
  Index3 containing(const Vec3& p) const {
    return {static_cast<int>(std::floor((p.x - origin.x) / voxel_size)),
            static_cast<int>(std::floor((p.y - origin.y) / voxel_size)),
            static_cast<int>(std::floor((p.z - origin.z) / voxel_size))};
  }
  /// Containing voxel clamped into the grid.
  Index3 containing_clamped(const Vec3& p) const {
    auto axis = [&](double v, double o, int n) {
      const double f = std::floor((v - o) / voxel_size);
      return static_cast<int>(std::clamp(f, 0.0, static_cast<double>(n - 1)));
    };
    return {axis(p.x, origin.x, dims.x), axis(p.y, origin.y, dims.y), axis(p.z, origin.z, dims.z)};
  }
  /// True when p lies in the half-open box covered by the grid.
  bool inside(const Vec3& p) const {
    const Aabb b = bounds();
    return p.x >= b.lo.x && p.x < b.hi.x && p.y >= b.lo.y && p.y < b.hi.y && p.z >= b.lo.z &&
           p.z < b.hi.z;
  }
  friend bool operator==(const GridFrame&, const GridFrame&) = default;
};

}  // namespace energs
