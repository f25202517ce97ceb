#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace energs {

/// Small value-type 3-vector in meters (or dimensionless, for gradients).
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x; y += o.y; z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x; y -= o.y; z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s; y *= s; z *= s;
    return *this;
  }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline bool is_finite(const Vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Axis-aligned box [lo, hi].
struct Aabb {
  Vec3 lo;
  Vec3 hi;

  constexpr Vec3 extent() const { return hi - lo; }
  constexpr bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
           p.z <= hi.z;
  }
  constexpr bool contains(const Aabb& b) const { return contains(b.lo) && contains(b.hi); }
  constexpr bool degenerate() const { return !(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z); }
  friend constexpr bool operator==(const Aabb&, const Aabb&) = default;
};

/// Ray-box slab test. Returns the parametric interval [t0, t1] of the
/// intersection of the infinite line with the box; t0 > t1 when disjoint.
inline std::array<double, 2> slab_interval(const Aabb& box, const Vec3& origin, const Vec3& dir) {
  double t0 = -INFINITY;
  double t1 = INFINITY;
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.lo[a] || origin[a] > box.hi[a]) return {INFINITY, -INFINITY};
      continue;
    }
    const double inv = 1.0 / dir[a];
    double ta = (box.lo[a] - origin[a]) * inv;
    double tb = (box.hi[a] - origin[a]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return {t0, t1};
}

}  // namespace energs
