#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include "doctest.h"
#include "energs/scene.hpp"

using namespace energs;

namespace {

// Independent slab test for a box; returns the entry distance (or 0 when the
// origin is inside), nullopt on miss.
std::optional<double> slab_oracle(const Aabb& b, const Vec3& o, const Vec3& d) {
  double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < b.lo[a] || o[a] > b.hi[a]) return std::nullopt;
      continue;
    }
    double ta = (b.lo[a] - o[a]) / d[a], tb = (b.hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t1 < 0.0) return std::nullopt;
  return std::max(t0, 0.0);
}

std::optional<double> rect_oracle(const Rect& r, const Vec3& o, const Vec3& d) {
  if (d[r.axis] == 0.0) return std::nullopt;
  const double t = (r.offset - o[r.axis]) / d[r.axis];
  if (t < 0.0) return std::nullopt;
  const Vec3 p = o + d * t;
  const auto ax = rect_axes(r.axis);
  for (int k = 0; k < 2; ++k)
    if (p[ax[k]] < r.lo[k] || p[ax[k]] > r.hi[k]) return std::nullopt;
  return t;
}

std::optional<double> brute_force_cast(const SceneDescription& s, const Vec3& o, const Vec3& d, double max_range) {
  std::optional<double> best;
  auto take = [&](std::optional<double> t) {
    if (t && *t <= max_range && (!best || *t < *best)) best = t;
  };
  for (const auto& b : s.boxes) take(slab_oracle(b, o, d));
  for (const auto& r : s.rects) take(rect_oracle(r, o, d));
  return best;
}

SceneDescription ground_and_box() {
  SceneDescription s;
  s.domain_bounds = {{-10, -10, -1}, {10, 10, 10}};
  s.rects.push_back(Rect{2, 0.0, {-10, -10}, {10, 10}});
  s.boxes.push_back(Aabb{{5, -1, 0}, {6, 1, 2}});
  return s;
}

}  // namespace

TEST_CASE("ray_cast hits the ground plane and box faces analytically") {
  const SceneDescription s = ground_and_box();
  auto down = ray_cast(s, {0, 0, 1}, {0, 0, -1}, 50.0);
  REQUIRE(down);
  CHECK(*down == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_FALSE(ray_cast(s, {0, 0, 1}, {0, 0, 1}, 50.0));

  auto face = ray_cast(s, {0, 0, 1}, {1, 0, 0}, 50.0);
  REQUIRE(face);
  CHECK(*face == doctest::Approx(5.0).epsilon(1e-12));

  CHECK_FALSE(ray_cast(s, {0, 0, 1}, {1, 0, 0}, 4.0));
  CHECK_THROWS_AS(ray_cast(s, {0, 0, 1}, {1, 0.1, 0}, 50.0), std::invalid_argument);
}

TEST_CASE("ray_cast matches the per-primitive brute force on the canyon") {
  const SceneDescription s = generate_canyon(4);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int hits = 0;
  for (int n = 0; n < 5000; ++n) {
    const Vec3 o{8 * u(rng), 2.5 * u(rng), 1.5 + u(rng)};
    Vec3 d{u(rng), u(rng), u(rng)};
    const double len = norm(d);
    if (len < 1e-3) continue;
    d = d * (1.0 / len);
    const auto got = ray_cast(s, o, d, 30.0);
    const auto want = brute_force_cast(s, o, d, 30.0);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      ++hits;
      CHECK(std::abs(*got - *want) <= 1e-9);
    }
  }
  CHECK(hits > 1000);
}

TEST_CASE("canyon generation is a pure function of seed and params") {
  const SceneDescription a = generate_canyon(0);
  CHECK(scene_to_json(a) == scene_to_json(generate_canyon(0)));

  const SceneDescription s1 = generate_canyon(1), s2 = generate_canyon(2);
  CHECK(scene_to_json(s1) != scene_to_json(s2));
  CHECK(s1.boxes.size() == s2.boxes.size());
  CHECK(s1.rects.size() == s2.rects.size());
  CHECK(s1.sensors.size() == s2.sensors.size());

  CHECK(scene_from_json(scene_to_json(a)) == a);
  CHECK_NOTHROW(validate_scene(a));
}

TEST_CASE("canyon layout: ground at z=0, walls on both sides, a rooftop slab") {
  const CanyonParams p;
  const SceneDescription s = generate_canyon(0, p);
  bool ground = false;
  for (const auto& r : s.rects) ground = ground || (r.axis == 2 && r.offset == 0.0);
  CHECK(ground);
  int left = 0, right = 0, slab = 0;
  for (const auto& b : s.boxes) {
    if (b.lo.z >= p.bridge_z - 1e-9) ++slab;
    else if (b.hi.y <= 0.0) ++left;
    else if (b.lo.y >= 0.0) ++right;
  }
  CHECK(left == p.segments_per_side);
  CHECK(right == p.segments_per_side);
  CHECK(slab == 1);
  CHECK(s.sensors.size() == static_cast<std::size_t>(p.sensor_count));
}

TEST_CASE("degenerate canyon parameters are rejected") {
  CanyonParams p;
  p.length = 0.0;
  CHECK_THROWS_AS(generate_canyon(0, p), std::invalid_argument);
}
