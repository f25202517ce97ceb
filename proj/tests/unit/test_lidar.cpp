#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "energs/lidar.hpp"
#include "energs/validate.hpp"

using namespace energs;

namespace {

SceneDescription flat_ground() {
  SceneDescription s;
  s.domain_bounds = {{-10, -10, -1}, {10, 10, 10}};
  s.rects.push_back(Rect{2, 0.0, {-10, -10}, {10, 10}});
  return s;
}

ScanConfig single_ray(double elevation) {
  ScanConfig c;
  c.azimuth_count = 1;
  c.elevation_count = 1;
  c.elevation_min_deg = c.elevation_max_deg = elevation;
  c.noise_stddev = 0.0;
  return c;
}

}  // namespace

TEST_CASE("single downward ray hits the ground below the sensor") {
  const SensorScan s = scan(flat_ground(), SensorPose{{0, 0, 2}, 0, 0}, single_ray(-90.0));
  REQUIRE(s.rays.size() == 1);
  REQUIRE(s.rays[0].hit);
  CHECK(std::abs(s.rays[0].point.x) < 1e-12);
  CHECK(std::abs(s.rays[0].point.y) < 1e-12);
  CHECK(std::abs(s.rays[0].point.z) < 1e-12);
  CHECK(s.rays[0].distance == doctest::Approx(2.0).epsilon(1e-12));

  const SensorScan up = scan(flat_ground(), SensorPose{{0, 0, 2}, 0, 0}, single_ray(45.0));
  CHECK_FALSE(up.rays[0].hit);
  CHECK(up.rays[0].distance == up.max_range);
}

TEST_CASE("scan record invariants on the canyon") {
  const SceneDescription scene = generate_canyon(0);
  const ScanConfig cfg;
  const SensorScan s = scan(scene, scene.sensors[0], cfg);
  REQUIRE(s.rays.size() == static_cast<std::size_t>(cfg.azimuth_count * cfg.elevation_count));
  const double max_sin = std::sin(cfg.elevation_max_deg * M_PI / 180.0) + 1e-12;
  const double min_sin = std::sin(cfg.elevation_min_deg * M_PI / 180.0) - 1e-12;
  const CanyonParams p;
  for (const auto& r : s.rays) {
    CHECK(std::abs(norm(r.dir) - 1.0) < 1e-12);
    CHECK(r.dir.z <= max_sin);
    CHECK(r.dir.z >= min_sin);
    if (!r.hit) continue;
    CHECK(norm(r.point - (s.origin + r.dir * r.distance)) <= 1e-6);
    // Range noise is Gaussian; 5 sigma bounds every sample of this size in practice.
    CHECK(distance_to_surface(scene, r.point) <= 5.0 * cfg.noise_stddev + 1e-6);
    // The rooftop slab stays outside the field of view.
    CHECK(r.point.z < p.bridge_z - 5.0 * cfg.noise_stddev);
  }
}

TEST_CASE("scans are deterministic for a fixed noise seed") {
  const SceneDescription scene = generate_canyon(0);
  ScanConfig cfg;
  cfg.noise_stddev = 0.05;
  cfg.noise_seed = 9;
  const auto a = scans_to_json({scan(scene, scene.sensors[1], cfg)});
  const auto b = scans_to_json({scan(scene, scene.sensors[1], cfg)});
  CHECK(a == b);
  cfg.noise_seed = 10;
  CHECK(a != scans_to_json({scan(scene, scene.sensors[1], cfg)}));
}

TEST_CASE("poses inside geometry or outside the domain are rejected") {
  const SceneDescription scene = generate_canyon(0);
  const Aabb wall = scene.boxes.front();
  const Vec3 inside = (wall.lo + wall.hi) * 0.5;
  CHECK_THROWS_AS(scan(scene, SensorPose{inside, 0, 0}, ScanConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(scan(scene, SensorPose{{0, 0, 100}, 0, 0}, ScanConfig{}), std::invalid_argument);
  ScanConfig bad;
  bad.azimuth_count = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("merge_scans concatenates hit points without deduplication") {
  const SceneDescription g = flat_ground();
  ScanConfig down = single_ray(-60.0);
  down.azimuth_count = 3;
  const SensorScan three = scan(g, SensorPose{{0, 0, 2}, 0, 0}, down);
  down.azimuth_count = 4;
  const SensorScan four = scan(g, SensorPose{{1, 0, 2}, 0, 0}, down);
  CHECK(merge_scans({three, four}).cloud.size() == 7);
  CHECK(merge_scans({three, three}).cloud.size() == 6);

  const SensorScan misses = scan(g, SensorPose{{0, 0, 2}, 0, 0}, single_ray(30.0));
  const MergedScans m = merge_scans({misses});
  CHECK(m.cloud.empty());
  CHECK(m.scans.size() == 1);
  CHECK_THROWS_AS(merge_scans({}), std::invalid_argument);
}

TEST_CASE("point cloud and scan files round-trip") {
  const PointCloud parsed = parse_point_cloud("# comment\n1 2 3\n\n-0.5 0.25 1e-3\n");
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[1] == Vec3{-0.5, 0.25, 1e-3});

  const SceneDescription scene = generate_canyon(0);
  const auto scans = scan_scene(scene, ScanConfig{});
  const auto path = (std::filesystem::temp_directory_path() / "energs_test_scans.json").string();
  save_scans(scans, path);
  CHECK(scans_to_json(load_scans(path)) == scans_to_json(scans));

  const PointCloud cloud = merge_scans(scans).cloud;
  const auto cpath = (std::filesystem::temp_directory_path() / "energs_test_cloud.xyz").string();
  save_point_cloud(cloud, cpath);
  CHECK(load_point_cloud(cpath) == cloud);
  std::filesystem::remove(path);
  std::filesystem::remove(cpath);
}
