#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "energs/geometry.hpp"
#include "energs/scene.hpp"

namespace energs {

using PointCloud = std::vector<Vec3>;

struct ScanConfig {
  int azimuth_count = 360;      // full revolution, evenly spaced
  int elevation_count = 32;     // inclusive linspace over [elevation_min, elevation_max]
  double elevation_min_deg = -15.0;
  double elevation_max_deg = 5.0;
  double max_range = 30.0;
  double noise_stddev = 0.02;   // along-ray Gaussian range noise
  std::uint64_t noise_seed = 0;

  void validate() const;
};

struct RayRecord {
  Vec3 dir;
  bool hit = false;
  double distance = 0.0;  // noisy range for hits, max_range for misses
  Vec3 point;             // hit point (origin + distance * dir); unused for misses
};

struct SensorScan {
  Vec3 origin;
  double max_range = 0.0;
  std::vector<RayRecord> rays;

  std::size_t hit_count() const;
};

/// Unit direction for sensor-frame azimuth/elevation (degrees), rotated by
/// the pose pitch (about y) then yaw (about z).
Vec3 ray_direction(const SensorPose& pose, double azimuth_deg, double elevation_deg);

/// One ray per (azimuth, elevation) cell. Deterministic for a fixed seed.
/// Throws std::invalid_argument when the pose is outside the domain or inside geometry.
SensorScan scan(const SceneDescription& scene, const SensorPose& pose, const ScanConfig& cfg);

struct MergedScans {
  PointCloud cloud;
  std::vector<SensorScan> scans;
};

/// Concatenates all hit points (no deduplication). Throws on empty input.
MergedScans merge_scans(std::vector<SensorScan> scans);

/// Plain text, one "x y z" per line; '#' starts a comment line.
void save_point_cloud(const PointCloud& cloud, const std::string& path);
PointCloud load_point_cloud(const std::string& path);
PointCloud parse_point_cloud(const std::string& text);

std::string scans_to_json(const std::vector<SensorScan>& scans);
std::vector<SensorScan> scans_from_json(const std::string& text);
void save_scans(const std::vector<SensorScan>& scans, const std::string& path);
std::vector<SensorScan> load_scans(const std::string& path);

}  // namespace energs
