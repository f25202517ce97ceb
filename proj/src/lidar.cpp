#include "energs/lidar.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace energs {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void ScanConfig::validate() const {
  if (azimuth_count < 1 || elevation_count < 1) throw std::invalid_argument("ray counts must be >= 1");
  if (!(max_range > 0.0)) throw std::invalid_argument("max_range must be positive");
  if (!(noise_stddev >= 0.0)) throw std::invalid_argument("noise stddev must be non-negative");
  if (elevation_min_deg > elevation_max_deg) throw std::invalid_argument("elevation range inverted");
  if (elevation_min_deg < -90.0 || elevation_max_deg > 90.0)
    throw std::invalid_argument("elevation outside [-90, 90] degrees");
}

std::size_t SensorScan::hit_count() const {
  std::size_t n = 0;
  for (const auto& r : rays) n += r.hit ? 1 : 0;
  return n;
}

Vec3 ray_direction(const SensorPose& pose, double azimuth_deg, double elevation_deg) {
  const double az = azimuth_deg * kDeg;
  const double el = elevation_deg * kDeg;
  const Vec3 local{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
  // Pitch about y (positive tilts +x up), then yaw about z.
  const double cp = std::cos(pose.pitch_deg * kDeg), sp = std::sin(pose.pitch_deg * kDeg);
  const Vec3 pitched{cp * local.x - sp * local.z, local.y, sp * local.x + cp * local.z};
  const double cy = std::cos(pose.yaw_deg * kDeg), sy = std::sin(pose.yaw_deg * kDeg);
  Vec3 d{cy * pitched.x - sy * pitched.y, sy * pitched.x + cy * pitched.y, pitched.z};
  return d * (1.0 / norm(d));
}

SensorScan scan(const SceneDescription& scene, const SensorPose& pose, const ScanConfig& cfg) {
  cfg.validate();
  if (!scene.domain_bounds.contains(pose.position)) throw std::invalid_argument("sensor pose outside domain");
  if (inside_geometry(scene, pose.position)) throw std::invalid_argument("sensor pose inside geometry");

  std::mt19937_64 rng(cfg.noise_seed);
  std::normal_distribution<double> noise(0.0, cfg.noise_stddev > 0.0 ? cfg.noise_stddev : 1.0);

  SensorScan out;
  out.origin = pose.position;
  out.max_range = cfg.max_range;
  out.rays.reserve(static_cast<std::size_t>(cfg.azimuth_count) * cfg.elevation_count);

  for (int e = 0; e < cfg.elevation_count; ++e) {
    const double elev =
        cfg.elevation_count == 1
            ? cfg.elevation_min_deg
            : cfg.elevation_min_deg +
                  (cfg.elevation_max_deg - cfg.elevation_min_deg) * e / (cfg.elevation_count - 1);
    for (int a = 0; a < cfg.azimuth_count; ++a) {
      const double az = 360.0 * a / cfg.azimuth_count;
      RayRecord rec;
      rec.dir = ray_direction(pose, az, elev);
      const auto t = ray_cast(scene, pose.position, rec.dir, cfg.max_range);
      if (t) {
        double d = *t;
        if (cfg.noise_stddev > 0.0) {
          // Clamp keeps the noisy range strictly positive.
          d = std::max(d + noise(rng), 1e-6);
        }
        rec.hit = true;
        rec.distance = d;
        rec.point = pose.position + rec.dir * d;
      } else {
        rec.distance = cfg.max_range;
      }
      out.rays.push_back(rec);
    }
  }
  return out;
}

MergedScans merge_scans(std::vector<SensorScan> scans) {
  if (scans.empty()) throw std::invalid_argument("merge_scans needs at least one scan");
  MergedScans m;
  for (const auto& s : scans)
    for (const auto& r : s.rays)
      if (r.hit) m.cloud.push_back(r.point);
  m.scans = std::move(scans);
  return m;
}

void save_point_cloud(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# x y z (meters)\n";
  char buf[96];
  for (const auto& p : cloud) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    out << buf;
  }
}

PointCloud parse_point_cloud(const std::string& text) {
  PointCloud cloud;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Vec3 p;
    std::string extra;
    if (!(ls >> p.x >> p.y >> p.z) || (ls >> extra)) {
      throw std::invalid_argument("bad point on line " + std::to_string(lineno));
    }
    cloud.push_back(p);
  }
  return cloud;
}

PointCloud load_point_cloud(const std::string& path) { return parse_point_cloud(read_file(path)); }

std::string scans_to_json(const std::vector<SensorScan>& scans) {
  using nlohmann::json;
  json j = json::array();
  for (const auto& s : scans) {
    json rays = json::array();
    for (const auto& r : s.rays) {
      json jr = {{"dir", {r.dir.x, r.dir.y, r.dir.z}}, {"hit", r.hit}, {"distance", r.distance}};
      if (r.hit) jr["point"] = {r.point.x, r.point.y, r.point.z};
      rays.push_back(std::move(jr));
    }
    j.push_back({{"origin", {s.origin.x, s.origin.y, s.origin.z}},
                 {"max_range", s.max_range},
                 {"rays", std::move(rays)}});
  }
  return json{{"scans", std::move(j)}}.dump() + "\n";
}

std::vector<SensorScan> scans_from_json(const std::string& text) {
  using nlohmann::json;
  std::vector<SensorScan> scans;
  try {
    const json j = json::parse(text);
    auto v3 = [](const json& a) { return Vec3{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()}; };
    for (const auto& js : j.at("scans")) {
      SensorScan s;
      s.origin = v3(js.at("origin"));
      s.max_range = js.at("max_range").get<double>();
      for (const auto& jr : js.at("rays")) {
        RayRecord r;
        r.dir = v3(jr.at("dir"));
        r.hit = jr.at("hit").get<bool>();
        r.distance = jr.at("distance").get<double>();
        if (r.hit) r.point = v3(jr.at("point"));
        s.rays.push_back(r);
      }
      scans.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed scan file: ") + e.what());
  }
  return scans;
}

void save_scans(const std::vector<SensorScan>& scans, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << scans_to_json(scans);
}

std::vector<SensorScan> load_scans(const std::string& path) { return scans_from_json(read_file(path)); }

}  // namespace energs
