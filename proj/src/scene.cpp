#include "energs/scene.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace energs {

namespace {

using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

bool rect_in_domain(const Rect& r, const Aabb& d) {
  const auto ax = rect_axes(r.axis);
  if (r.offset < d.lo[r.axis] || r.offset > d.hi[r.axis]) return false;
  for (int k = 0; k < 2; ++k) {
    if (r.lo[k] < d.lo[ax[k]] || r.hi[k] > d.hi[ax[k]] || r.lo[k] > r.hi[k]) return false;
  }
  return true;
}

double distance_to_box_surface(const Aabb& b, const Vec3& p) {
  if (b.contains(p)) {
    double m = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) m = std::min({m, p[a] - b.lo[a], b.hi[a] - p[a]});
    return m;
  }
  Vec3 d;
  for (int a = 0; a < 3; ++a) d[a] = std::max({b.lo[a] - p[a], 0.0, p[a] - b.hi[a]});
  return norm(d);
}

double distance_to_rect(const Rect& r, const Vec3& p) {
  const auto ax = rect_axes(r.axis);
  Vec3 d;
  d[r.axis] = p[r.axis] - r.offset;
  for (int k = 0; k < 2; ++k) d[ax[k]] = std::max({r.lo[k] - p[ax[k]], 0.0, p[ax[k]] - r.hi[k]});
  return norm(d);
}

}  // namespace

SceneDescription generate_canyon(std::uint64_t seed, const CanyonParams& p) {
  if (!(p.length > 0 && p.half_width > 0 && p.wall_thickness > 0 && p.wall_height > 0 &&
        p.domain_half_y > 0 && p.domain_height > 0 && p.ground_depth > 0 && p.bridge_width > 0 &&
        p.bridge_thickness > 0 && p.segments_per_side >= 1 && p.sensor_count >= 1)) {
    throw std::invalid_argument("canyon parameters must be positive");
  }
  if (p.half_width + p.wall_jitter + p.wall_thickness > p.domain_half_y) {
    throw std::invalid_argument("walls do not fit inside the domain");
  }
  if (p.bridge_z + p.bridge_thickness > p.domain_height ||
      p.wall_height + p.height_jitter > p.domain_height) {
    throw std::invalid_argument("geometry exceeds the domain height");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SceneDescription s;
  const double hx = 0.5 * p.length;
  s.domain_bounds = {{-hx, -p.domain_half_y, -p.ground_depth}, {hx, p.domain_half_y, p.domain_height}};

  s.rects.push_back(Rect{2, 0.0, {-hx, -p.domain_half_y}, {hx, p.domain_half_y}});

  for (int side = -1; side <= 1; side += 2) {
    // Segment boundaries along x: interior cuts are jittered around the even split.
    std::vector<double> cuts{-hx};
    for (int k = 1; k < p.segments_per_side; ++k) {
      const double even = -hx + p.length * k / p.segments_per_side;
      const double span = 0.25 * p.length / p.segments_per_side;
      cuts.push_back(even + (2.0 * unit(rng) - 1.0) * span);
    }
    cuts.push_back(hx);
    for (int k = 0; k < p.segments_per_side; ++k) {
      const double inner = p.half_width + unit(rng) * p.wall_jitter;
      const double height = p.wall_height + (2.0 * unit(rng) - 1.0) * p.height_jitter;
      Aabb box;
      box.lo = {cuts[k], side < 0 ? -(inner + p.wall_thickness) : inner, 0.0};
      box.hi = {cuts[k + 1], side < 0 ? -inner : inner + p.wall_thickness, height};
      s.boxes.push_back(box);
    }
  }

  const double bridge_center = (2.0 * unit(rng) - 1.0) * 0.15 * p.length;
  const double reach = p.half_width + p.wall_jitter;
  s.boxes.push_back(Aabb{{bridge_center - 0.5 * p.bridge_width, -reach, p.bridge_z},
                         {bridge_center + 0.5 * p.bridge_width, reach, p.bridge_z + p.bridge_thickness}});

  for (int k = 0; k < p.sensor_count; ++k) {
    const double x = (k - 0.5 * (p.sensor_count - 1)) * p.sensor_spacing;
    s.sensors.push_back(SensorPose{{x, 0.0, p.sensor_height}, 0.0, 0.0});
  }

  // The slab must stay above the upper FoV cutoff from every sensor.
  const Aabb& slab = s.boxes.back();
  for (const auto& sensor : s.sensors) {
    const Vec3& o = sensor.position;
    double far = 0.0;
    for (double x : {slab.lo.x, slab.hi.x})
      for (double y : {slab.lo.y, slab.hi.y}) far = std::max(far, std::hypot(x - o.x, y - o.y));
    const double elev = std::atan2(slab.lo.z - o.z, far) * 180.0 / std::numbers::pi;
    if (elev <= p.fov_max_deg + sensor.pitch_deg) {
      throw std::invalid_argument("rooftop slab falls inside the sensor field of view");
    }
  }

  validate_scene(s);
  return s;
}

void validate_scene(const SceneDescription& scene) {
  if (scene.domain_bounds.degenerate()) throw std::invalid_argument("degenerate domain bounds");
  for (const auto& b : scene.boxes) {
    if (b.degenerate()) throw std::invalid_argument("degenerate box");
    if (!scene.domain_bounds.contains(b)) throw std::invalid_argument("box outside domain");
  }
  for (const auto& r : scene.rects) {
    if (r.axis < 0 || r.axis > 2) throw std::invalid_argument("rect axis must be 0, 1 or 2");
    if (!rect_in_domain(r, scene.domain_bounds)) throw std::invalid_argument("rect outside domain");
  }
  for (const auto& s : scene.sensors) {
    if (!scene.domain_bounds.contains(s.position)) throw std::invalid_argument("sensor outside domain");
    if (inside_geometry(scene, s.position)) throw std::invalid_argument("sensor inside geometry");
  }
}

std::optional<double> intersect_box(const Aabb& box, const Vec3& origin, const Vec3& dir) {
  const auto [t0, t1] = slab_interval(box, origin, dir);
  if (t0 > t1) return std::nullopt;
  if (t0 >= 0.0) return t0;
  if (t1 >= 0.0) return t1;
  return std::nullopt;
}

std::optional<double> intersect_rect(const Rect& r, const Vec3& origin, const Vec3& dir) {
  const double da = dir[r.axis];
  if (da == 0.0) return std::nullopt;
  const double t = (r.offset - origin[r.axis]) / da;
  if (!(t >= 0.0)) return std::nullopt;
  const auto ax = rect_axes(r.axis);
  for (int k = 0; k < 2; ++k) {
    const double c = origin[ax[k]] + t * dir[ax[k]];
    if (c < r.lo[k] || c > r.hi[k]) return std::nullopt;
  }
  return t;
}

std::optional<double> ray_cast(const SceneDescription& scene, const Vec3& origin, const Vec3& dir,
                               double max_range) {
  if (std::abs(norm(dir) - 1.0) > 1e-9) throw std::invalid_argument("ray direction must be unit length");
  std::optional<double> best;
  auto consider = [&](std::optional<double> t) {
    if (t && *t <= max_range && (!best || *t < *best)) best = t;
  };
  for (const auto& b : scene.boxes) consider(intersect_box(b, origin, dir));
  for (const auto& r : scene.rects) consider(intersect_rect(r, origin, dir));
  return best;
}

bool inside_geometry(const SceneDescription& scene, const Vec3& p) {
  for (const auto& b : scene.boxes)
    if (b.contains(p)) return true;
  return false;
}

double distance_to_surface(const SceneDescription& scene, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : scene.boxes) best = std::min(best, distance_to_box_surface(b, p));
  for (const auto& r : scene.rects) best = std::min(best, distance_to_rect(r, p));
  return best;
}

std::string scene_to_json(const SceneDescription& s) {
  json j;
  j["domain_bounds"] = {{"min", vec_json(s.domain_bounds.lo)}, {"max", vec_json(s.domain_bounds.hi)}};
  j["boxes"] = json::array();
  for (const auto& b : s.boxes) j["boxes"].push_back({{"min", vec_json(b.lo)}, {"max", vec_json(b.hi)}});
  j["rects"] = json::array();
  for (const auto& r : s.rects) {
    j["rects"].push_back({{"axis", r.axis},
                          {"offset", r.offset},
                          {"min", json::array({r.lo[0], r.lo[1]})},
                          {"max", json::array({r.hi[0], r.hi[1]})}});
  }
  j["sensors"] = json::array();
  for (const auto& p : s.sensors) {
    j["sensors"].push_back(
        {{"position", vec_json(p.position)}, {"yaw_deg", p.yaw_deg}, {"pitch_deg", p.pitch_deg}});
  }
  return j.dump(2) + "\n";
}

SceneDescription scene_from_json(const std::string& text) {
  SceneDescription s;
  try {
    const json j = json::parse(text);
    s.domain_bounds = {vec_from(j.at("domain_bounds").at("min")), vec_from(j.at("domain_bounds").at("max"))};
    for (const auto& b : j.at("boxes")) s.boxes.push_back({vec_from(b.at("min")), vec_from(b.at("max"))});
    for (const auto& r : j.at("rects")) {
      Rect rect;
      rect.axis = r.at("axis").get<int>();
      rect.offset = r.at("offset").get<double>();
      rect.lo = {r.at("min").at(0).get<double>(), r.at("min").at(1).get<double>()};
      rect.hi = {r.at("max").at(0).get<double>(), r.at("max").at(1).get<double>()};
      s.rects.push_back(rect);
    }
    for (const auto& p : j.at("sensors")) {
      s.sensors.push_back({vec_from(p.at("position")), p.value("yaw_deg", 0.0), p.value("pitch_deg", 0.0)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed scene: ") + e.what());
  }
  validate_scene(s);
  return s;
}

void save_scene(const SceneDescription& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << scene_to_json(scene);
}

SceneDescription load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str());
}

}  // namespace energs
