#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "energs/geometry.hpp"

namespace energs {

/// Finite axis-aligned rectangle lying in the plane {p[axis] == offset}.
/// lo/hi bound the two remaining axes in increasing axis order
/// (axis 2 -> (x, y), axis 1 -> (x, z), axis 0 -> (y, z)).
struct Rect {
  int axis = 2;
  double offset = 0.0;
  std::array<double, 2> lo{};
  std::array<double, 2> hi{};

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// The two in-plane axes of a rectangle with the given normal axis.
constexpr std::array<int, 2> rect_axes(int axis) {
  return axis == 0 ? std::array<int, 2>{1, 2}
                   : (axis == 1 ? std::array<int, 2>{0, 2} : std::array<int, 2>{0, 1});
}

struct SensorPose {
  Vec3 position;
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;

  friend bool operator==(const SensorPose&, const SensorPose&) = default;
};

struct SceneDescription {
  Aabb domain_bounds;
  std::vector<Aabb> boxes;
  std::vector<Rect> rects;
  std::vector<SensorPose> sensors;

  friend bool operator==(const SceneDescription&, const SceneDescription&) = default;
};

/// Street-canyon layout. Lengths in meters, angles in degrees.
struct CanyonParams {
  double length = 20.0;           // along x, centered on 0
  double half_width = 3.5;        // street half-width (wall inner faces at +-half_width)
  double wall_thickness = 1.0;
  double wall_height = 6.0;
  double wall_jitter = 0.5;       // per-segment inner-face offset, uniform in [0, jitter]
  double height_jitter = 1.0;     // per-segment height offset, uniform in [-j, j]
  int segments_per_side = 2;
  double bridge_width = 3.0;      // rooftop slab spanning the street, along x
  double bridge_thickness = 0.5;
  double bridge_z = 6.0;          // slab underside
  double domain_half_y = 6.125;
  double domain_height = 11.625;  // domain top
  double ground_depth = 0.375;    // domain extends this far below the ground plane
  double sensor_height = 1.8;
  int sensor_count = 3;
  double sensor_spacing = 5.0;
  double fov_max_deg = 5.0;       // upper FoV cutoff used to verify the slab stays unobserved
};

/// Deterministic canyon scene: ground plane at z=0, one wall per side split
/// into segments, one rooftop slab above the sensor FoV.
SceneDescription generate_canyon(std::uint64_t seed, const CanyonParams& params = {});

/// Throws std::invalid_argument if a primitive leaves the domain or a
/// sensor sits inside geometry.
void validate_scene(const SceneDescription& scene);

/// Nearest surface hit along a unit ray within [0, max_range]; nullopt on miss.
/// Throws std::invalid_argument when |dir| deviates from 1 by more than 1e-9.
std::optional<double> ray_cast(const SceneDescription& scene, const Vec3& origin, const Vec3& dir,
                               double max_range);

/// Per-primitive intersections used by ray_cast (nullopt when missed or behind).
std::optional<double> intersect_box(const Aabb& box, const Vec3& origin, const Vec3& dir);
std::optional<double> intersect_rect(const Rect& rect, const Vec3& origin, const Vec3& dir);

/// Point membership: true when p is inside (or on) any box.
bool inside_geometry(const SceneDescription& scene, const Vec3& p);

/// Distance from p to the nearest primitive surface (box faces or rectangles).
double distance_to_surface(const SceneDescription& scene, const Vec3& p);

std::string scene_to_json(const SceneDescription& scene);
SceneDescription scene_from_json(const std::string& text);
void save_scene(const SceneDescription& scene, const std::string& path);
SceneDescription load_scene(const std::string& path);

}  // namespace energs
