#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "energs/geometry.hpp"
#include "energs/grid.hpp"
#include "energs/lidar.hpp"

namespace energs {

/// Voxel label codes. Values are part of the EGSF format.
enum class Label : std::uint8_t { Occ = 1, Free = 2, Unk = 3 };

/// Empty-mask sentinel distance (meters).
inline constexpr double kDistanceSentinel = 1e9;

struct LabelCounts {
  std::size_t occ = 0;
  std::size_t free = 0;
  std::size_t unk = 0;
};

/// Tri-state partition of an axis-aligned domain.
struct VoxelPartition {
  GridFrame frame;
  Grid3<Label> labels;
  bool no_evidence = false;  // set when carving saw zero rays

  Label at(const Index3& i) const { return labels[i]; }
  /// Label of the voxel containing p (clamped to the grid).
  Label label_at(const Vec3& p) const { return labels[frame.containing_clamped(p)]; }
  LabelCounts counts() const;
};

/// Grid covering `bounds` with cubic voxels; dims = ceil(extent / voxel_size).
GridFrame make_frame(const Aabb& bounds, double voxel_size);

/// Visits every voxel whose interior the segment [a, b] passes through, in
/// order, using 3-D DDA (Amanatides-Woo). The segment is clipped to the grid.
template <typename Visit>
void traverse_segment(const GridFrame& frame, const Vec3& a, const Vec3& b, Visit&& visit);

/// Ray carving: hit voxels OCC, voxels traversed before a hit (or up to
/// max_range for misses) FREE, everything else UNK. OCC wins over FREE.
VoxelPartition carve(std::span<const SensorScan> scans, const Aabb& bounds, double voxel_size);

/// Exact Euclidean distance (meters) from each voxel center to the nearest
/// masked voxel center, by separable squared-distance passes. An empty mask
/// yields kDistanceSentinel everywhere.
Grid3<double> edt(const Grid3<std::uint8_t>& mask, double voxel_size);

/// Mask of voxels whose label is one of `targets`.
Grid3<std::uint8_t> label_mask(const VoxelPartition& partition, std::initializer_list<Label> targets);
Grid3<double> edt(const VoxelPartition& partition, std::initializer_list<Label> targets);

/// Mask of in-grid voxels containing at least one cloud point.
Grid3<std::uint8_t> point_mask(const GridFrame& frame, std::span<const Vec3> cloud);

/// Central differences (one-sided on the boundary), divided by voxel_size.
/// A grid that is entirely the sentinel has zero gradient.
Grid3<Vec3> gradient(const Grid3<double>& g, double voxel_size);

struct DistanceFieldSet {
  GridFrame frame;
  Grid3<double> d_occ;    // distance to nearest LiDAR-point voxel
  Grid3<double> d_trust;  // penetration depth into FREE; zero elsewhere
  Grid3<double> d_unk;    // distance to nearest UNK voxel; zero inside UNK
  Grid3<Vec3> grad_occ;
  Grid3<Vec3> grad_trust;
  Grid3<Vec3> grad_unk;
  bool occ_enabled = true;  // false when built from an empty cloud

  friend bool operator==(const DistanceFieldSet&, const DistanceFieldSet&) = default;
};

/// Builds the three distance grids and their gradients. Distances are
/// rounded to float precision so that the EGSF dump is lossless.
DistanceFieldSet build_distance_fields(const VoxelPartition& partition, std::span<const Vec3> cloud);

/// Builds a field set from explicit distance grids (rounded to float) and
/// recomputes gradients.
DistanceFieldSet fields_from_distances(const GridFrame& frame, Grid3<double> d_occ, Grid3<double> d_trust,
                                       Grid3<double> d_unk);

struct FieldQueryResult {
  Label label = Label::Unk;
  double d_occ = 0.0;
  double d_trust = 0.0;
  double d_unk = 0.0;
  Vec3 grad_occ;
  Vec3 grad_trust;
  Vec3 grad_unk;
  bool clamped = false;  // position was outside the domain
};

/// Trilinear interpolation between voxel-center nodes; label from the
/// containing voxel. Out-of-domain positions are clamped and flagged.
/// Throws std::invalid_argument for NaN positions.
FieldQueryResult query(const DistanceFieldSet& fields, const VoxelPartition& partition, const Vec3& pos);

/// Trilinear blend of a scalar grid at pos (same clamping as query).
double interpolate(const Grid3<double>& g, const GridFrame& frame, const Vec3& pos);

/// Linear indices of the eight nodes blended for pos (after clamping).
std::array<std::size_t, 8> stencil_nodes(const GridFrame& frame, const Vec3& pos);

/// Partition plus fields, the unit handed between stages.
struct FieldBundle {
  VoxelPartition partition;
  DistanceFieldSet fields;
};

/// EGSF binary dump: magic "EGSF", u16 version, 3 x u32 dims, 3 x f64 origin,
/// f64 voxel_size, u8 labels, then f32 d_occ, d_trust, d_unk; little-endian,
/// row-major with x fastest.
std::vector<std::uint8_t> encode_egsf(const FieldBundle& bundle);
FieldBundle decode_egsf(std::span<const std::uint8_t> bytes);
void save_egsf(const FieldBundle& bundle, const std::string& path);
FieldBundle load_egsf(const std::string& path);

inline constexpr std::uint16_t kEgsfVersion = 1;

// ---------------------------------------------------------------------------

template <typename Visit>
void traverse_segment(const GridFrame& frame, const Vec3& a, const Vec3& b, Visit&& visit) {
  const Vec3 delta = b - a;
  const double len = norm(delta);
  if (!(len > 0.0)) {
    if (frame.inside(a)) visit(frame.containing(a));
    return;
  }
  const Vec3 dir = delta * (1.0 / len);
  auto [t0, t1] = slab_interval(frame.bounds(), a, dir);
  t0 = std::max(t0, 0.0);
  t1 = std::min(t1, len);
  if (t0 > t1) return;

  const double vs = frame.voxel_size;
  // Clamping absorbs rounding when the segment enters from outside the grid.
  const Vec3 entry = a + dir * t0;
  Index3 cur = frame.containing_clamped(entry);
  std::array<int, 3> step{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};
  for (int ax = 0; ax < 3; ++ax) {
    const double d = dir[ax];
    const int c = ax == 0 ? cur.x : (ax == 1 ? cur.y : cur.z);
    if (d > 0.0) {
      step[ax] = 1;
      t_max[ax] = (frame.origin[ax] + (c + 1) * vs - a[ax]) / d;
      t_delta[ax] = vs / d;
    } else if (d < 0.0) {
      step[ax] = -1;
      t_max[ax] = (frame.origin[ax] + c * vs - a[ax]) / d;
      t_delta[ax] = -vs / d;
    } else {
      step[ax] = 0;
      t_max[ax] = INFINITY;
      t_delta[ax] = INFINITY;
    }
  }
  const Dims& n = frame.dims;
  while (true) {
    visit(cur);
    int ax = 0;
    if (t_max[1] < t_max[ax]) ax = 1;
    if (t_max[2] < t_max[ax]) ax = 2;
    if (!(t_max[ax] < t1)) break;
    t_max[ax] += t_delta[ax];
    if (ax == 0) cur.x += step[0];
    else if (ax == 1) cur.y += step[1];
    else cur.z += step[2];
    if (!n.contains(cur)) break;
  }
}

}  // namespace energs
