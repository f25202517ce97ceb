#pragma once

#include <span>
#include <string>
#include <vector>

#include "energs/relax.hpp"
#include "energs/voxel_field.hpp"

namespace energs {

struct ForceStats {
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

/// Geometric metric suite over the alive particles of a set.
struct MetricsReport {
  double leak_pct = 0.0;     // alive particles whose containing voxel is FREE
  double occcov_pct = 0.0;   // OCC voxels holding >= 1 alive particle
  double margin_m = 0.0;     // mean distance to FREE over particles in OCC or UNK voxels
  double thick_m = 0.0;      // 2 x mean interpolated d_occ over particles in OCC voxels
  std::size_t num_alive = 0;
  ForceStats force;
  bool empty = false;              // no alive particles; every rate is 0
  bool occcov_undefined = false;   // partition has no OCC voxel
  bool margin_undefined = false;   // no particle in OCC/UNK, or no FREE voxel
  bool thick_undefined = false;    // no particle in an OCC voxel
};

/// `forces` holds one vector per particle (entries of dead particles are
/// ignored); pass an empty span to skip the force statistics.
MetricsReport compute_metrics(const ParticleSet& particles, const FieldBundle& bundle,
                              std::span<const Vec3> forces);

/// Convenience overload evaluating forces with `params`.
MetricsReport compute_metrics(const ParticleSet& particles, const FieldBundle& bundle, const EnergyParams& params);

/// Percentile with linear interpolation between order statistics
/// (q in [0, 100]); `values` need not be sorted. Empty input gives 0.
double percentile(std::vector<double> values, double q);

struct Histogram {
  std::vector<double> bin_left;
  std::vector<std::size_t> count;
  double max = 0.0;
};

/// Histogram of |force| over alive particles with `bins` uniform bins on
/// [0, max]; the maximum falls into the last bin. All-zero forces put every
/// sample in bin 0. Throws std::invalid_argument for bins < 1.
Histogram force_norm_histogram(const ParticleSet& particles, std::span<const Vec3> forces, int bins);

inline constexpr const char* kMetricsHeader =
    "leak_pct,occcov_pct,margin_m,thick_m,num_alive,force_mean,force_p50,force_p95,force_max";

std::string metrics_csv_row(const MetricsReport& r);
void write_metrics_csv(const MetricsReport& r, const std::string& path);
void write_histogram_csv(const Histogram& h, const std::string& path);

}  // namespace energs
