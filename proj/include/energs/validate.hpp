#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "energs/energy.hpp"
#include "energs/lidar.hpp"
#include "energs/metrics.hpp"
#include "energs/relax.hpp"
#include "energs/scene.hpp"
#include "energs/voxel_field.hpp"

namespace energs {

// --- pipeline --------------------------------------------------------------

/// Scans every sensor of the scene. Sensor k uses noise seed cfg.noise_seed + k.
std::vector<SensorScan> scan_scene(const SceneDescription& scene, const ScanConfig& cfg);

/// Scan, merge, carve and build distance fields over the scene domain.
FieldBundle build_field(const SceneDescription& scene, const ScanConfig& cfg, double voxel_size);

/// Carve and build from existing scans.
FieldBundle build_field(const std::vector<SensorScan>& scans, const Aabb& bounds, double voxel_size);

/// Canonical validation scene: generate_canyon(seed) with default layout,
/// default scan config, voxel_size 0.25 m.
FieldBundle canonical_bundle(std::uint64_t seed = 0, double voxel_size = 0.25);

// --- gradient check --------------------------------------------------------

struct GradCheckConfig {
  std::size_t points = 1000;
  std::uint64_t seed = 0;
  double step_factor = 0.01;        // finite-difference step / voxel_size
  int min_boundary_voxels = 2;      // Chebyshev voxel distance to any other label
  double max_rel_error = 1e-3;
};

struct GradCheckResult {
  std::vector<Vec3> positions;
  std::vector<double> rel_error;  // |F - F_fd| / max(|F_fd|, tiny)
  double max_rel_error = 0.0;
  double p50_rel_error = 0.0;
  std::size_t failures = 0;
  bool pass = false;
};

/// Compares the analytic total force against the negated central finite
/// difference of the interpolated total energy at random interior points.
GradCheckResult gradient_check(const FieldBundle& bundle, const EnergyParams& params, const GradCheckConfig& cfg);

/// Chebyshev voxel distance from each voxel to the nearest voxel with a
/// different label, capped at `cap`.
Grid3<int> label_boundary_distance(const VoxelPartition& partition, int cap);

// --- experiments -----------------------------------------------------------

struct ExperimentConfig {
  std::string id = "theorem1";
  std::uint64_t seed = 0;  // scene seed and particle sampling seed
  double voxel_size = 0.25;
  EnergyParams params;

  // theorem1
  std::size_t t1_particles = 500;
  int t1_max_iterations = 5000;
  double t1_min_exit_fraction = 1.0;
  double t1_min_control_trapped = 0.0;  // control must trap strictly more than this
  PhotometricWell t1_control_well{{0.0, 0.0, 1.2}, 5.0, 1.5};
  double t1_control_joint_lambda = 1.0;
  int t1_control_iterations = 2000;

  // theorem2
  std::size_t t2_pairs = 10000;
  double t2_pair_distance_factor = 0.1;  // pair separation / voxel_size
  double t2_slack = 2.0;
  double t2_irregular_tolerance = 0.15;  // nodes with ||grad d| - 1| above this are excluded
  int t2_histogram_bins = 32;
  std::size_t t2_trace_particles = 1000;
  int t2_trace_iterations = 300;
  double t2_trace_tolerance = 1e-9;
  std::size_t t2_photo_wells = 400;
  double t2_photo_width = 0.3;
  double t2_photo_pareto_alpha = 1.5;
  double t2_photo_amplitude_scale = 1.0;

  // prop3
  double p3_d = 1.0;
  double p3_w = 1.0;
  std::vector<double> p3_sigma_factors{1, 2, 4, 8, 16, 32};
  double p3_max_final_ratio = 1e-2;
  double p3_tail_ratio_lo = 0.24;
  double p3_tail_ratio_hi = 0.26;
  double p3_grid_sigma_unk = 8.0;
  std::size_t p3_grid_particles = 200;
  int p3_grid_iterations = 1000;
  double p3_max_move_factor = 0.01;   // of voxel_size
  int p3_deep_unk_voxels = 3;         // voxel distance to any non-UNK voxel
  double p3_deep_occ_sigmas = 6.0;    // d_occ >= this * sigma_occ

  // ratio_sweep
  std::vector<double> rs_ratios{1.0 / 16, 1.0 / 4, 4, 16, 64};
  double rs_geo_mean = 0.25;
  double rs_baseline = 16.0;
  double rs_low = 1.0 / 16;
  double rs_high = 64.0;
  double rs_high_band = 0.10;  // relative OccCov band around the baseline
  std::size_t rs_particles = 5000;
  int rs_iterations = 300;

  // margin_sweep
  std::vector<double> ms_margins{0.1, 0.5, 1.0, 2.0};
  std::size_t ms_particles = 2000;
  int ms_iterations = 1000;
  int ms_t_prune = 100;
  double ms_max_leak_pct = 1.0;
  double ms_max_leak_no_prune_pct = 5.0;

  void validate() const;
};

struct Check {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=", "<", ">=", ">", "==", "in"
  bool pass = false;
};

struct ExperimentReport {
  std::string id;
  std::vector<Check> checks;   // checks[0] is the headline check
  std::vector<std::string> table_header;
  std::vector<std::vector<double>> table;
  bool empty = false;
  Histogram histogram;         // theorem2 only

  bool pass() const;
  /// "PASS <measured> <threshold>" for the headline check (FAIL if any check fails).
  std::string verdict() const;
};

ExperimentReport run_theorem1(const ExperimentConfig& cfg, const FieldBundle& bundle);
ExperimentReport run_theorem2(const ExperimentConfig& cfg, const FieldBundle& bundle);
ExperimentReport run_prop3(const ExperimentConfig& cfg, const FieldBundle& bundle);
ExperimentReport run_ratio_sweep(const ExperimentConfig& cfg, const FieldBundle& bundle);
ExperimentReport run_margin_sweep(const ExperimentConfig& cfg, const FieldBundle& bundle);

/// Dispatches on cfg.id; builds the canonical bundle for cfg.seed.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// report.csv: "check,measured,threshold,relation,pass" rows, then a blank
/// line and the experiment table (if any).
void write_report_csv(const ExperimentReport& report, const std::string& path);

// --- pieces reused by tests ------------------------------------------------

struct LipschitzEstimate {
  double l_est = 0.0;
  std::size_t pairs = 0;
  std::size_t attempts = 0;
};

/// Max |F(a) - F(b)| / |a - b| over random pairs whose interpolation
/// stencils lie in one label and avoid irregular gradient nodes.
LipschitzEstimate estimate_lipschitz(const FieldBundle& bundle, const EnergyParams& params, std::size_t pairs,
                                     double separation, double irregular_tolerance, std::uint64_t seed);

struct TraceCheck {
  std::size_t steps = 0;       // particle-steps examined
  std::size_t flagged = 0;     // particle-steps that changed label or touched a non-regular stencil
  std::size_t violations = 0;  // unflagged particle-steps whose energy rose above tolerance
  double max_rise = 0.0;       // largest unflagged rise
};

/// Runs `iterations` decoupled steps and checks every particle's energy
/// trace for increases. A step is flagged (exempt) when the particle changes
/// label or when its stencil before or after the step spans several labels
/// or touches an irregular node -- the same exclusion as estimate_lipschitz.
TraceCheck check_energy_traces(ParticleSet particles, const FieldBundle& bundle, const EnergyParams& params,
                               const RelaxConfig& cfg, int iterations, double tolerance, double irregular_tolerance);

/// Ratio-sweep parameters: spring constants k_occ = g sqrt(R), k_unk = g / sqrt(R)
/// realized through the weights at the base sigmas.
EnergyParams ratio_params(const EnergyParams& base, double ratio, double geo_mean);

/// Heavy-tailed synthetic photometric field: Gaussian wells at uniform
/// positions in the domain with Pareto amplitudes.
PhotometricField heavy_tailed_photometric(const Aabb& domain, std::size_t wells, double width, double alpha,
                                          double scale, std::uint64_t seed);

}  // namespace energs
