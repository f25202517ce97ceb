#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "energs/energy.hpp"
#include "energs/geometry.hpp"
#include "energs/voxel_field.hpp"

namespace energs {

/// Isotropic Gaussian well of the synthetic photometric loss
/// L(mu) = -sum_k a_k exp(-|mu - c_k|^2 / 2 s_k^2).
struct PhotometricWell {
  Vec3 center;
  double amplitude = 1.0;
  double width = 1.0;
};

/// Stand-in for the photometric gradient channel: a sum of Gaussian wells
/// with an analytic gradient.
struct PhotometricField {
  std::vector<PhotometricWell> wells;

  double loss(const Vec3& pos) const;
  Vec3 gradient(const Vec3& pos) const;
  /// Appearance target sampled by the payload channel (= -loss).
  double appearance(const Vec3& pos) const { return -loss(pos); }
};

std::string photometric_to_json(const PhotometricField& field);
PhotometricField photometric_from_json(const std::string& text);
PhotometricField load_photometric(const std::string& path);

enum class RelaxMode { Decoupled, Joint };

struct RelaxConfig {
  double eta_mu = 1.0;           // meters per unit force
  double max_step_factor = 0.5;  // step clip as a fraction of voxel_size
  int t_prune = 100;
  bool prune_enabled = true;
  double tau_margin = 0.5;       // meters
  int iterations = 100;
  RelaxMode mode = RelaxMode::Decoupled;
  double joint_lambda = 1.0;
  double eta_app = 0.1;          // payload step size
  std::optional<PhotometricField> photometric;

  void validate() const;
};

struct ParticleSet {
  std::vector<Vec3> positions;
  std::vector<std::uint8_t> alive;
  std::vector<double> payload;
  std::vector<std::size_t> tracked_ids;

  static ParticleSet from_positions(std::vector<Vec3> positions);
  std::size_t size() const { return positions.size(); }
  std::size_t alive_count() const;
};

struct StepStats {
  double total_energy = 0.0;  // summed over alive particles, before the step
  double mean_force = 0.0;
  double max_force = 0.0;
  std::size_t alive = 0;
  std::size_t frozen = 0;        // particles with a non-finite force this step
  bool label_crossing = false;   // some particle changed containing-voxel label
};

/// Position update used by the decoupled engine: mu += clip(eta * F_geom).
/// The photometric gradient is masked to zero on positions; only the payload
/// channel sees it.
StepStats relax_step(ParticleSet& particles, const FieldBundle& bundle, const EnergyParams& params,
                     const RelaxConfig& cfg);

/// Joint ablation: mu -= clip(eta * (grad L_photo + joint_lambda * grad E_geom)).
/// Throws std::invalid_argument when no photometric field is configured.
StepStats joint_step(ParticleSet& particles, const FieldBundle& bundle, const EnergyParams& params,
                     const RelaxConfig& cfg);

/// Kills alive particles whose interpolated d_trust is strictly above
/// tau_margin. Returns the number pruned.
std::size_t prune_free(ParticleSet& particles, const FieldBundle& bundle, const RelaxConfig& cfg);

struct LogRow {
  int iter = 0;
  double total_energy = 0.0;
  double mean_force = 0.0;
  double max_force = 0.0;
  std::size_t alive = 0;
  std::size_t pruned = 0;
  std::size_t frozen = 0;
  bool label_crossing = false;  // the step taken from this row crossed a label boundary
};

struct TrackedSample {
  int iter = 0;
  std::size_t id = 0;
  Vec3 pos;
  Label region = Label::Unk;
};

struct TrajectoryLog {
  std::vector<LogRow> rows;  // rows[t] = state before step t; the last row is the final state
  std::vector<TrackedSample> tracked;
};

struct RunResult {
  ParticleSet particles;
  TrajectoryLog log;
};

/// Runs `iterations` steps, pruning after every t_prune-th step when enabled.
RunResult run(ParticleSet particles, const FieldBundle& bundle, const EnergyParams& params,
              const RelaxConfig& cfg);

/// Energy and force of every alive particle (dead entries are zero).
std::vector<EnergySample> evaluate_all(const ParticleSet& particles, const FieldBundle& bundle,
                                       const EnergyParams& params);

void write_trajectory_csv(const TrajectoryLog& log, const std::string& path);
void write_tracked_csv(const TrajectoryLog& log, const std::string& path);

/// Particle file: CSV "id,x,y,z,alive,payload".
void save_particles(const ParticleSet& particles, const std::string& path);
ParticleSet load_particles(const std::string& path);

// --- initialization --------------------------------------------------------

enum class InitKind { OnPoints, UniformInFree, UniformInDomain };

/// on-points: centers of voxels whose d_occ is zero (voxels holding LiDAR
/// points), drawn without replacement when n is smaller than their count.
/// uniform-in-free: rejection sampling on voxel labels. uniform-in-domain:
/// uniform over the grid box.
ParticleSet init_particles(InitKind kind, const FieldBundle& bundle, std::size_t n, std::uint64_t seed);

/// Uniform positions over the union of the given voxels (linear indices).
std::vector<Vec3> sample_in_cells(const GridFrame& frame, const std::vector<std::size_t>& cells, std::size_t n,
                                  std::uint64_t seed);

/// Uniform positions whose containing voxel has one of the given labels.
std::vector<Vec3> sample_in_labels(const FieldBundle& bundle, std::initializer_list<Label> labels, std::size_t n,
                                   std::uint64_t seed);

}  // namespace energs
