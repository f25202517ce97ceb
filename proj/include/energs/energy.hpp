#pragma once

#include "energs/geometry.hpp"
#include "energs/voxel_field.hpp"

namespace energs {

/// Field hyperparameters. Distances in meters; tau is applied to the
/// normalized depth (d_trust - delta) / tau with d and delta in meters.
struct EnergyParams {
  double w_occ = 1.0;
  double sigma_occ = 1.0;
  double w_unk = 0.25;
  double sigma_unk = 2.0;
  double lambda_free = 1.0;
  double delta = 0.5;
  double tau = 0.5;

  double occ_stiffness() const { return w_occ / (sigma_occ * sigma_occ); }
  double unk_stiffness() const { return w_unk / (sigma_unk * sigma_unk); }

  /// Throws std::invalid_argument unless every value is strictly positive
  /// and finite, and (when require_occ_dominance) the OCC spring constant
  /// exceeds the UNK one.
  void validate(bool require_occ_dominance = true) const;
};

struct EnergySample {
  double e_occ = 0.0;
  double e_unk = 0.0;
  double e_free = 0.0;  // lambda_free * softplus(...) * [FREE]
  double e_total = 0.0;
  Vec3 force;
};

/// Overflow-safe ln(1 + e^x).
double softplus(double x);
double sigmoid(double x);

/// -w exp(-d^2 / 2 sigma^2).
double welsch_energy(double d, double w, double sigma);
/// d/dd of welsch_energy: (w / sigma^2) d exp(-d^2 / 2 sigma^2), >= 0.
double welsch_coefficient(double d, double w, double sigma);

double energy_occ(double d, const EnergyParams& p);
double energy_unk(double d, const EnergyParams& p);
double energy_free(double d_trust, bool is_free, const EnergyParams& p);

/// Per-term forces from a field query.
Vec3 force_occ(const FieldQueryResult& q, const EnergyParams& p, bool occ_enabled = true);
Vec3 force_unk(const FieldQueryResult& q, const EnergyParams& p);
Vec3 force_free(const FieldQueryResult& q, const EnergyParams& p);

/// Energy and force from an existing query result. All three terms are
/// evaluated everywhere; only the barrier is masked by the FREE label.
EnergySample evaluate(const FieldQueryResult& q, const EnergyParams& p, bool occ_enabled = true);

/// Queries the fields at pos and evaluates the composite energy and force.
EnergySample total_force(const Vec3& pos, const VoxelPartition& partition, const DistanceFieldSet& fields,
                         const EnergyParams& p);

/// Closed-form Welsch force magnitude (w d / sigma^2) exp(-d^2 / 2 sigma^2).
double prop3_magnitude(double d, double w, double sigma);

/// Upper bound on any single-particle force magnitude:
/// w_occ/(sigma_occ sqrt(e)) + lambda/tau + w_unk/(sigma_unk sqrt(e)),
/// assuming unit-bounded distance gradients.
double force_magnitude_bound(const EnergyParams& p);

/// Analytic Lipschitz bound w_occ/sigma_occ^2 + w_unk/sigma_unk^2 + lambda/(4 tau^2).
double lipschitz_bound(const EnergyParams& p);

}  // namespace energs
