#include "energs/energy.hpp"

#include <cmath>
#include <stdexcept>

namespace energs {

void EnergyParams::validate(bool require_occ_dominance) const {
  for (double v : {w_occ, sigma_occ, w_unk, sigma_unk, lambda_free, delta, tau}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("energy parameters must be positive and finite");
  }
  if (require_occ_dominance && !(unk_stiffness() < occ_stiffness())) {
    throw std::invalid_argument("w_unk/sigma_unk^2 must be below w_occ/sigma_occ^2");
  }
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double welsch_energy(double d, double w, double sigma) { return -w * std::exp(-(d * d) / (2.0 * sigma * sigma)); }

double welsch_coefficient(double d, double w, double sigma) {
  return (w / (sigma * sigma)) * d * std::exp(-(d * d) / (2.0 * sigma * sigma));
}

double energy_occ(double d, const EnergyParams& p) { return welsch_energy(d, p.w_occ, p.sigma_occ); }
double energy_unk(double d, const EnergyParams& p) { return welsch_energy(d, p.w_unk, p.sigma_unk); }

double energy_free(double d_trust, bool is_free, const EnergyParams& p) {
  if (!is_free) return 0.0;
  return p.lambda_free * softplus((d_trust - p.delta) / p.tau);
}

Vec3 force_occ(const FieldQueryResult& q, const EnergyParams& p, bool occ_enabled) {
  if (!occ_enabled || q.d_occ >= kDistanceSentinel) return {};
  return q.grad_occ * -welsch_coefficient(q.d_occ, p.w_occ, p.sigma_occ);
}

Vec3 force_unk(const FieldQueryResult& q, const EnergyParams& p) {
  if (q.d_unk >= kDistanceSentinel) return {};
  return q.grad_unk * -welsch_coefficient(q.d_unk, p.w_unk, p.sigma_unk);
}

Vec3 force_free(const FieldQueryResult& q, const EnergyParams& p) {
  if (q.label != Label::Free) return {};
  const double phi_prime = sigmoid((q.d_trust - p.delta) / p.tau) / p.tau;
  return q.grad_trust * -(p.lambda_free * phi_prime);
}

EnergySample evaluate(const FieldQueryResult& q, const EnergyParams& p, bool occ_enabled) {
  EnergySample s;
  s.e_occ = occ_enabled ? energy_occ(q.d_occ, p) : 0.0;
  s.e_unk = energy_unk(q.d_unk, p);
  s.e_free = energy_free(q.d_trust, q.label == Label::Free, p);
  s.e_total = s.e_occ + s.e_unk + s.e_free;
  s.force = force_occ(q, p, occ_enabled) + force_unk(q, p) + force_free(q, p);
  return s;
}

EnergySample total_force(const Vec3& pos, const VoxelPartition& partition, const DistanceFieldSet& fields,
                         const EnergyParams& p) {
  if (!is_finite(pos)) throw std::invalid_argument("position must be finite");
  return evaluate(query(fields, partition, pos), p, fields.occ_enabled);
}

double prop3_magnitude(double d, double w, double sigma) {
  if (!(d >= 0.0) || !(sigma > 0.0)) throw std::invalid_argument("prop3_magnitude needs d >= 0 and sigma > 0");
  return welsch_coefficient(d, w, sigma);
}

double force_magnitude_bound(const EnergyParams& p) {
  const double root_e = std::sqrt(std::exp(1.0));
  return p.w_occ / (p.sigma_occ * root_e) + p.lambda_free / p.tau + p.w_unk / (p.sigma_unk * root_e);
}

double lipschitz_bound(const EnergyParams& p) {
  return p.occ_stiffness() + p.unk_stiffness() + p.lambda_free / (4.0 * p.tau * p.tau);
}

}  // namespace energs
