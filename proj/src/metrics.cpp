#include "energs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace energs {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

MetricsReport compute_metrics(const ParticleSet& particles, const FieldBundle& bundle,
                              std::span<const Vec3> forces) {
  if (!forces.empty() && forces.size() != particles.size()) {
    throw std::invalid_argument("force count does not match particle count");
  }
  const auto& part = bundle.partition;
  const auto& frame = part.frame;
  MetricsReport r;

  const LabelCounts counts = part.counts();
  r.occcov_undefined = counts.occ == 0;
  const Grid3<double> d_free = edt(part, {Label::Free});

  Grid3<std::uint8_t> covered(frame.dims, 0);
  std::size_t in_free = 0, in_occ = 0, in_margin = 0;
  double margin_sum = 0.0, thick_sum = 0.0;
  std::vector<double> norms;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    if (!particles.alive[i]) continue;
    ++r.num_alive;
    const Vec3& p = particles.positions[i];
    const Index3 cell = frame.containing_clamped(p);
    const Label l = part.at(cell);
    if (l == Label::Free) {
      ++in_free;
    } else {
      if (counts.free > 0) {
        margin_sum += d_free[cell];
        ++in_margin;
      }
      if (l == Label::Occ) {
        covered[cell] = 1;
        thick_sum += interpolate(bundle.fields.d_occ, frame, p);
        ++in_occ;
      }
    }
    if (!forces.empty()) norms.push_back(norm(forces[i]));
  }

  r.empty = r.num_alive == 0;
  if (r.empty) {
    r.margin_undefined = r.thick_undefined = true;
    return r;
  }
  r.leak_pct = 100.0 * static_cast<double>(in_free) / static_cast<double>(r.num_alive);
  if (!r.occcov_undefined) {
    std::size_t hit = 0;
    for (std::size_t c = 0; c < covered.size(); ++c) hit += covered.at_linear(c);
    r.occcov_pct = 100.0 * static_cast<double>(hit) / static_cast<double>(counts.occ);
  }
  r.margin_undefined = in_margin == 0;
  if (!r.margin_undefined) r.margin_m = margin_sum / static_cast<double>(in_margin);
  r.thick_undefined = in_occ == 0;
  if (!r.thick_undefined) r.thick_m = 2.0 * thick_sum / static_cast<double>(in_occ);

  if (!norms.empty()) {
    double sum = 0.0;
    for (double n : norms) sum += n;
    r.force.mean = sum / static_cast<double>(norms.size());
    r.force.max = *std::max_element(norms.begin(), norms.end());
    r.force.p50 = percentile(norms, 50.0);
    r.force.p95 = percentile(norms, 95.0);
  }
  return r;
}

MetricsReport compute_metrics(const ParticleSet& particles, const FieldBundle& bundle, const EnergyParams& params) {
  const auto samples = evaluate_all(particles, bundle, params);
  std::vector<Vec3> forces(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) forces[i] = samples[i].force;
  return compute_metrics(particles, bundle, forces);
}

Histogram force_norm_histogram(const ParticleSet& particles, std::span<const Vec3> forces, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  if (forces.size() != particles.size()) throw std::invalid_argument("force count does not match particle count");
  std::vector<double> norms;
  for (std::size_t i = 0; i < particles.size(); ++i)
    if (particles.alive[i]) norms.push_back(norm(forces[i]));

  Histogram h;
  h.max = norms.empty() ? 0.0 : *std::max_element(norms.begin(), norms.end());
  h.count.assign(static_cast<std::size_t>(bins), 0);
  h.bin_left.resize(static_cast<std::size_t>(bins));
  const double width = h.max / bins;
  for (int b = 0; b < bins; ++b) h.bin_left[static_cast<std::size_t>(b)] = width * b;
  for (double n : norms) {
    int b = width > 0.0 ? static_cast<int>(n / width) : 0;
    b = std::clamp(b, 0, bins - 1);
    ++h.count[static_cast<std::size_t>(b)];
  }
  return h;
}

std::string metrics_csv_row(const MetricsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%zu,%.17g,%.17g,%.17g,%.17g", r.leak_pct, r.occcov_pct,
                r.margin_m, r.thick_m, r.num_alive, r.force.mean, r.force.p50, r.force.p95, r.force.max);
  return buf;
}

void write_metrics_csv(const MetricsReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kMetricsHeader << "\n" << metrics_csv_row(r) << "\n";
}

void write_histogram_csv(const Histogram& h, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "bin_left,count\n";
  char buf[128];
  for (std::size_t b = 0; b < h.count.size(); ++b) {
    std::snprintf(buf, sizeof buf, "%.17g,%zu\n", h.bin_left[b], h.count[b]);
    out << buf;
  }
}

}  // namespace energs
