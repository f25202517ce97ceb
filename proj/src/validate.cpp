#include "energs/validate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

namespace energs {

// --- pipeline --------------------------------------------------------------

std::vector<SensorScan> scan_scene(const SceneDescription& scene, const ScanConfig& cfg) {
  std::vector<SensorScan> scans;
  scans.reserve(scene.sensors.size());
  for (std::size_t k = 0; k < scene.sensors.size(); ++k) {
    ScanConfig c = cfg;
    c.noise_seed = cfg.noise_seed + k;
    scans.push_back(scan(scene, scene.sensors[k], c));
  }
  return scans;
}

FieldBundle build_field(const std::vector<SensorScan>& scans, const Aabb& bounds, double voxel_size) {
  FieldBundle b;
  b.partition = carve(scans, bounds, voxel_size);
  PointCloud cloud;
  for (const auto& s : scans)
    for (const auto& r : s.rays)
      if (r.hit) cloud.push_back(r.point);
  b.fields = build_distance_fields(b.partition, cloud);
  return b;
}

FieldBundle build_field(const SceneDescription& scene, const ScanConfig& cfg, double voxel_size) {
  return build_field(scan_scene(scene, cfg), scene.domain_bounds, voxel_size);
}

FieldBundle canonical_bundle(std::uint64_t seed, double voxel_size) {
  return build_field(generate_canyon(seed), ScanConfig{}, voxel_size);
}

// --- helpers ---------------------------------------------------------------

namespace {

Grid3<std::uint8_t> dilate26(const Grid3<std::uint8_t>& m) {
  // Separable 3x3x3 box dilation.
  Grid3<std::uint8_t> cur = m;
  const Dims d = m.dims();
  for (int ax = 0; ax < 3; ++ax) {
    Grid3<std::uint8_t> next = cur;
    for (int k = 0; k < d.z; ++k)
      for (int j = 0; j < d.y; ++j)
        for (int i = 0; i < d.x; ++i) {
          if (next(i, j, k)) continue;
          Index3 lo{i, j, k}, hi{i, j, k};
          if (ax == 0) { lo.x -= 1; hi.x += 1; }
          if (ax == 1) { lo.y -= 1; hi.y += 1; }
          if (ax == 2) { lo.z -= 1; hi.z += 1; }
          if ((d.contains(lo) && cur[lo]) || (d.contains(hi) && cur[hi])) next(i, j, k) = 1;
        }
    cur = std::move(next);
  }
  return cur;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  while (true) {
    Vec3 v{n(rng), n(rng), n(rng)};
    const double l = norm(v);
    if (l > 1e-12) return v * (1.0 / l);
  }
}

// Points whose interpolation stencil never clamps: between the first and
// last voxel centers on every axis.
Aabb node_box(const GridFrame& frame) {
  const Vec3 half{frame.voxel_size / 2, frame.voxel_size / 2, frame.voxel_size / 2};
  const Aabb b = frame.bounds();
  return {b.lo + half, b.hi - half};
}

Vec3 uniform_in(const Aabb& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {box.lo.x + u(rng) * (box.hi.x - box.lo.x), box.lo.y + u(rng) * (box.hi.y - box.lo.y),
          box.lo.z + u(rng) * (box.hi.z - box.lo.z)};
}

double total_energy_at(const Vec3& p, const FieldBundle& b, const EnergyParams& params) {
  return total_force(p, b.partition, b.fields, params).e_total;
}

Check make_check(std::string name, double measured, const std::string& rel, double threshold) {
  Check c{std::move(name), measured, threshold, rel, false};
  if (rel == "<=") c.pass = measured <= threshold;
  else if (rel == "<") c.pass = measured < threshold;
  else if (rel == ">=") c.pass = measured >= threshold;
  else if (rel == ">") c.pass = measured > threshold;
  else if (rel == "==") c.pass = measured == threshold;
  else throw std::logic_error("unknown relation " + rel);
  return c;
}


// Nodes where a distance grid is not locally Eikonal (medial axes, mask
// boundaries). Mask-interior nodes (zero value, zero gradient) and sentinel
// grids are regular.
Grid3<std::uint8_t> irregular_nodes(const DistanceFieldSet& f, double tol) {
  Grid3<std::uint8_t> out(f.frame.dims, 0);
  const std::pair<const Grid3<double>*, const Grid3<Vec3>*> grids[] = {
      {&f.d_occ, &f.grad_occ}, {&f.d_trust, &f.grad_trust}, {&f.d_unk, &f.grad_unk}};
  for (const auto& [d, g] : grids) {
    for (std::size_t n = 0; n < out.size(); ++n) {
      const double v = d->at_linear(n);
      const double gn = norm(g->at_linear(n));
      if (v >= kDistanceSentinel) continue;
      if (v == 0.0 && gn == 0.0) continue;
      if (std::abs(gn - 1.0) > tol) out.at_linear(n) = 1;
    }
  }
  return out;
}

// Stencil of x lies in one label and avoids irregular nodes.
bool regular_stencil(const FieldBundle& bundle, const Grid3<std::uint8_t>& bad, const Vec3& x) {
  const auto st = stencil_nodes(bundle.partition.frame, x);
  const Label l = bundle.partition.labels.at_linear(st[0]);
  for (std::size_t n : st)
    if (bundle.partition.labels.at_linear(n) != l || bad.at_linear(n)) return false;
  return bundle.partition.label_at(x) == l;
}

}  // namespace

Grid3<int> label_boundary_distance(const VoxelPartition& partition, int cap) {
  const Dims d = partition.frame.dims;
  Grid3<int> out(d, cap);
  for (Label l : {Label::Occ, Label::Free, Label::Unk}) {
    Grid3<std::uint8_t> other(d, 0);
    for (std::size_t n = 0; n < other.size(); ++n) other.at_linear(n) = partition.labels.at_linear(n) != l;
    for (int r = 1; r <= cap; ++r) {
      other = dilate26(other);
      for (std::size_t n = 0; n < other.size(); ++n) {
        if (partition.labels.at_linear(n) == l && other.at_linear(n) && out.at_linear(n) == cap)
          out.at_linear(n) = std::min(out.at_linear(n), r);
      }
    }
  }
  return out;
}

// --- gradient check --------------------------------------------------------

GradCheckResult gradient_check(const FieldBundle& bundle, const EnergyParams& params, const GradCheckConfig& cfg) {
  const auto& frame = bundle.partition.frame;
  const int margin = cfg.min_boundary_voxels;
  const Grid3<int> bd = label_boundary_distance(bundle.partition, margin);
  std::vector<std::size_t> cells;
  const Dims d = frame.dims;
  for (int k = margin; k < d.z - margin; ++k)
    for (int j = margin; j < d.y - margin; ++j)
      for (int i = margin; i < d.x - margin; ++i)
        if (bd(i, j, k) >= margin) cells.push_back(d.linear(i, j, k));
  if (cells.empty()) throw std::invalid_argument("no interior voxels far enough from label boundaries");

  GradCheckResult r;
  r.positions = sample_in_cells(frame, cells, cfg.points, cfg.seed);
  const double h = cfg.step_factor * frame.voxel_size;
  for (const Vec3& p : r.positions) {
    const Vec3 f = total_force(p, bundle.partition, bundle.fields, params).force;
    Vec3 fd;
    for (int a = 0; a < 3; ++a) {
      Vec3 hi = p, lo = p;
      hi[a] += h;
      lo[a] -= h;
      fd[a] = -(total_energy_at(hi, bundle, params) - total_energy_at(lo, bundle, params)) / (2.0 * h);
    }
    const double err = norm(f - fd) / std::max(norm(fd), 1e-12);
    r.rel_error.push_back(err);
    if (!(err <= cfg.max_rel_error)) ++r.failures;
  }
  if (!r.rel_error.empty()) {
    r.max_rel_error = *std::max_element(r.rel_error.begin(), r.rel_error.end());
    r.p50_rel_error = percentile(r.rel_error, 50.0);
  }
  r.pass = r.failures == 0;
  return r;
}

// --- config / report -------------------------------------------------------

void ExperimentConfig::validate() const {
  static const char* ids[] = {"theorem1", "theorem2", "prop3", "ratio_sweep", "margin_sweep"};
  if (std::find(std::begin(ids), std::end(ids), id) == std::end(ids))
    throw std::invalid_argument("unknown experiment id: " + id);
  if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel_size must be positive");
  if (t1_max_iterations < 0 || t1_control_iterations < 0 || t2_trace_iterations < 0 || p3_grid_iterations < 0 ||
      rs_iterations < 0 || ms_iterations < 0)
    throw std::invalid_argument("iteration counts must be non-negative");
  if (t1_particles == 0 || t2_pairs == 0 || t2_trace_particles == 0 || p3_grid_particles == 0 || rs_particles == 0 ||
      ms_particles == 0)
    throw std::invalid_argument("particle and pair counts must be positive");
  if (rs_ratios.empty() || ms_margins.empty()) throw std::invalid_argument("sweep lists must not be empty");
  if (ms_t_prune < 1) throw std::invalid_argument("ms_t_prune must be >= 1");
  if (!(t2_pair_distance_factor > 0.0)) throw std::invalid_argument("t2_pair_distance_factor must be positive");
  if (p3_sigma_factors.size() < 2) throw std::invalid_argument("p3_sigma_factors needs at least two entries");
  if (t2_histogram_bins < 1) throw std::invalid_argument("t2_histogram_bins must be >= 1");
}

bool ExperimentReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string ExperimentReport::verdict() const {
  char buf[128];
  const double m = checks.empty() ? 0.0 : checks.front().measured;
  const double t = checks.empty() ? 0.0 : checks.front().threshold;
  std::snprintf(buf, sizeof buf, "%s %.9g %.9g", pass() ? "PASS" : "FAIL", m, t);
  return buf;
}

void write_report_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "check,measured,threshold,relation,pass\n";
  char buf[512];
  for (const auto& c : report.checks) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%s,%d\n", c.name.c_str(), c.measured, c.threshold,
                  c.relation.c_str(), c.pass ? 1 : 0);
    out << buf;
  }
  if (report.empty) out << "empty,1,0,==,1\n";
  if (report.table_header.empty()) return;
  out << "\n";
  for (std::size_t i = 0; i < report.table_header.size(); ++i) out << (i ? "," : "") << report.table_header[i];
  out << "\n";
  for (const auto& row : report.table) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.17g", i ? "," : "", row[i]);
      out << buf;
    }
    out << "\n";
  }
}

// --- theorem 1 -------------------------------------------------------------

namespace {

struct ExitRun {
  std::vector<int> exit_iter;  // -1 = never left FREE
};

// Steps every particle until its containing voxel is no longer FREE; exited
// particles are retired from the run.
template <typename Step>
ExitRun run_until_exit(ParticleSet ps, const FieldBundle& bundle, int max_iterations, Step&& step) {
  ExitRun out;
  out.exit_iter.assign(ps.size(), -1);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (bundle.partition.label_at(ps.positions[i]) != Label::Free) {
      out.exit_iter[i] = 0;
      ps.alive[i] = 0;
    }
  }
  for (int t = 0; t < max_iterations && ps.alive_count() > 0; ++t) {
    step(ps);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (ps.alive[i] && bundle.partition.label_at(ps.positions[i]) != Label::Free) {
        out.exit_iter[i] = t + 1;
        ps.alive[i] = 0;
      }
    }
  }
  return out;
}

double exited_fraction(const ExitRun& r) {
  if (r.exit_iter.empty()) return 1.0;
  const auto n = std::count_if(r.exit_iter.begin(), r.exit_iter.end(), [](int t) { return t >= 0; });
  return static_cast<double>(n) / static_cast<double>(r.exit_iter.size());
}

}  // namespace

ExperimentReport run_theorem1(const ExperimentConfig& cfg, const FieldBundle& bundle) {
  cfg.validate();
  if (bundle.partition.counts().free == 0) throw std::invalid_argument("scene has no FREE voxels");
  ExperimentReport rep;
  rep.id = "theorem1";
  if (cfg.t1_particles == 0) {
    rep.empty = true;
    rep.checks.push_back(make_check("exit_fraction", 1.0, ">=", cfg.t1_min_exit_fraction));
    return rep;
  }

  ParticleSet ps = ParticleSet::from_positions(sample_in_labels(bundle, {Label::Free}, cfg.t1_particles, cfg.seed));
  RelaxConfig rc;
  rc.prune_enabled = false;
  const ExitRun main = run_until_exit(ps, bundle, cfg.t1_max_iterations,
                                      [&](ParticleSet& p) { relax_step(p, bundle, cfg.params, rc); });
  const double frac = exited_fraction(main);

  // Control: no free-space barrier, joint mode, photometric attractor in FREE.
  if (bundle.partition.label_at(cfg.t1_control_well.center) != Label::Free)
    throw std::invalid_argument("control well center is not in FREE");
  EnergyParams no_barrier = cfg.params;
  no_barrier.lambda_free = 0.0;
  RelaxConfig jc;
  jc.prune_enabled = false;
  jc.mode = RelaxMode::Joint;
  jc.joint_lambda = cfg.t1_control_joint_lambda;
  jc.photometric = PhotometricField{{cfg.t1_control_well}};
  const ExitRun control = run_until_exit(ps, bundle, cfg.t1_control_iterations,
                                         [&](ParticleSet& p) { joint_step(p, bundle, no_barrier, jc); });
  const double trapped = 1.0 - exited_fraction(control);

  rep.checks.push_back(make_check("exit_fraction", frac, ">=", cfg.t1_min_exit_fraction));
  rep.checks.push_back(make_check("control_trapped_fraction", trapped, ">", cfg.t1_min_control_trapped));

  std::vector<double> iters;
  for (int t : main.exit_iter)
    if (t >= 0) iters.push_back(t);
  rep.table_header = {"exit_iter_p50", "exit_iter_p95", "exit_iter_max", "particles", "max_iterations"};
  rep.table.push_back({percentile(iters, 50), percentile(iters, 95),
                       iters.empty() ? 0.0 : *std::max_element(iters.begin(), iters.end()),
                       static_cast<double>(cfg.t1_particles), static_cast<double>(cfg.t1_max_iterations)});
  return rep;
}

// --- theorem 2 -------------------------------------------------------------

LipschitzEstimate estimate_lipschitz(const FieldBundle& bundle, const EnergyParams& params, std::size_t pairs,
                                     double separation, double irregular_tolerance, std::uint64_t seed) {
  const auto& frame = bundle.partition.frame;
  const Grid3<std::uint8_t> bad = irregular_nodes(bundle.fields, irregular_tolerance);
  const Aabb box = node_box(frame);
  auto rng = make_rng(seed, 2);
  LipschitzEstimate est;
  const std::size_t max_attempts = std::max<std::size_t>(pairs * 1000, 1000);
  while (est.pairs < pairs && est.attempts < max_attempts) {
    ++est.attempts;
    const Vec3 a = uniform_in(box, rng);
    const Vec3 b = a + random_unit(rng) * separation;
    if (!box.contains(b)) continue;
    if (!regular_stencil(bundle, bad, a) || !regular_stencil(bundle, bad, b) ||
        bundle.partition.label_at(a) != bundle.partition.label_at(b))
      continue;
    const Vec3 fa = total_force(a, bundle.partition, bundle.fields, params).force;
    const Vec3 fb = total_force(b, bundle.partition, bundle.fields, params).force;
    est.l_est = std::max(est.l_est, norm(fa - fb) / norm(a - b));
    ++est.pairs;
  }
  return est;
}

TraceCheck check_energy_traces(ParticleSet ps, const FieldBundle& bundle, const EnergyParams& params,
                              const RelaxConfig& cfg, int iterations, double tolerance,
                              double irregular_tolerance) {
  const Grid3<std::uint8_t> bad = irregular_nodes(bundle.fields, irregular_tolerance);
  auto regular = [&](const Vec3& x) { return regular_stencil(bundle, bad, x); };
  TraceCheck out;
  std::vector<EnergySample> before = evaluate_all(ps, bundle, params);
  for (int t = 0; t < iterations; ++t) {
    std::vector<Label> labels(ps.size());
    std::vector<char> was_regular(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      labels[i] = bundle.partition.label_at(ps.positions[i]);
      was_regular[i] = regular(ps.positions[i]);
    }
    relax_step(ps, bundle, params, cfg);
    std::vector<EnergySample> after = evaluate_all(ps, bundle, params);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (!ps.alive[i]) continue;
      ++out.steps;
      if (bundle.partition.label_at(ps.positions[i]) != labels[i] || !was_regular[i] || !regular(ps.positions[i])) {
        ++out.flagged;
        continue;
      }
      const double rise = after[i].e_total - before[i].e_total;
      out.max_rise = std::max(out.max_rise, rise);
      if (rise > tolerance) ++out.violations;
    }
    before = std::move(after);
  }
  return out;
}

PhotometricField heavy_tailed_photometric(const Aabb& domain, std::size_t wells, double width, double alpha,
                                          double scale, std::uint64_t seed) {
  auto rng = make_rng(seed, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PhotometricField f;
  for (std::size_t k = 0; k < wells; ++k) {
    PhotometricWell w;
    w.center = uniform_in(domain, rng);
    // Pareto(alpha) with unit minimum by inversion.
    w.amplitude = scale * std::pow(1.0 - u(rng), -1.0 / alpha);
    w.width = width;
    f.wells.push_back(w);
  }
  return f;
}

ExperimentReport run_theorem2(const ExperimentConfig& cfg, const FieldBundle& bundle) {
  cfg.validate();
  ExperimentReport rep;
  rep.id = "theorem2";
  const auto& frame = bundle.partition.frame;
  const double vs = frame.voxel_size;

  const LipschitzEstimate est = estimate_lipschitz(bundle, cfg.params, cfg.t2_pairs, cfg.t2_pair_distance_factor * vs,
                                                   cfg.t2_irregular_tolerance, cfg.seed);
  const double bound = cfg.t2_slack * lipschitz_bound(cfg.params);
  rep.checks.push_back(make_check("lipschitz_estimate", est.l_est, "<=", bound));
  rep.checks.push_back(make_check("lipschitz_pairs", static_cast<double>(est.pairs), ">=",
                                  static_cast<double>(cfg.t2_pairs)));

  // Energy traces with step scale inside the descent-lemma range. Each
  // particle's energy must not rise except on steps where that particle
  // changes containing-voxel label.
  ParticleSet ps = init_particles(InitKind::UniformInDomain, bundle, cfg.t2_trace_particles, cfg.seed);
  RelaxConfig rc;
  rc.prune_enabled = false;
  rc.eta_mu = est.l_est > 0.0 ? std::min(1.0, 1.0 / est.l_est) : 1.0;
  const TraceCheck trace = check_energy_traces(ps, bundle, cfg.params, rc, cfg.t2_trace_iterations,
                                               cfg.t2_trace_tolerance, cfg.t2_irregular_tolerance);
  rep.checks.push_back(make_check("unflagged_energy_increases", static_cast<double>(trace.violations), "==", 0.0));

  // Geometric vs heavy-tailed photometric gradient norms at the same positions.
  const auto samples = evaluate_all(ps, bundle, cfg.params);
  std::vector<Vec3> forces(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) forces[i] = samples[i].force;
  const PhotometricField photo =
      heavy_tailed_photometric(frame.bounds(), cfg.t2_photo_wells, cfg.t2_photo_width, cfg.t2_photo_pareto_alpha,
                               cfg.t2_photo_amplitude_scale, cfg.seed);
  double geo_sum = 0.0, photo_sum = 0.0, photo_max = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    geo_sum += norm(forces[i]);
    const double g = norm(photo.gradient(ps.positions[i]));
    photo_sum += g;
    photo_max = std::max(photo_max, g);
  }
  const double n = std::max<double>(1.0, static_cast<double>(ps.size()));
  rep.checks.push_back(make_check("geometric_mean_force_below_photometric", geo_sum / n, "<", photo_sum / n));
  rep.histogram = force_norm_histogram(ps, forces, cfg.t2_histogram_bins);

  rep.checks.push_back(make_check("geometric_max_force", photo_max > 0.0 ? rep.histogram.max : 0.0, "<=",
                                  force_magnitude_bound(cfg.params)));

  rep.table_header = {"l_est", "bound", "pairs", "attempts", "eta_mu", "trace_steps", "flagged_steps",
                      "geo_mean_force", "photo_mean_grad", "photo_max_grad", "force_bound"};
  rep.table.push_back({est.l_est, bound, static_cast<double>(est.pairs), static_cast<double>(est.attempts), rc.eta_mu,
                       static_cast<double>(trace.steps), static_cast<double>(trace.flagged), geo_sum / n, photo_sum / n,
                       photo_max, force_magnitude_bound(cfg.params)});
  return rep;
}

// --- proposition 3 ---------------------------------------------------------

ExperimentReport run_prop3(const ExperimentConfig& cfg, const FieldBundle& bundle) {
  cfg.validate();
  ExperimentReport rep;
  rep.id = "prop3";
  std::vector<double> mags;
  rep.table_header = {"sigma", "magnitude"};
  for (double f : cfg.p3_sigma_factors) {
    const double sigma = f * cfg.p3_d;
    mags.push_back(prop3_magnitude(cfg.p3_d, cfg.p3_w, sigma));
    rep.table.push_back({sigma, mags.back()});
  }
  std::size_t non_decreasing = 0;
  for (std::size_t i = 0; i + 1 < mags.size(); ++i)
    if (!(mags[i + 1] < mags[i])) ++non_decreasing;
  const double final_ratio = mags.front() > 0.0 ? mags.back() / mags.front() : 1.0;
  const std::size_t m = mags.size();
  const double tail = mags[m - 2] > 0.0 ? mags[m - 1] / mags[m - 2] : 0.0;

  // On-grid: particles deep in UNK, far from every LiDAR point.
  const auto& part = bundle.partition;
  const int deep = cfg.p3_deep_unk_voxels;
  const Grid3<int> bd = label_boundary_distance(part, deep);
  std::vector<std::size_t> cells;
  for (std::size_t c = 0; c < part.labels.size(); ++c) {
    if (part.labels.at_linear(c) == Label::Unk && bd.at_linear(c) >= deep &&
        bundle.fields.d_occ.at_linear(c) >= cfg.p3_deep_occ_sigmas * cfg.params.sigma_occ)
      cells.push_back(c);
  }
  EnergyParams wide = cfg.params;
  wide.sigma_unk = cfg.p3_grid_sigma_unk;
  double max_move = std::numeric_limits<double>::infinity();
  if (!cells.empty()) {
    ParticleSet ps =
        ParticleSet::from_positions(sample_in_cells(part.frame, cells, cfg.p3_grid_particles, cfg.seed));
    RelaxConfig rc;
    rc.prune_enabled = false;
    rc.iterations = cfg.p3_grid_iterations;
    const RunResult r = run(ps, bundle, wide, rc);
    max_move = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i)
      max_move = std::max(max_move, norm(r.particles.positions[i] - ps.positions[i]));
  } else {
    rep.empty = true;
  }

  rep.checks.push_back(make_check("final_over_initial", final_ratio, "<", cfg.p3_max_final_ratio));
  rep.checks.push_back(make_check("non_decreasing_steps", static_cast<double>(non_decreasing), "==", 0.0));
  rep.checks.push_back(make_check("tail_ratio_min", tail, ">=", cfg.p3_tail_ratio_lo));
  rep.checks.push_back(make_check("tail_ratio_max", tail, "<=", cfg.p3_tail_ratio_hi));
  rep.checks.push_back(
      make_check("unk_max_move_m", max_move, "<", cfg.p3_max_move_factor * part.frame.voxel_size));
  rep.checks.push_back(make_check("unk_cells", static_cast<double>(cells.size()), ">", 0.0));
  return rep;
}

// --- sweeps ----------------------------------------------------------------

EnergyParams ratio_params(const EnergyParams& base, double ratio, double geo_mean) {
  if (!(ratio > 0.0) || !(geo_mean > 0.0)) throw std::invalid_argument("ratio and geometric mean must be positive");
  EnergyParams p = base;
  p.w_occ = geo_mean * std::sqrt(ratio) * base.sigma_occ * base.sigma_occ;
  p.w_unk = geo_mean / std::sqrt(ratio) * base.sigma_unk * base.sigma_unk;
  p.validate(false);
  return p;
}

namespace {

std::vector<double> metrics_row(const MetricsReport& m) {
  return {m.leak_pct, m.occcov_pct, m.margin_m, m.thick_m, static_cast<double>(m.num_alive), m.force.mean};
}

}  // namespace

ExperimentReport run_ratio_sweep(const ExperimentConfig& cfg, const FieldBundle& bundle) {
  cfg.validate();
  ExperimentReport rep;
  rep.id = "ratio_sweep";
  rep.table_header = {"ratio", "w_occ", "w_unk", "leak_pct", "occcov_pct", "margin_m", "thick_m", "num_alive",
                      "force_mean"};
  const ParticleSet init =
      ParticleSet::from_positions(sample_in_labels(bundle, {Label::Free, Label::Occ}, cfg.rs_particles, cfg.seed));
  auto occcov_for = [&](double ratio) {
    const EnergyParams p = ratio_params(cfg.params, ratio, cfg.rs_geo_mean);
    RelaxConfig rc;
    rc.iterations = cfg.rs_iterations;
    const RunResult r = run(init, bundle, p, rc);
    const MetricsReport m = compute_metrics(r.particles, bundle, p);
    std::vector<double> row{ratio, p.w_occ, p.w_unk};
    for (double v : metrics_row(m)) row.push_back(v);
    rep.table.push_back(row);
    return m.occcov_pct;
  };
  double base = 0.0, low = 0.0, high = 0.0;
  bool have_base = false, have_low = false, have_high = false;
  for (double ratio : cfg.rs_ratios) {
    const double oc = occcov_for(ratio);
    if (ratio == cfg.rs_baseline) { base = oc; have_base = true; }
    if (ratio == cfg.rs_low) { low = oc; have_low = true; }
    if (ratio == cfg.rs_high) { high = oc; have_high = true; }
  }
  if (!have_base) base = occcov_for(cfg.rs_baseline);
  if (!have_low) low = occcov_for(cfg.rs_low);
  if (!have_high) high = occcov_for(cfg.rs_high);
  rep.checks.push_back(make_check("occcov_baseline_minus_low", base - low, ">", 0.0));
  const double rel = base > 0.0 ? std::abs(high - base) / base : std::numeric_limits<double>::infinity();
  rep.checks.push_back(make_check("occcov_high_rel_dev", rel, "<=", cfg.rs_high_band));
  return rep;
}

ExperimentReport run_margin_sweep(const ExperimentConfig& cfg, const FieldBundle& bundle) {
  cfg.validate();
  ExperimentReport rep;
  rep.id = "margin_sweep";
  rep.table_header = {"tau_margin", "pruned_total", "leak_pct", "occcov_pct", "margin_m", "thick_m", "num_alive",
                      "force_mean"};
  const ParticleSet init = init_particles(InitKind::UniformInFree, bundle, cfg.ms_particles, cfg.seed);
  auto leak_for = [&](double tau_margin, bool prune) {
    RelaxConfig rc;
    rc.iterations = cfg.ms_iterations;
    rc.t_prune = cfg.ms_t_prune;
    rc.tau_margin = prune ? tau_margin : 0.0;
    rc.prune_enabled = prune;
    const RunResult r = run(init, bundle, cfg.params, rc);
    std::size_t pruned = 0;
    for (const auto& row : r.log.rows) pruned += row.pruned;
    const MetricsReport m = compute_metrics(r.particles, bundle, cfg.params);
    std::vector<double> row{prune ? tau_margin : -1.0, static_cast<double>(pruned)};
    for (double v : metrics_row(m)) row.push_back(v);
    rep.table.push_back(row);
    return m.leak_pct;
  };
  double worst = 0.0;
  for (double tm : cfg.ms_margins) worst = std::max(worst, leak_for(tm, true));
  const double no_prune = leak_for(0.0, false);
  rep.checks.push_back(make_check("max_leak_pct", worst, "<=", cfg.ms_max_leak_pct));
  rep.checks.push_back(make_check("leak_pct_no_prune", no_prune, "<=", cfg.ms_max_leak_no_prune_pct));
  return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const FieldBundle bundle = canonical_bundle(cfg.seed, cfg.voxel_size);
  if (cfg.id == "theorem1") return run_theorem1(cfg, bundle);
  if (cfg.id == "theorem2") return run_theorem2(cfg, bundle);
  if (cfg.id == "prop3") return run_prop3(cfg, bundle);
  if (cfg.id == "ratio_sweep") return run_ratio_sweep(cfg, bundle);
  return run_margin_sweep(cfg, bundle);
}

}  // namespace energs
