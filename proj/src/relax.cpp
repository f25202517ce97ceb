#include "energs/relax.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace energs {

// --- photometric channel ---------------------------------------------------

double PhotometricField::loss(const Vec3& pos) const {
  double l = 0.0;
  for (const auto& w : wells) {
    const Vec3 r = pos - w.center;
    l -= w.amplitude * std::exp(-dot(r, r) / (2.0 * w.width * w.width));
  }
  return l;
}

Vec3 PhotometricField::gradient(const Vec3& pos) const {
  Vec3 g;
  for (const auto& w : wells) {
    const Vec3 r = pos - w.center;
    const double s2 = w.width * w.width;
    g += r * (w.amplitude / s2 * std::exp(-dot(r, r) / (2.0 * s2)));
  }
  return g;
}

std::string photometric_to_json(const PhotometricField& field) {
  nlohmann::json j;
  j["wells"] = nlohmann::json::array();
  for (const auto& w : field.wells) {
    j["wells"].push_back({{"center", {w.center.x, w.center.y, w.center.z}},
                          {"amplitude", w.amplitude},
                          {"width", w.width}});
  }
  return j.dump(2) + "\n";
}

PhotometricField photometric_from_json(const std::string& text) {
  PhotometricField f;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& w : j.at("wells")) {
      PhotometricWell well;
      const auto& c = w.at("center");
      well.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
      well.amplitude = w.at("amplitude").get<double>();
      well.width = w.at("width").get<double>();
      if (!(well.width > 0.0)) throw std::invalid_argument("well width must be positive");
      f.wells.push_back(well);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed photometric field: ") + e.what());
  }
  return f;
}

PhotometricField load_photometric(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return photometric_from_json(ss.str());
}

// --- config / particles ----------------------------------------------------

void RelaxConfig::validate() const {
  if (!(eta_mu > 0.0)) throw std::invalid_argument("eta_mu must be positive");
  if (!(max_step_factor > 0.0)) throw std::invalid_argument("max_step_factor must be positive");
  if (t_prune < 1) throw std::invalid_argument("t_prune must be >= 1");
  if (!(tau_margin >= 0.0)) throw std::invalid_argument("tau_margin must be non-negative");
  if (iterations < 0) throw std::invalid_argument("iterations must be non-negative");
  if (!(joint_lambda >= 0.0)) throw std::invalid_argument("joint_lambda must be non-negative");
  if (!(eta_app >= 0.0)) throw std::invalid_argument("eta_app must be non-negative");
}

ParticleSet ParticleSet::from_positions(std::vector<Vec3> positions) {
  ParticleSet p;
  p.alive.assign(positions.size(), 1);
  p.payload.assign(positions.size(), 0.0);
  p.positions = std::move(positions);
  return p;
}

std::size_t ParticleSet::alive_count() const {
  return static_cast<std::size_t>(std::count(alive.begin(), alive.end(), std::uint8_t{1}));
}

// --- dynamics --------------------------------------------------------------

namespace {

Vec3 clip_step(Vec3 step, double max_step) {
  const double n = norm(step);
  if (n > max_step) step *= max_step / n;
  return step;
}

// Shared update loop. `direction` maps (position, geometric sample) to the
// unclipped displacement.
template <typename Direction>
StepStats advance(ParticleSet& ps, const FieldBundle& bundle, const EnergyParams& params, const RelaxConfig& cfg,
                  Direction&& direction) {
  const double max_step = cfg.max_step_factor * bundle.partition.frame.voxel_size;
  StepStats st;
  double force_sum = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps.alive[i]) continue;
    Vec3& pos = ps.positions[i];
    const EnergySample s = total_force(pos, bundle.partition, bundle.fields, params);
    ++st.alive;
    const Vec3 disp = direction(pos, s);
    if (!is_finite(disp) || !std::isfinite(s.e_total)) {
      ++st.frozen;
      continue;
    }
    const double fn = norm(s.force);
    st.total_energy += s.e_total;
    force_sum += fn;
    st.max_force = std::max(st.max_force, fn);

    const Label before = bundle.partition.label_at(pos);
    pos += clip_step(disp, max_step);
    if (bundle.partition.label_at(pos) != before) st.label_crossing = true;

    if (cfg.photometric && cfg.eta_app > 0.0) {
      ps.payload[i] -= cfg.eta_app * (ps.payload[i] - cfg.photometric->appearance(pos));
    }
  }
  const std::size_t counted = st.alive - st.frozen;
  st.mean_force = counted > 0 ? force_sum / static_cast<double>(counted) : 0.0;
  return st;
}

}  // namespace

StepStats relax_step(ParticleSet& particles, const FieldBundle& bundle, const EnergyParams& params,
                     const RelaxConfig& cfg) {
  // Positions see only the geometric force; the photometric position
  // gradient is masked to zero here and reaches the payload channel only.
  return advance(particles, bundle, params, cfg,
                 [&](const Vec3&, const EnergySample& s) { return s.force * cfg.eta_mu; });
}

StepStats joint_step(ParticleSet& particles, const FieldBundle& bundle, const EnergyParams& params,
                     const RelaxConfig& cfg) {
  if (!cfg.photometric) throw std::invalid_argument("joint mode requires a photometric field");
  const PhotometricField& photo = *cfg.photometric;
  return advance(particles, bundle, params, cfg, [&](const Vec3& pos, const EnergySample& s) {
    return (s.force * cfg.joint_lambda - photo.gradient(pos)) * cfg.eta_mu;
  });
}

std::size_t prune_free(ParticleSet& particles, const FieldBundle& bundle, const RelaxConfig& cfg) {
  std::size_t pruned = 0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    if (!particles.alive[i]) continue;
    const double d = interpolate(bundle.fields.d_trust, bundle.fields.frame, particles.positions[i]);
    if (d > cfg.tau_margin) {
      particles.alive[i] = 0;
      ++pruned;
    }
  }
  return pruned;
}

std::vector<EnergySample> evaluate_all(const ParticleSet& particles, const FieldBundle& bundle,
                                       const EnergyParams& params) {
  std::vector<EnergySample> out(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) {
    if (particles.alive[i]) out[i] = total_force(particles.positions[i], bundle.partition, bundle.fields, params);
  }
  return out;
}

namespace {

LogRow summarize(int iter, const ParticleSet& ps, const FieldBundle& bundle, const EnergyParams& params) {
  LogRow row;
  row.iter = iter;
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps.alive[i]) continue;
    ++row.alive;
    const EnergySample s = total_force(ps.positions[i], bundle.partition, bundle.fields, params);
    const double fn = norm(s.force);
    if (!std::isfinite(fn) || !std::isfinite(s.e_total)) {
      ++row.frozen;
      continue;
    }
    row.total_energy += s.e_total;
    sum += fn;
    row.max_force = std::max(row.max_force, fn);
    ++counted;
  }
  row.mean_force = counted > 0 ? sum / static_cast<double>(counted) : 0.0;
  return row;
}

void record_tracked(TrajectoryLog& log, int iter, const ParticleSet& ps, const FieldBundle& bundle) {
  for (std::size_t id : ps.tracked_ids) {
    if (id >= ps.size() || !ps.alive[id]) continue;
    log.tracked.push_back({iter, id, ps.positions[id], bundle.partition.label_at(ps.positions[id])});
  }
}

}  // namespace

RunResult run(ParticleSet particles, const FieldBundle& bundle, const EnergyParams& params,
              const RelaxConfig& cfg) {
  cfg.validate();
  if (cfg.mode == RelaxMode::Joint && !cfg.photometric) {
    throw std::invalid_argument("joint mode requires a photometric field");
  }
  RunResult out;
  for (int t = 0; t < cfg.iterations; ++t) {
    record_tracked(out.log, t, particles, bundle);
    const StepStats st = cfg.mode == RelaxMode::Decoupled ? relax_step(particles, bundle, params, cfg)
                                                          : joint_step(particles, bundle, params, cfg);
    LogRow row;
    row.iter = t;
    row.total_energy = st.total_energy;
    row.mean_force = st.mean_force;
    row.max_force = st.max_force;
    row.alive = st.alive;
    row.frozen = st.frozen;
    row.label_crossing = st.label_crossing;
    if (cfg.prune_enabled && (t + 1) % cfg.t_prune == 0) row.pruned = prune_free(particles, bundle, cfg);
    out.log.rows.push_back(row);
  }
  record_tracked(out.log, cfg.iterations, particles, bundle);
  out.log.rows.push_back(summarize(cfg.iterations, particles, bundle, params));
  out.particles = std::move(particles);
  return out;
}

// --- files -----------------------------------------------------------------

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

const char* region_name(Label l) {
  switch (l) {
    case Label::Occ: return "OCC";
    case Label::Free: return "FREE";
    case Label::Unk: return "UNK";
  }
  return "?";
}

}  // namespace

void write_trajectory_csv(const TrajectoryLog& log, const std::string& path) {
  auto out = open_out(path);
  out << "iter,total_energy,mean_force,max_force,alive,pruned\n";
  char buf[256];
  for (const auto& r : log.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%zu,%zu\n", r.iter, r.total_energy, r.mean_force,
                  r.max_force, r.alive, r.pruned);
    out << buf;
  }
}

void write_tracked_csv(const TrajectoryLog& log, const std::string& path) {
  auto out = open_out(path);
  out << "iter,id,x,y,z,region\n";
  char buf[256];
  for (const auto& s : log.tracked) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g,%.17g,%s\n", s.iter, s.id, s.pos.x, s.pos.y, s.pos.z,
                  region_name(s.region));
    out << buf;
  }
}

void save_particles(const ParticleSet& ps, const std::string& path) {
  auto out = open_out(path);
  out << "id,x,y,z,alive,payload\n";
  char buf[256];
  for (std::size_t i = 0; i < ps.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%d,%.17g\n", i, ps.positions[i].x, ps.positions[i].y,
                  ps.positions[i].z, ps.alive[i] ? 1 : 0, ps.payload[i]);
    out << buf;
  }
}

ParticleSet load_particles(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  ParticleSet ps;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.rfind("id,", 0) == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::size_t id = 0;
    Vec3 p;
    int alive = 1;
    double payload = 0.0;
    if (!(ls >> id >> p.x >> p.y >> p.z >> alive >> payload)) {
      throw std::invalid_argument("bad particle record on line " + std::to_string(lineno));
    }
    if (id != ps.size()) throw std::invalid_argument("particle ids must be consecutive from 0");
    ps.positions.push_back(p);
    ps.alive.push_back(alive ? 1 : 0);
    ps.payload.push_back(payload);
  }
  return ps;
}

// --- initialization --------------------------------------------------------

std::vector<Vec3> sample_in_cells(const GridFrame& frame, const std::vector<std::size_t>& cells, std::size_t n,
                                  std::uint64_t seed) {
  std::vector<Vec3> out;
  if (n == 0) return out;
  if (cells.empty()) throw std::invalid_argument("no voxels to sample from");

  // Uniform over the union of equal-volume voxels: pick a voxel, then a point inside it.
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto nx = static_cast<std::size_t>(frame.dims.x);
  const auto ny = static_cast<std::size_t>(frame.dims.y);
  const double vs = frame.voxel_size;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t c = cells[pick(rng)];
    const Index3 idx{static_cast<int>(c % nx), static_cast<int>((c / nx) % ny), static_cast<int>(c / (nx * ny))};
    Vec3 p{frame.origin.x + (idx.x + unit(rng)) * vs, frame.origin.y + (idx.y + unit(rng)) * vs,
           frame.origin.z + (idx.z + unit(rng)) * vs};
    // Guard against rounding onto the far face of the voxel.
    if (frame.containing(p) != idx) p = frame.center(idx);
    out.push_back(p);
  }
  return out;
}

std::vector<Vec3> sample_in_labels(const FieldBundle& bundle, std::initializer_list<Label> labels, std::size_t n,
                                   std::uint64_t seed) {
  const auto& part = bundle.partition;
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < part.labels.size(); ++i) {
    for (Label l : labels)
      if (part.labels.at_linear(i) == l) cells.push_back(i);
  }
  if (n > 0 && cells.empty()) throw std::invalid_argument("no voxels carry the requested labels");
  return sample_in_cells(part.frame, cells, n, seed);
}

ParticleSet init_particles(InitKind kind, const FieldBundle& bundle, std::size_t n, std::uint64_t seed) {
  const auto& frame = bundle.partition.frame;
  switch (kind) {
    case InitKind::UniformInFree:
      return ParticleSet::from_positions(sample_in_labels(bundle, {Label::Free}, n, seed));
    case InitKind::UniformInDomain:
      return ParticleSet::from_positions(sample_in_labels(bundle, {Label::Occ, Label::Free, Label::Unk}, n, seed));
    case InitKind::OnPoints: {
      std::vector<Vec3> nodes;
      const Dims d = frame.dims;
      for (int k = 0; k < d.z; ++k)
        for (int j = 0; j < d.y; ++j)
          for (int i = 0; i < d.x; ++i)
            if (bundle.fields.d_occ(i, j, k) == 0.0) nodes.push_back(frame.center({i, j, k}));
      if (nodes.empty() && n > 0) throw std::invalid_argument("field has no LiDAR-point voxels");
      if (n < nodes.size()) {
        std::mt19937_64 rng(seed);
        std::vector<std::size_t> order(nodes.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        // Partial Fisher-Yates keeps the draw deterministic and without replacement.
        for (std::size_t k = 0; k < n; ++k) {
          std::uniform_int_distribution<std::size_t> pick(k, order.size() - 1);
          std::swap(order[k], order[pick(rng)]);
        }
        std::vector<Vec3> chosen;
        chosen.reserve(n);
        for (std::size_t k = 0; k < n; ++k) chosen.push_back(nodes[order[k]]);
        nodes = std::move(chosen);
      }
      return ParticleSet::from_positions(std::move(nodes));
    }
  }
  throw std::invalid_argument("unknown init kind");
}

}  // namespace energs
