#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "common.hpp"
#include "doctest.h"
#include "energs/relax.hpp"
#include "energs/validate.hpp"

using namespace energs;
using energs::test::canonical;

namespace {

GridFrame unit_frame(Dims dims, double vs) {
  GridFrame f;
  f.origin = {0, 0, 0};
  f.voxel_size = vs;
  f.dims = dims;
  return f;
}

// All-FREE box whose penetration grows linearly with x; d_occ and d_unk
// are far and flat so only the barrier acts.
FieldBundle free_ramp(double vs) {
  const GridFrame f = unit_frame({12, 4, 4}, vs);
  FieldBundle b;
  b.partition.frame = f;
  b.partition.labels = Grid3<Label>(f.dims, Label::Free);
  Grid3<double> d_occ(f.dims, 1e9), d_trust(f.dims, 0.0), d_unk(f.dims, 1e9);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 12; ++i) d_trust(i, j, k) = 2.0 + i * vs;
  b.fields = fields_from_distances(f, std::move(d_occ), std::move(d_trust), std::move(d_unk));
  return b;
}

// UNK everywhere except one OCC layer z == 3 holding a LiDAR point at
// every voxel center; no FREE voxel at all.
FieldBundle point_layer() {
  const GridFrame f = unit_frame({6, 6, 7}, 0.5);
  VoxelPartition p;
  p.frame = f;
  p.labels = Grid3<Label>(f.dims, Label::Unk);
  std::vector<Vec3> cloud;
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 6; ++i) {
      p.labels(i, j, 3) = Label::Occ;
      cloud.push_back(f.center({i, j, 3}));
    }
  FieldBundle b;
  b.fields = build_distance_fields(p, cloud);
  b.partition = std::move(p);
  return b;
}

bool same_bits(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(Vec3)) == 0;
}

}  // namespace

TEST_CASE("large forces are clipped to half a voxel") {
  const FieldBundle b = free_ramp(0.25);
  EnergyParams p;
  p.lambda_free = 5.0;  // saturated barrier: |F| = lambda / tau = 10
  RelaxConfig cfg;
  ParticleSet ps = ParticleSet::from_positions({{1.4, 0.5, 0.5}});
  const Vec3 before = ps.positions[0];
  const StepStats st = relax_step(ps, b, p, cfg);
  CHECK(st.max_force > 9.9);
  CHECK(st.max_force <= 10.0);
  const Vec3 step = ps.positions[0] - before;
  CHECK(norm(step) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(step.x < 0.0);
}

TEST_CASE("particles sitting on LiDAR points with no FREE space do not move") {
  const FieldBundle b = point_layer();
  const ParticleSet init = init_particles(InitKind::OnPoints, b, 1000, 0);
  REQUIRE(init.size() == 36);
  RelaxConfig cfg;
  cfg.iterations = 100;
  const RunResult r = run(init, b, EnergyParams{}, cfg);
  double drift = 0.0;
  for (std::size_t i = 0; i < init.size(); ++i)
    drift = std::max(drift, norm(r.particles.positions[i] - init.positions[i]));
  CHECK(drift < 1e-9);
  CHECK(r.particles.alive_count() == 36);
}

TEST_CASE("decoupled positions ignore any photometric field, bit for bit") {
  const FieldBundle& b = canonical();
  const ParticleSet init = init_particles(InitKind::UniformInDomain, b, 300, 3);
  RelaxConfig cfg;
  cfg.iterations = 120;
  cfg.t_prune = 40;
  const RunResult zero = run(init, b, EnergyParams{}, cfg);

  RelaxConfig adv = cfg;
  // Strong well deep inside FREE: gradient magnitude ~100 pointing into it.
  adv.photometric = PhotometricField{{{{0.0, 0.0, 1.5}, 100.0 * std::sqrt(std::exp(1.0)) * 2.0, 2.0}}};
  const RunResult r = run(init, b, EnergyParams{}, adv);
  CHECK(same_bits(r.particles.positions, zero.particles.positions));
  CHECK(r.particles.alive == zero.particles.alive);
  // The payload channel does see the field.
  CHECK(r.particles.payload != zero.particles.payload);
}

TEST_CASE("joint mode: requires a field, reduces to decoupled for an empty one") {
  const FieldBundle& b = canonical();
  const ParticleSet init = init_particles(InitKind::UniformInFree, b, 200, 4);
  RelaxConfig cfg;
  cfg.iterations = 50;
  cfg.mode = RelaxMode::Joint;
  CHECK_THROWS_AS(run(init, b, EnergyParams{}, cfg), std::invalid_argument);

  cfg.photometric = PhotometricField{};
  const RunResult joint = run(init, b, EnergyParams{}, cfg);
  RelaxConfig dec = cfg;
  dec.mode = RelaxMode::Decoupled;
  const RunResult decoupled = run(init, b, EnergyParams{}, dec);
  CHECK(same_bits(joint.particles.positions, decoupled.particles.positions));
}

TEST_CASE("joint mode with a heavy geometric weight follows the geometric direction") {
  const FieldBundle& b = canonical();
  ParticleSet a = init_particles(InitKind::UniformInFree, b, 100, 5);
  ParticleSet c = a;
  RelaxConfig cfg;
  cfg.photometric = PhotometricField{{{{0.0, 0.0, 1.5}, 3.0, 1.0}}};
  cfg.eta_mu = 1e-9;  // tiny steps so the clip never engages
  RelaxConfig joint = cfg;
  joint.mode = RelaxMode::Joint;
  joint.joint_lambda = 1e6;
  joint.eta_mu = 1e-15;
  const auto before = a.positions;
  relax_step(a, b, EnergyParams{}, cfg);
  joint_step(c, b, EnergyParams{}, joint);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec3 u = a.positions[i] - before[i], v = c.positions[i] - before[i];
    if (norm(u) < 1e-12) continue;
    CHECK(dot(u, v) / (norm(u) * norm(v)) > 0.999);
  }
}

TEST_CASE("a photometric attractor in FREE traps particles without the barrier") {
  const FieldBundle& b = canonical();
  EnergyParams p;
  p.lambda_free = 0.0;
  RelaxConfig cfg;
  cfg.mode = RelaxMode::Joint;
  cfg.iterations = 500;
  cfg.prune_enabled = false;
  cfg.photometric = PhotometricField{{{{0.0, 0.0, 1.2}, 5.0, 1.5}}};
  ParticleSet init = ParticleSet::from_positions({{0.1, 0.1, 1.3}, {-0.2, 0.3, 1.0}});
  const RunResult r = run(init, b, p, cfg);
  for (const auto& x : r.particles.positions) CHECK(b.partition.label_at(x) == Label::Free);
}

TEST_CASE("pruning uses a strict inequality and is idempotent") {
  const FieldBundle b = free_ramp(0.25);
  const Vec3 pos{1.3, 0.5, 0.5};
  const double v = interpolate(b.fields.d_trust, b.partition.frame, pos);
  auto pruned = [&](double tau) {
    ParticleSet ps = ParticleSet::from_positions({pos});
    RelaxConfig c;
    c.tau_margin = tau;
    return prune_free(ps, b, c);
  };
  CHECK(pruned(v - 1e-6) == 1);
  CHECK(pruned(v) == 0);
  CHECK(pruned(v + 1e-6) == 0);

  const FieldBundle& canon = canonical();
  ParticleSet ps = init_particles(InitKind::UniformInDomain, canon, 2000, 8);
  // Particles outside FREE have d_trust 0 at their voxel and are kept.
  RelaxConfig c;
  c.tau_margin = 0.5;
  const std::size_t first = prune_free(ps, canon, c);
  CHECK(first > 0);
  const auto alive = ps.alive;
  CHECK(prune_free(ps, canon, c) == 0);
  CHECK(ps.alive == alive);
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (canon.partition.label_at(ps.positions[i]) == Label::Occ) CHECK(ps.alive[i] == 1);
}

TEST_CASE("run: log layout, pruning cadence, monotone alive count, no resurrection") {
  const FieldBundle& b = canonical();
  const ParticleSet init = init_particles(InitKind::UniformInFree, b, 400, 9);
  RelaxConfig cfg;
  cfg.iterations = 30;
  cfg.t_prune = 10;
  cfg.tau_margin = 0.2;
  ParticleSet tracked = init;
  tracked.tracked_ids = {0, 1, 2};
  const RunResult r = run(tracked, b, EnergyParams{}, cfg);
  REQUIRE(r.log.rows.size() == 31);
  for (std::size_t t = 0; t < r.log.rows.size(); ++t) {
    CHECK(r.log.rows[t].iter == static_cast<int>(t));
    CHECK(std::isfinite(r.log.rows[t].total_energy));
    if (t > 0) CHECK(r.log.rows[t].alive <= r.log.rows[t - 1].alive);
    // The pruning pass that follows step t is reported on row t.
    if (r.log.rows[t].pruned > 0) CHECK((t + 1) % 10 == 0);
  }
  // Tracked histories stop when a particle is pruned.
  CHECK(r.log.tracked.size() <= 3 * 31);
  CHECK(r.log.tracked.size() >= 3 * 10);
  for (const auto& s : r.log.tracked) CHECK(s.id < 3);
}

TEST_CASE("initializers: on-points, uniform-in-free, determinism") {
  const FieldBundle& b = canonical();
  const ParticleSet on = init_particles(InitKind::OnPoints, b, 500, 1);
  REQUIRE(on.size() == 500);
  for (const auto& x : on.positions) CHECK(interpolate(b.fields.d_occ, b.partition.frame, x) == 0.0);

  const ParticleSet fr = init_particles(InitKind::UniformInFree, b, 500, 1);
  for (const auto& x : fr.positions) CHECK(b.partition.label_at(x) == Label::Free);
  CHECK(init_particles(InitKind::UniformInFree, b, 500, 1).positions == fr.positions);
  CHECK(init_particles(InitKind::UniformInFree, b, 500, 2).positions != fr.positions);

  const ParticleSet dom = init_particles(InitKind::UniformInDomain, b, 500, 1);
  for (const auto& x : dom.positions) CHECK(b.partition.frame.inside(x));
}

TEST_CASE("particle and log files") {
  const FieldBundle& b = canonical();
  ParticleSet ps = init_particles(InitKind::UniformInFree, b, 50, 2);
  ps.alive[3] = 0;
  ps.payload[7] = 0.123456789012345678;
  const auto dir = std::filesystem::temp_directory_path() / "energs_test_relax";
  std::filesystem::create_directories(dir);
  save_particles(ps, (dir / "p.csv").string());
  const ParticleSet back = load_particles((dir / "p.csv").string());
  CHECK(same_bits(back.positions, ps.positions));
  CHECK(back.alive == ps.alive);
  CHECK(back.payload == ps.payload);

  RelaxConfig cfg;
  cfg.iterations = 3;
  ps.tracked_ids = {0};
  const RunResult r = run(ps, b, EnergyParams{}, cfg);
  write_trajectory_csv(r.log, (dir / "t.csv").string());
  write_tracked_csv(r.log, (dir / "k.csv").string());
  std::ifstream t(dir / "t.csv"), k(dir / "k.csv");
  std::string line;
  std::getline(t, line);
  CHECK(line == "iter,total_energy,mean_force,max_force,alive,pruned");
  std::getline(k, line);
  CHECK(line == "iter,id,x,y,z,region");
  std::filesystem::remove_all(dir);

  CHECK_THROWS(load_particles("/nonexistent/energs.csv"));
}

TEST_CASE("config validation") {
  RelaxConfig c;
  CHECK_NOTHROW(c.validate());
  c.t_prune = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = RelaxConfig{};
  c.eta_mu = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = RelaxConfig{};
  c.tau_margin = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
