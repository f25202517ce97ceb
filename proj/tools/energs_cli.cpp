// energs: command-line front end. Stages hand off through files:
//   gen-scene -> scan -> build-field -> relax -> metrics
// plus `validate <experiment>` and `gradcheck`.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "energs/config.hpp"
#include "energs/metrics.hpp"
#include "energs/relax.hpp"
#include "energs/scene.hpp"
#include "energs/validate.hpp"
#include "energs/version.hpp"
#include "energs/voxel_field.hpp"

namespace fs = std::filesystem;
using namespace energs;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
};

struct Manifest {
  std::string stage;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

void write_manifest(const Manifest& m, const Globals& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - m.start).count();
  out << "stage: " << m.stage << "\n";
  out << "tool_version: " << kVersion << "\n";
  out << "seed: " << g.seed << "\n";
  out << "config: " << (g.config.empty() ? "(defaults)" : g.config) << "\n";
  for (const auto& i : m.inputs) out << "input: " << i << "\n";
  for (const auto& o : m.outputs) out << "output: " << o << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", secs);
  out << "wall_clock_s: " << buf << "\n";
}

AppConfig app_config(const Globals& g) { return g.config.empty() ? AppConfig{} : load_config(g.config); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir);
}

void print_counts(const VoxelPartition& p) {
  const LabelCounts c = p.counts();
  std::printf("voxels occ=%zu free=%zu unk=%zu\n", c.occ, c.free, c.unk);
  if (p.no_evidence) std::printf("warning: no rays carved; partition is all UNK\n");
}

std::optional<InitKind> parse_init(const std::string& s) {
  if (s == "on-points") return InitKind::OnPoints;
  if (s == "uniform-in-free") return InitKind::UniformInFree;
  if (s == "uniform-in-domain") return InitKind::UniformInDomain;
  return std::nullopt;
}

void print_report(const ExperimentReport& r) {
  for (const auto& c : r.checks)
    std::printf("%-40s %-14.9g %-2s %-14.9g %s\n", c.name.c_str(), c.measured, c.relation.c_str(), c.threshold,
                c.pass ? "ok" : "FAIL");
  if (r.empty) std::printf("empty: 1\n");
  if (!r.table_header.empty()) {
    for (std::size_t i = 0; i < r.table_header.size(); ++i) std::printf("%s%s", i ? "," : "", r.table_header[i].c_str());
    std::printf("\n");
    for (const auto& row : r.table) {
      for (std::size_t i = 0; i < row.size(); ++i) std::printf("%s%.6g", i ? "," : "", row[i]);
      std::printf("\n");
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EnerGS geometric energy field: scenes, fields, relaxation, metrics, validation"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random draw of the command");
  app.add_option("--config", g.config, "JSON config (energy keys, voxel_size, canyon/scan/relax/experiment)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output file (or directory for relax/validate)");

  // gen-scene
  auto* gen = app.add_subcommand("gen-scene", "Generate a street-canyon scene (JSON)");

  // scan
  auto* scn = app.add_subcommand("scan", "Simulate LiDAR scans for every sensor of a scene");
  std::string scan_scene_path, cloud_path;
  scn->add_option("--scene", scan_scene_path, "Scene JSON")->required()->check(CLI::ExistingFile);
  scn->add_option("--cloud", cloud_path, "Also write the merged point cloud (x y z text)");

  // build-field
  auto* bf = app.add_subcommand("build-field", "Carve the partition and build distance fields (EGSF)");
  std::string bf_scene, bf_scans;
  std::optional<double> bf_voxel;
  bf->add_option("--scene", bf_scene, "Scene JSON (domain bounds; scanned unless --scans is given)")
      ->required()
      ->check(CLI::ExistingFile);
  bf->add_option("--scans", bf_scans, "Scan records JSON from `scan`")->check(CLI::ExistingFile);
  bf->add_option("--voxel-size", bf_voxel, "Voxel edge in meters (default from config, 0.25)");

  // relax
  auto* rx = app.add_subcommand("relax", "Run the relaxation engine on a particle set");
  std::string rx_field, rx_init = "uniform-in-free", rx_particles, rx_mode, rx_photo;
  std::size_t rx_n = 500, rx_track = 0;
  std::optional<int> rx_iters, rx_t_prune;
  std::optional<double> rx_tau_margin, rx_eta;
  bool rx_no_prune = false;
  rx->add_option("--field", rx_field, "EGSF field dump")->required()->check(CLI::ExistingFile);
  rx->add_option("--init", rx_init, "on-points | uniform-in-free | uniform-in-domain | from-file");
  rx->add_option("--particles", rx_particles, "Particle CSV for --init from-file")->check(CLI::ExistingFile);
  rx->add_option("--n", rx_n, "Particle count for generated inits");
  rx->add_option("--mode", rx_mode, "decoupled | joint");
  rx->add_option("--photometric", rx_photo, "Photometric wells JSON")->check(CLI::ExistingFile);
  rx->add_option("--iters", rx_iters, "Iterations");
  rx->add_option("--t-prune", rx_t_prune, "Iterations between pruning passes");
  rx->add_option("--tau-margin", rx_tau_margin, "Pruning threshold (m)");
  rx->add_option("--eta", rx_eta, "Step scale (m per unit force)");
  rx->add_flag("--no-prune", rx_no_prune, "Disable pruning");
  rx->add_option("--track", rx_track, "Record position histories of particles 0..K-1");

  // metrics
  auto* mt = app.add_subcommand("metrics", "Geometric metric suite for a particle set");
  std::string mt_field, mt_particles, mt_hist;
  int mt_bins = 32;
  mt->add_option("--field", mt_field, "EGSF field dump")->required()->check(CLI::ExistingFile);
  mt->add_option("--particles", mt_particles, "Particle CSV")->required()->check(CLI::ExistingFile);
  mt->add_option("--histogram", mt_hist, "Also write the force-norm histogram CSV");
  mt->add_option("--bins", mt_bins, "Histogram bins")->check(CLI::PositiveNumber);

  // validate
  auto* va = app.add_subcommand("validate", "Run a validation experiment on the canonical scene");
  std::string va_id;
  va->add_option("experiment", va_id, "theorem1 | theorem2 | prop3 | ratio_sweep | margin_sweep")
      ->required()
      ->check(CLI::IsMember({"theorem1", "theorem2", "prop3", "ratio_sweep", "margin_sweep"}));

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Analytic force vs finite difference of the interpolated energy");
  std::string gc_field;
  std::size_t gc_points = 1000;
  gc->add_option("--field", gc_field, "EGSF field dump (default: canonical scene)")->check(CLI::ExistingFile);
  gc->add_option("--points", gc_points, "Number of sample points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const AppConfig cfg = app_config(g);
    auto need_out = [&](const char* what) {
      if (g.out.empty()) throw CLI::RequiredError(std::string("--out (") + what + ")");
    };

    if (*gen) {
      need_out("scene JSON");
      Manifest m{"gen-scene"};
      save_scene(generate_canyon(g.seed, cfg.canyon), g.out);
      m.outputs = {g.out};
      write_manifest(m, g, g.out + ".manifest");
      return 0;
    }

    if (*scn) {
      need_out("scan records JSON");
      Manifest m{"scan", {scan_scene_path}};
      const SceneDescription scene = load_scene(scan_scene_path);
      ScanConfig sc = cfg.scan;
      sc.noise_seed = g.seed;
      const auto scans = scan_scene(scene, sc);
      save_scans(scans, g.out);
      m.outputs = {g.out};
      if (!cloud_path.empty()) {
        save_point_cloud(merge_scans(scans).cloud, cloud_path);
        m.outputs.push_back(cloud_path);
      }
      std::size_t hits = 0;
      for (const auto& s : scans) hits += s.hit_count();
      std::printf("scans=%zu hits=%zu\n", scans.size(), hits);
      write_manifest(m, g, g.out + ".manifest");
      return 0;
    }

    if (*bf) {
      need_out("EGSF field dump");
      Manifest m{"build-field", {bf_scene}};
      const double vs = bf_voxel.value_or(cfg.voxel_size);
      if (!(vs > 0.0)) throw std::invalid_argument("voxel size must be positive");
      const SceneDescription scene = load_scene(bf_scene);
      std::vector<SensorScan> scans;
      if (!bf_scans.empty()) {
        scans = load_scans(bf_scans);
        m.inputs.push_back(bf_scans);
      } else {
        ScanConfig sc = cfg.scan;
        sc.noise_seed = g.seed;
        scans = scan_scene(scene, sc);
      }
      const FieldBundle b = build_field(scans, scene.domain_bounds, vs);
      save_egsf(b, g.out);
      print_counts(b.partition);
      m.outputs = {g.out};
      write_manifest(m, g, g.out + ".manifest");
      return 0;
    }

    if (*rx) {
      need_out("output directory");
      Manifest m{"relax", {rx_field}};
      const FieldBundle b = load_egsf(rx_field);
      RelaxConfig rc = cfg.relax;
      if (rx_iters) rc.iterations = *rx_iters;
      if (rx_t_prune) rc.t_prune = *rx_t_prune;
      if (rx_tau_margin) rc.tau_margin = *rx_tau_margin;
      if (rx_eta) rc.eta_mu = *rx_eta;
      if (rx_no_prune) rc.prune_enabled = false;
      if (!rx_mode.empty()) {
        if (rx_mode == "decoupled") rc.mode = RelaxMode::Decoupled;
        else if (rx_mode == "joint") rc.mode = RelaxMode::Joint;
        else throw std::invalid_argument("--mode must be decoupled or joint");
      }
      if (!rx_photo.empty()) {
        rc.photometric = load_photometric(rx_photo);
        m.inputs.push_back(rx_photo);
      }
      ParticleSet ps;
      if (rx_init == "from-file") {
        if (rx_particles.empty()) throw std::invalid_argument("--init from-file needs --particles");
        ps = load_particles(rx_particles);
        m.inputs.push_back(rx_particles);
      } else if (const auto kind = parse_init(rx_init)) {
        ps = init_particles(*kind, b, rx_n, g.seed);
      } else {
        throw std::invalid_argument("invalid --init spec: " + rx_init);
      }
      for (std::size_t i = 0; i < std::min(rx_track, ps.size()); ++i) ps.tracked_ids.push_back(i);

      const RunResult r = run(ps, b, cfg.energy, rc);
      ensure_dir(g.out);
      const std::string parts = (fs::path(g.out) / "particles.csv").string();
      const std::string traj = (fs::path(g.out) / "trajectory.csv").string();
      save_particles(r.particles, parts);
      write_trajectory_csv(r.log, traj);
      m.outputs = {parts, traj};
      if (rx_track > 0) {
        const std::string tracked = (fs::path(g.out) / "tracked.csv").string();
        write_tracked_csv(r.log, tracked);
        m.outputs.push_back(tracked);
      }
      std::printf("alive=%zu/%zu\n", r.particles.alive_count(), r.particles.size());
      write_manifest(m, g, (fs::path(g.out) / "manifest.txt").string());
      return 0;
    }

    if (*mt) {
      need_out("metrics CSV");
      Manifest m{"metrics", {mt_field, mt_particles}};
      const FieldBundle b = load_egsf(mt_field);
      const ParticleSet ps = load_particles(mt_particles);
      const auto samples = evaluate_all(ps, b, cfg.energy);
      std::vector<Vec3> forces(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) forces[i] = samples[i].force;
      const MetricsReport rep = compute_metrics(ps, b, forces);
      write_metrics_csv(rep, g.out);
      m.outputs = {g.out};
      if (!mt_hist.empty()) {
        write_histogram_csv(force_norm_histogram(ps, forces, mt_bins), mt_hist);
        m.outputs.push_back(mt_hist);
      }
      std::printf("%s\n%s\n", kMetricsHeader, metrics_csv_row(rep).c_str());
      if (rep.empty) std::printf("empty: no alive particles\n");
      if (rep.occcov_undefined) std::printf("occcov: undefined (no OCC voxels)\n");
      write_manifest(m, g, g.out + ".manifest");
      return 0;
    }

    if (*va) {
      need_out("report directory");
      Manifest m{"validate " + va_id};
      ExperimentConfig ec = cfg.experiment;
      ec.id = va_id;
      ec.seed = g.seed;
      const ExperimentReport rep = run_experiment(ec);
      ensure_dir(g.out);
      const std::string report = (fs::path(g.out) / "report.csv").string();
      write_report_csv(rep, report);
      m.outputs = {report};
      if (!rep.histogram.count.empty()) {
        const std::string hist = (fs::path(g.out) / "histogram.csv").string();
        write_histogram_csv(rep.histogram, hist);
        m.outputs.push_back(hist);
      }
      print_report(rep);
      std::printf("%s\n", rep.verdict().c_str());
      write_manifest(m, g, (fs::path(g.out) / "manifest.txt").string());
      return rep.pass() ? 0 : 1;
    }

    if (*gc) {
      Manifest m{"gradcheck"};
      FieldBundle b;
      if (!gc_field.empty()) {
        b = load_egsf(gc_field);
        m.inputs.push_back(gc_field);
      } else {
        b = canonical_bundle(g.seed, cfg.voxel_size);
      }
      GradCheckConfig gcc;
      gcc.points = gc_points;
      gcc.seed = g.seed;
      const GradCheckResult r = gradient_check(b, cfg.energy, gcc);
      if (!g.out.empty()) {
        std::ofstream out(g.out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + g.out);
        out << "x,y,z,rel_error\n";
        char buf[160];
        for (std::size_t i = 0; i < r.positions.size(); ++i) {
          std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r.positions[i].x, r.positions[i].y,
                        r.positions[i].z, r.rel_error[i]);
          out << buf;
        }
        m.outputs = {g.out};
        write_manifest(m, g, g.out + ".manifest");
      }
      std::printf("points=%zu failures=%zu p50=%.6g max=%.6g\n", r.positions.size(), r.failures, r.p50_rel_error,
                  r.max_rel_error);
      std::printf("%s %.9g %.9g\n", r.pass ? "PASS" : "FAIL", r.max_rel_error, gcc.max_rel_error);
      return r.pass ? 0 : 1;
    }
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
