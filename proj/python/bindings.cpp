// Python bindings for the energs core: scenes, fields, energies, relaxation,
// metrics and validation experiments.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "energs/config.hpp"
#include "energs/energy.hpp"
#include "energs/metrics.hpp"
#include "energs/relax.hpp"
#include "energs/scene.hpp"
#include "energs/validate.hpp"
#include "energs/version.hpp"
#include "energs/voxel_field.hpp"

namespace py = pybind11;
using namespace energs;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> to_points(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw std::invalid_argument("expected an (N, 3) array");
  auto r = a.unchecked<2>();
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[static_cast<std::size_t>(i)] = {r(i, 0), r(i, 1), r(i, 2)};
  return out;
}

Array from_points(const std::vector<Vec3>& pts) {
  Array a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto k = static_cast<py::ssize_t>(i);
    w(k, 0) = pts[i].x;
    w(k, 1) = pts[i].y;
    w(k, 2) = pts[i].z;
  }
  return a;
}

py::tuple vec(const Vec3& v) { return py::make_tuple(v.x, v.y, v.z); }
Vec3 to_vec(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

// Grids are exposed as (nz, ny, nx) arrays so that x varies fastest.
template <typename T>
py::array_t<T> grid_array(const Grid3<T>& g) {
  const Dims d = g.dims();
  py::array_t<T> a({d.z, d.y, d.x});
  std::copy(g.data().begin(), g.data().end(), a.mutable_data());
  return a;
}

ParticleSet make_particles(const Array& positions, const std::optional<py::array_t<std::uint8_t>>& alive) {
  ParticleSet ps = ParticleSet::from_positions(to_points(positions));
  if (alive) {
    if (static_cast<std::size_t>(alive->size()) != ps.size()) throw std::invalid_argument("alive size mismatch");
    std::copy(alive->data(), alive->data() + alive->size(), ps.alive.begin());
  }
  return ps;
}

}  // namespace

PYBIND11_MODULE(_energs, m) {
  m.doc() = "EnerGS geometric energy field";
  m.attr("__version__") = kVersion;

  py::class_<EnergyParams>(m, "EnergyParams")
      .def(py::init<>())
      .def_readwrite("w_occ", &EnergyParams::w_occ)
      .def_readwrite("sigma_occ", &EnergyParams::sigma_occ)
      .def_readwrite("w_unk", &EnergyParams::w_unk)
      .def_readwrite("sigma_unk", &EnergyParams::sigma_unk)
      .def_readwrite("lambda_free", &EnergyParams::lambda_free)
      .def_readwrite("delta", &EnergyParams::delta)
      .def_readwrite("tau", &EnergyParams::tau)
      .def("validate", &EnergyParams::validate, py::arg("require_occ_dominance") = true);

  py::class_<RelaxConfig>(m, "RelaxConfig")
      .def(py::init<>())
      .def_readwrite("eta_mu", &RelaxConfig::eta_mu)
      .def_readwrite("max_step_factor", &RelaxConfig::max_step_factor)
      .def_readwrite("t_prune", &RelaxConfig::t_prune)
      .def_readwrite("prune_enabled", &RelaxConfig::prune_enabled)
      .def_readwrite("tau_margin", &RelaxConfig::tau_margin)
      .def_readwrite("iterations", &RelaxConfig::iterations)
      .def_readwrite("joint_lambda", &RelaxConfig::joint_lambda)
      .def_property(
          "mode", [](const RelaxConfig& c) { return c.mode == RelaxMode::Joint ? "joint" : "decoupled"; },
          [](RelaxConfig& c, const std::string& s) {
            if (s == "joint") c.mode = RelaxMode::Joint;
            else if (s == "decoupled") c.mode = RelaxMode::Decoupled;
            else throw std::invalid_argument("mode must be 'decoupled' or 'joint'");
          })
      .def("set_photometric_wells",
           [](RelaxConfig& c, const std::vector<std::tuple<std::array<double, 3>, double, double>>& wells) {
             PhotometricField f;
             for (const auto& [center, amp, width] : wells) f.wells.push_back({to_vec(center), amp, width});
             c.photometric = f;
           },
           py::arg("wells"), "Wells as (center, amplitude, width) tuples")
      .def("clear_photometric", [](RelaxConfig& c) { c.photometric.reset(); });

  // Scenes travel as their JSON text.
  m.def("generate_canyon", [](std::uint64_t seed) { return scene_to_json(generate_canyon(seed)); },
        py::arg("seed") = 0, "Canyon scene as JSON text");
  m.def("ray_cast",
        [](const std::string& scene_json, std::array<double, 3> origin, std::array<double, 3> dir,
           double max_range) { return ray_cast(scene_from_json(scene_json), to_vec(origin), to_vec(dir), max_range); },
        py::arg("scene_json"), py::arg("origin"), py::arg("direction"), py::arg("max_range"),
        "Nearest hit distance or None");

  py::class_<FieldBundle>(m, "FieldBundle")
      .def_property_readonly("dims",
                             [](const FieldBundle& b) {
                               const Dims d = b.partition.frame.dims;
                               return py::make_tuple(d.x, d.y, d.z);
                             })
      .def_property_readonly("origin", [](const FieldBundle& b) { return vec(b.partition.frame.origin); })
      .def_property_readonly("voxel_size", [](const FieldBundle& b) { return b.partition.frame.voxel_size; })
      .def("label_counts",
           [](const FieldBundle& b) {
             const LabelCounts c = b.partition.counts();
             return py::dict(py::arg("occ") = c.occ, py::arg("free") = c.free, py::arg("unk") = c.unk);
           })
      .def("labels", [](const FieldBundle& b) {
        Grid3<std::uint8_t> g(b.partition.frame.dims, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g.at_linear(i) = static_cast<std::uint8_t>(b.partition.labels.at_linear(i));
        return grid_array(g);
      })
      .def("d_occ", [](const FieldBundle& b) { return grid_array(b.fields.d_occ); })
      .def("d_trust", [](const FieldBundle& b) { return grid_array(b.fields.d_trust); })
      .def("d_unk", [](const FieldBundle& b) { return grid_array(b.fields.d_unk); })
      .def("save", [](const FieldBundle& b, const std::string& path) { save_egsf(b, path); })
      .def("to_bytes",
           [](const FieldBundle& b) {
             const auto bytes = encode_egsf(b);
             return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
           })
      .def("query",
           [](const FieldBundle& b, std::array<double, 3> pos) {
             const FieldQueryResult q = query(b.fields, b.partition, to_vec(pos));
             return py::dict(py::arg("label") = static_cast<int>(q.label), py::arg("d_occ") = q.d_occ,
                             py::arg("d_trust") = q.d_trust, py::arg("d_unk") = q.d_unk,
                             py::arg("grad_occ") = vec(q.grad_occ), py::arg("grad_trust") = vec(q.grad_trust),
                             py::arg("grad_unk") = vec(q.grad_unk), py::arg("clamped") = q.clamped);
           })
      .def("total_force",
           [](const FieldBundle& b, std::array<double, 3> pos, const EnergyParams& p) {
             const EnergySample s = total_force(to_vec(pos), b.partition, b.fields, p);
             return py::dict(py::arg("e_occ") = s.e_occ, py::arg("e_unk") = s.e_unk, py::arg("e_free") = s.e_free,
                             py::arg("e_total") = s.e_total, py::arg("force") = vec(s.force));
           },
           py::arg("pos"), py::arg("params") = EnergyParams{});

  m.def("load_field", &load_egsf, py::arg("path"));
  m.def("canonical_bundle", &canonical_bundle, py::arg("seed") = 0, py::arg("voxel_size") = 0.25);
  m.def("build_field",
        [](const std::string& scene_json, double voxel_size, std::uint64_t seed) {
          ScanConfig sc;
          sc.noise_seed = seed;
          return build_field(scene_from_json(scene_json), sc, voxel_size);
        },
        py::arg("scene_json"), py::arg("voxel_size") = 0.25, py::arg("seed") = 0);

  m.def("edt",
        [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> mask, double voxel_size) {
          if (mask.ndim() != 3) throw std::invalid_argument("mask must be 3-D (nz, ny, nx)");
          const Dims d{static_cast<int>(mask.shape(2)), static_cast<int>(mask.shape(1)), static_cast<int>(mask.shape(0))};
          Grid3<std::uint8_t> g(d, 0);
          std::copy(mask.data(), mask.data() + mask.size(), g.data().begin());
          return grid_array(edt(g, voxel_size));
        },
        py::arg("mask"), py::arg("voxel_size"), "Exact EDT of a (nz, ny, nx) mask, in meters");

  m.def("energy_occ", &energy_occ, py::arg("d"), py::arg("params") = EnergyParams{});
  m.def("energy_unk", &energy_unk, py::arg("d"), py::arg("params") = EnergyParams{});
  m.def("energy_free", &energy_free, py::arg("d_trust"), py::arg("is_free"), py::arg("params") = EnergyParams{});
  m.def("prop3_magnitude", &prop3_magnitude, py::arg("d"), py::arg("w"), py::arg("sigma"));
  m.def("lipschitz_bound", &lipschitz_bound, py::arg("params") = EnergyParams{});
  m.def("force_magnitude_bound", &force_magnitude_bound, py::arg("params") = EnergyParams{});

  m.def("init_particles",
        [](const FieldBundle& b, const std::string& kind, std::size_t n, std::uint64_t seed) {
          InitKind k;
          if (kind == "on-points") k = InitKind::OnPoints;
          else if (kind == "uniform-in-free") k = InitKind::UniformInFree;
          else if (kind == "uniform-in-domain") k = InitKind::UniformInDomain;
          else throw std::invalid_argument("unknown init kind: " + kind);
          return from_points(init_particles(k, b, n, seed).positions);
        },
        py::arg("bundle"), py::arg("kind"), py::arg("n"), py::arg("seed") = 0);

  m.def("relax",
        [](const FieldBundle& b, const Array& positions, const EnergyParams& p, const RelaxConfig& cfg) {
          RunResult r;
          {
            ParticleSet ps = make_particles(positions, std::nullopt);
            py::gil_scoped_release release;
            r = run(std::move(ps), b, p, cfg);
          }
          py::list rows;
          for (const auto& row : r.log.rows) {
            rows.append(py::dict(py::arg("iter") = row.iter, py::arg("total_energy") = row.total_energy,
                                 py::arg("mean_force") = row.mean_force, py::arg("max_force") = row.max_force,
                                 py::arg("alive") = row.alive, py::arg("pruned") = row.pruned));
          }
          py::array_t<std::uint8_t> alive(static_cast<py::ssize_t>(r.particles.size()));
          std::copy(r.particles.alive.begin(), r.particles.alive.end(), alive.mutable_data());
          return py::make_tuple(from_points(r.particles.positions), alive, rows);
        },
        py::arg("bundle"), py::arg("positions"), py::arg("params") = EnergyParams{},
        py::arg("config") = RelaxConfig{}, "Returns (positions, alive, trajectory rows)");

  m.def("compute_metrics",
        [](const FieldBundle& b, const Array& positions, std::optional<py::array_t<std::uint8_t>> alive,
           const EnergyParams& p) {
          const ParticleSet ps = make_particles(positions, alive);
          const MetricsReport r = compute_metrics(ps, b, p);
          return py::dict(py::arg("leak_pct") = r.leak_pct, py::arg("occcov_pct") = r.occcov_pct,
                          py::arg("margin_m") = r.margin_m, py::arg("thick_m") = r.thick_m,
                          py::arg("num_alive") = r.num_alive, py::arg("force_mean") = r.force.mean,
                          py::arg("force_p50") = r.force.p50, py::arg("force_p95") = r.force.p95,
                          py::arg("force_max") = r.force.max, py::arg("empty") = r.empty,
                          py::arg("occcov_undefined") = r.occcov_undefined);
        },
        py::arg("bundle"), py::arg("positions"), py::arg("alive") = py::none(), py::arg("params") = EnergyParams{});

  m.def("run_experiment",
        [](const std::string& id, std::uint64_t seed, const std::optional<std::string>& config_json) {
          ExperimentConfig ec = config_json ? config_from_json(*config_json).experiment : ExperimentConfig{};
          ec.id = id;
          ec.seed = seed;
          ExperimentReport r;
          {
            py::gil_scoped_release release;
            r = run_experiment(ec);
          }
          py::list checks;
          for (const auto& c : r.checks)
            checks.append(py::dict(py::arg("name") = c.name, py::arg("measured") = c.measured,
                                   py::arg("threshold") = c.threshold, py::arg("relation") = c.relation,
                                   py::arg("pass") = c.pass));
          return py::dict(py::arg("id") = r.id, py::arg("passed") = r.pass(), py::arg("verdict") = r.verdict(),
                          py::arg("checks") = checks, py::arg("table_header") = r.table_header,
                          py::arg("table") = r.table);
        },
        py::arg("experiment"), py::arg("seed") = 0, py::arg("config_json") = py::none());

  m.def("gradient_check",
        [](const FieldBundle& b, std::size_t points, std::uint64_t seed, const EnergyParams& p) {
          GradCheckConfig c;
          c.points = points;
          c.seed = seed;
          const GradCheckResult r = gradient_check(b, p, c);
          return py::dict(py::arg("max_rel_error") = r.max_rel_error, py::arg("p50_rel_error") = r.p50_rel_error,
                          py::arg("failures") = r.failures, py::arg("passed") = r.pass);
        },
        py::arg("bundle"), py::arg("points") = 1000, py::arg("seed") = 0, py::arg("params") = EnergyParams{});
}
