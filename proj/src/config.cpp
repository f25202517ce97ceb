#include "energs/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace energs {

namespace {

using nlohmann::json;
using Setter = std::function<void(const json&)>;

void read_object(const json& j, const std::string& where, const std::map<std::string, Setter>& keys) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    const auto it = keys.find(k);
    if (it == keys.end()) throw std::invalid_argument("unknown config key: " + where + k);
    try {
      it->second(v);
    } catch (const json::exception& e) {
      throw std::invalid_argument("bad value for " + where + k + ": " + e.what());
    }
  }
}

template <typename T>
Setter set(T& field) {
  return [&field](const json& v) { field = v.get<T>(); };
}

Setter set_vec3(Vec3& field) {
  return [&field](const json& v) {
    if (!v.is_array() || v.size() != 3) throw std::invalid_argument("expected [x, y, z]");
    field = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  };
}

}  // namespace

AppConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  AppConfig c;
  auto& e = c.energy;
  auto& x = c.experiment;
  std::map<std::string, Setter> top{
      {"w_occ", set(e.w_occ)}, {"sigma_occ", set(e.sigma_occ)}, {"w_unk", set(e.w_unk)},
      {"sigma_unk", set(e.sigma_unk)}, {"lambda_free", set(e.lambda_free)}, {"delta", set(e.delta)},
      {"tau", set(e.tau)}, {"voxel_size", set(c.voxel_size)}};
  top["canyon"] = [&](const json& v) {
    auto& p = c.canyon;
    read_object(v, "canyon.",
                {{"length", set(p.length)}, {"half_width", set(p.half_width)},
                 {"wall_thickness", set(p.wall_thickness)}, {"wall_height", set(p.wall_height)},
                 {"wall_jitter", set(p.wall_jitter)}, {"height_jitter", set(p.height_jitter)},
                 {"segments_per_side", set(p.segments_per_side)}, {"bridge_width", set(p.bridge_width)},
                 {"bridge_thickness", set(p.bridge_thickness)}, {"bridge_z", set(p.bridge_z)},
                 {"domain_half_y", set(p.domain_half_y)}, {"domain_height", set(p.domain_height)},
                 {"ground_depth", set(p.ground_depth)}, {"sensor_height", set(p.sensor_height)},
                 {"sensor_count", set(p.sensor_count)}, {"sensor_spacing", set(p.sensor_spacing)},
                 {"fov_max_deg", set(p.fov_max_deg)}});
  };
  top["scan"] = [&](const json& v) {
    auto& s = c.scan;
    read_object(v, "scan.",
                {{"azimuth_count", set(s.azimuth_count)}, {"elevation_count", set(s.elevation_count)},
                 {"elevation_min_deg", set(s.elevation_min_deg)}, {"elevation_max_deg", set(s.elevation_max_deg)},
                 {"max_range", set(s.max_range)}, {"noise_stddev", set(s.noise_stddev)},
                 {"noise_seed", set(s.noise_seed)}});
  };
  top["relax"] = [&](const json& v) {
    auto& r = c.relax;
    read_object(v, "relax.",
                {{"eta_mu", set(r.eta_mu)}, {"max_step_factor", set(r.max_step_factor)}, {"t_prune", set(r.t_prune)},
                 {"prune_enabled", set(r.prune_enabled)}, {"tau_margin", set(r.tau_margin)},
                 {"iterations", set(r.iterations)}, {"joint_lambda", set(r.joint_lambda)},
                 {"eta_app", set(r.eta_app)}, {"mode", [&](const json& m) {
                    const auto s = m.get<std::string>();
                    if (s == "decoupled") r.mode = RelaxMode::Decoupled;
                    else if (s == "joint") r.mode = RelaxMode::Joint;
                    else throw std::invalid_argument("relax.mode must be decoupled or joint");
                  }}});
  };
  top["experiment"] = [&](const json& v) {
    read_object(v, "experiment.",
                {{"t1_particles", set(x.t1_particles)}, {"t1_max_iterations", set(x.t1_max_iterations)},
                 {"t1_min_exit_fraction", set(x.t1_min_exit_fraction)},
                 {"t1_min_control_trapped", set(x.t1_min_control_trapped)},
                 {"t1_control_well_center", set_vec3(x.t1_control_well.center)},
                 {"t1_control_well_amplitude", set(x.t1_control_well.amplitude)},
                 {"t1_control_well_width", set(x.t1_control_well.width)},
                 {"t1_control_joint_lambda", set(x.t1_control_joint_lambda)},
                 {"t1_control_iterations", set(x.t1_control_iterations)},
                 {"t2_pairs", set(x.t2_pairs)}, {"t2_pair_distance_factor", set(x.t2_pair_distance_factor)},
                 {"t2_slack", set(x.t2_slack)}, {"t2_irregular_tolerance", set(x.t2_irregular_tolerance)},
                 {"t2_histogram_bins", set(x.t2_histogram_bins)}, {"t2_trace_particles", set(x.t2_trace_particles)},
                 {"t2_trace_iterations", set(x.t2_trace_iterations)}, {"t2_trace_tolerance", set(x.t2_trace_tolerance)},
                 {"t2_photo_wells", set(x.t2_photo_wells)}, {"t2_photo_width", set(x.t2_photo_width)},
                 {"t2_photo_pareto_alpha", set(x.t2_photo_pareto_alpha)},
                 {"t2_photo_amplitude_scale", set(x.t2_photo_amplitude_scale)},
                 {"p3_d", set(x.p3_d)}, {"p3_w", set(x.p3_w)}, {"p3_sigma_factors", set(x.p3_sigma_factors)},
                 {"p3_max_final_ratio", set(x.p3_max_final_ratio)}, {"p3_tail_ratio_lo", set(x.p3_tail_ratio_lo)},
                 {"p3_tail_ratio_hi", set(x.p3_tail_ratio_hi)}, {"p3_grid_sigma_unk", set(x.p3_grid_sigma_unk)},
                 {"p3_grid_particles", set(x.p3_grid_particles)}, {"p3_grid_iterations", set(x.p3_grid_iterations)},
                 {"p3_max_move_factor", set(x.p3_max_move_factor)}, {"p3_deep_unk_voxels", set(x.p3_deep_unk_voxels)},
                 {"p3_deep_occ_sigmas", set(x.p3_deep_occ_sigmas)},
                 {"rs_ratios", set(x.rs_ratios)}, {"rs_geo_mean", set(x.rs_geo_mean)},
                 {"rs_baseline", set(x.rs_baseline)}, {"rs_low", set(x.rs_low)}, {"rs_high", set(x.rs_high)},
                 {"rs_high_band", set(x.rs_high_band)}, {"rs_particles", set(x.rs_particles)},
                 {"rs_iterations", set(x.rs_iterations)},
                 {"ms_margins", set(x.ms_margins)}, {"ms_particles", set(x.ms_particles)},
                 {"ms_iterations", set(x.ms_iterations)}, {"ms_t_prune", set(x.ms_t_prune)},
                 {"ms_max_leak_pct", set(x.ms_max_leak_pct)},
                 {"ms_max_leak_no_prune_pct", set(x.ms_max_leak_no_prune_pct)}});
  };
  read_object(j, "", top);
  c.energy.validate();
  c.scan.validate();
  c.relax.validate();
  if (!(c.voxel_size > 0.0)) throw std::invalid_argument("voxel_size must be positive");
  x.params = c.energy;
  x.voxel_size = c.voxel_size;
  return c;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const AppConfig& c) {
  json j;
  j["w_occ"] = c.energy.w_occ;
  j["sigma_occ"] = c.energy.sigma_occ;
  j["w_unk"] = c.energy.w_unk;
  j["sigma_unk"] = c.energy.sigma_unk;
  j["lambda_free"] = c.energy.lambda_free;
  j["delta"] = c.energy.delta;
  j["tau"] = c.energy.tau;
  j["voxel_size"] = c.voxel_size;
  j["scan"] = {{"azimuth_count", c.scan.azimuth_count},         {"elevation_count", c.scan.elevation_count},
               {"elevation_min_deg", c.scan.elevation_min_deg}, {"elevation_max_deg", c.scan.elevation_max_deg},
               {"max_range", c.scan.max_range},                 {"noise_stddev", c.scan.noise_stddev},
               {"noise_seed", c.scan.noise_seed}};
  j["relax"] = {{"eta_mu", c.relax.eta_mu},
                {"max_step_factor", c.relax.max_step_factor},
                {"t_prune", c.relax.t_prune},
                {"prune_enabled", c.relax.prune_enabled},
                {"tau_margin", c.relax.tau_margin},
                {"iterations", c.relax.iterations},
                {"mode", c.relax.mode == RelaxMode::Joint ? "joint" : "decoupled"},
                {"joint_lambda", c.relax.joint_lambda},
                {"eta_app", c.relax.eta_app}};
  return j.dump(2) + "\n";
}

}  // namespace energs
