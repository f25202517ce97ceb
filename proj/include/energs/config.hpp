#pragma once

#include <string>

#include "energs/energy.hpp"
#include "energs/lidar.hpp"
#include "energs/relax.hpp"
#include "energs/scene.hpp"
#include "energs/validate.hpp"

namespace energs {

/// Everything a run can be configured with. The JSON form has the seven
/// energy keys and `voxel_size` at top level, plus optional `canyon`,
/// `scan`, `relax` and `experiment` objects. Every key is optional; unknown
/// keys are rejected.
struct AppConfig {
  EnergyParams energy;
  double voxel_size = 0.25;
  CanyonParams canyon;
  ScanConfig scan;
  RelaxConfig relax;
  ExperimentConfig experiment;  // its params / voxel_size mirror the top level
};

AppConfig config_from_json(const std::string& text);
AppConfig load_config(const std::string& path);
std::string config_to_json(const AppConfig& cfg);

}  // namespace energs
