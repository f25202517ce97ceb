#include "doctest.h"
#include "energs/config.hpp"

using namespace energs;

TEST_CASE("empty config yields defaults") {
  const AppConfig c = config_from_json("{}");
  CHECK(c.energy.w_occ == 1.0);
  CHECK(c.energy.sigma_unk == 2.0);
  CHECK(c.voxel_size == 0.25);
  CHECK(c.relax.mode == RelaxMode::Decoupled);
}

TEST_CASE("known keys are applied and mirrored into the experiment config") {
  const AppConfig c = config_from_json(R"({
    "w_occ": 2.0, "sigma_occ": 1.0, "w_unk": 0.5, "sigma_unk": 2.0,
    "lambda_free": 1.5, "delta": 0.4, "tau": 0.3, "voxel_size": 0.5,
    "scan": {"azimuth_count": 90, "noise_stddev": 0.0},
    "relax": {"mode": "joint", "iterations": 7, "tau_margin": 0.25},
    "experiment": {"t1_particles": 10, "ms_margins": [0.2, 0.4]}
  })");
  CHECK(c.energy.w_occ == 2.0);
  CHECK(c.energy.tau == 0.3);
  CHECK(c.voxel_size == 0.5);
  CHECK(c.scan.azimuth_count == 90);
  CHECK(c.relax.mode == RelaxMode::Joint);
  CHECK(c.relax.iterations == 7);
  CHECK(c.experiment.t1_particles == 10);
  CHECK(c.experiment.ms_margins == std::vector<double>{0.2, 0.4});
  CHECK(c.experiment.params.w_occ == 2.0);
  CHECK(c.experiment.voxel_size == 0.5);
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_WITH_AS(config_from_json(R"({"w_occc": 1})"), doctest::Contains("w_occc"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"relax": {"speed": 1}})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"scan": {"fov": 1}})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"experiment": {"x": 1}})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"canyon": {"towers": 3}})"), std::invalid_argument);
}

TEST_CASE("invalid values are rejected") {
  CHECK_THROWS(config_from_json(R"({"relax": {"mode": "sideways"}})"));
  CHECK_THROWS(config_from_json(R"({"tau": -1})"));
  CHECK_THROWS(config_from_json(R"({"w_unk": 10})"));
  CHECK_THROWS(config_from_json(R"({"voxel_size": 0})"));
  CHECK_THROWS(config_from_json("not json"));
}

TEST_CASE("config serializes and parses back") {
  AppConfig c = config_from_json(R"({"w_occ": 3.0, "relax": {"mode": "joint"}})");
  const AppConfig back = config_from_json(config_to_json(c));
  CHECK(back.energy.w_occ == 3.0);
  CHECK(back.relax.mode == RelaxMode::Joint);
  CHECK(config_to_json(back) == config_to_json(c));
}
