// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "hjbvi/acceptance.hpp"
#include "hjbvi/config.hpp"
#include "hjbvi/errors.hpp"
#include "hjbvi/oracle.hpp"

using namespace hjbvi;

TEST_CASE("overrides") {
  json j = {{"a", {{"b", 1}, {"list", {1, 2, 3}}}}};
  apply_override(j, "a.b=2.5");
  CHECK(j["a"]["b"] == 2.5);
  apply_override(j, "a.list.1=7");
  CHECK(j["a"]["list"][1] == 7);
  apply_override(j, "a.name=hello");
  CHECK(j["a"]["name"] == "hello");
  apply_override(j, R"(a.obj={"x": [1, 2]})");
  CHECK(j["a"]["obj"]["x"][1] == 2);
  apply_override(j, "a.flag=true");
  CHECK(j["a"]["flag"] == true);
  CHECK_THROWS_AS(apply_override(j, "a.b"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "=3"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "a.list.9=1"), ConfigError);
}

TEST_CASE("the bundled instance parses") {
  const auto cfg = ExperimentConfig::from_json(ou_instance_config(1234));
  CHECK(cfg.dim == 1);
  CHECK(cfg.horizon == 1.0);
  CHECK(cfg.alpha == 1.0);
  CHECK(cfg.data.seed == 1234);
  const auto p = build_problem(cfg);
  CHECK(p.truth != nullptr);
  CHECK(p.truth->value(0.0, Vec::Zero(1)) ==
        doctest::Approx(std::exp(-1.0 + 0.125 * (1.0 - std::exp(-2.0)))));
  CHECK(cfg.digest() == ExperimentConfig::from_json(ou_instance_config(1234)).digest());
  CHECK(cfg.digest() != ExperimentConfig::from_json(ou_instance_config(1235)).digest());
}

TEST_CASE("invalid configs are rejected") {
  auto base = ou_instance_config(1);
  {
    auto j = base;
    j["data"]["bogus"] = 1;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  {
    auto j = base;
    j["oracle"].erase("seed");
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  {
    auto j = base;
    j["data"].erase("seed");
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  {
    auto j = base;
    j["problem"]["T"] = 2.0;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  {
    auto j = base;
    j["problem"]["alpha"] = -1.0;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  {
    auto j = base;
    j["basis"]["time_degree"] = -1;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
}

TEST_CASE("load with overrides") {
  const auto dir = std::filesystem::temp_directory_path() / "hjbvi_config_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "c.json";
  std::ofstream(path) << ou_instance_config(5).dump(2);
  const auto cfg = load_config(path, {"data.n=17", "problem.alpha=2"});
  CHECK(cfg.data.n == 17);
  CHECK(cfg.alpha == 2.0);
  CHECK_THROWS_AS(load_config(path, {"data.nn=17"}), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.json", {}), ConfigError);
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(load_config(path, {}), ConfigError);
  std::filesystem::remove_all(dir);
}
