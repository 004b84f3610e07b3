// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hjbvi/diffusion.hpp"
#include "hjbvi/field.hpp"
#include "hjbvi/fnclass.hpp"
#include "hjbvi/oracle.hpp"
#include "hjbvi/rewards.hpp"
#include "hjbvi/solver.hpp"

namespace hjbvi {

struct DataConfig {
  std::size_t n = 1000;
  std::size_t K = 10;
  double dt = 1e-3;
  std::uint64_t seed = 0;
};

struct ProbePoint {
  double t = 0.0;
  Vec x;
};

struct EvaluationConfig {
  std::vector<ProbePoint> probes;
  std::size_t n_eval = 10000;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  std::size_t holdout_n = 1000;
  bool baseline = true;  // also fit and evaluate classifier guidance
};

struct MirrorDescentConfig {
  std::size_t steps = 2;
  double gamma = 1.0;
  bool policy_penalty = false;
};

struct OutputsConfig {
  std::string directory = "out";
  bool csv = true;
};

/// One experiment, validated before any compute. `source` is the normalized
/// JSON after overrides; its canonical dump is what gets digested.
struct ExperimentConfig {
  json source;
  json problem;  // raw block, materialized by build_problem
  int dim = 1;
  double horizon = 1.0;
  double alpha = 1.0;
  bool rescale = false;
  DataConfig data;
  json basis;
  SolverConfig solver;
  OracleConfig oracle;
  EvaluationConfig evaluation;
  MirrorDescentConfig mirror_descent;
  OutputsConfig outputs;
  std::uint64_t acceptance_seed = 20240601;

  PotentialScaling scaling() const { return oracle.scaling; }
  std::string digest() const;
  std::shared_ptr<const Basis> make_basis() const;

  static ExperimentConfig from_json(const json& j);
};

/// KEY=VALUE with a dotted KEY; VALUE is parsed as JSON when it parses,
/// otherwise taken as a string. Numeric components index arrays.
void apply_override(json& j, const std::string& assignment);

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

/// The materialized problem: effective rewards and alpha (after rescaling or
/// manufacturing) and, when one exists, the exact f.
struct Problem {
  std::shared_ptr<const DiffusionSpec> diffusion;
  std::shared_ptr<const RewardSpec> reward;
  double alpha = 1.0;
  PotentialScaling scaling = PotentialScaling::kAlphaR;
  std::shared_ptr<const ScalarField> truth;
  std::string truth_kind = "none";  // closed_form | manufactured | none
  json info;
};

Problem build_problem(const ExperimentConfig& cfg);

}  // namespace hjbvi
