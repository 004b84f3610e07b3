// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "hjbvi/errors.hpp"
#include "hjbvi/forms.hpp"

namespace hjbvi {

namespace {

std::uint64_t require_seed(const json& j, std::string_view ctx) {
  const json& s = require_field(j, "seed", ctx);
  if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
    throw ConfigError(fmt::format("{}.seed must be a non-negative integer", ctx));
  }
  return s.get<std::uint64_t>();
}

std::size_t get_count(const json& j, std::string_view key, std::size_t fallback,
                      std::string_view ctx, std::size_t min_value) {
  const auto v = get_int_or(j, key, static_cast<long long>(fallback), ctx);
  if (v < static_cast<long long>(min_value)) {
    throw ConfigError(fmt::format("{}.{} must be >= {}", ctx, key, min_value));
  }
  return static_cast<std::size_t>(v);
}

bool is_index(const std::string& s) {
  return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
}

}  // namespace

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(fmt::format("override '{}' is not KEY=VALUE", assignment));
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &j;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& p = parts[i];
    if (p.empty()) throw ConfigError(fmt::format("override key '{}' has an empty component", key));
    const bool last = i + 1 == parts.size();
    if (node->is_array() && is_index(p)) {
      std::size_t idx = 0;
      std::from_chars(p.data(), p.data() + p.size(), idx);
      if (idx >= node->size()) {
        throw ConfigError(fmt::format("override '{}': index {} out of range", key, idx));
      }
      node = &(*node)[idx];
    } else {
      if (!node->is_object()) {
        throw ConfigError(fmt::format("override '{}': '{}' is not an object", key, p));
      }
      node = &(*node)[p];
    }
    if (last) *node = value;
  }
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  require_known_keys(j, {"problem", "data", "basis", "solver", "oracle", "evaluation",
                         "mirror_descent", "outputs", "acceptance"},
                     "config");
  ExperimentConfig cfg;
  cfg.source = j;

  // problem
  const json& pj = require_field(j, "problem", "config");
  require_known_keys(pj, {"diffusion", "reward", "manufactured", "alpha", "rescale", "T"},
                     "problem");
  cfg.problem = pj;
  const DiffusionSpec diff = DiffusionSpec::from_json(require_field(pj, "diffusion", "problem"));
  cfg.dim = diff.dim();
  cfg.horizon = diff.horizon();
  if (pj.contains("T") && std::abs(get_double(pj, "T", "problem") - cfg.horizon) > 1e-12) {
    throw ConfigError(fmt::format("problem.T = {} disagrees with diffusion.horizon = {}",
                                  get_double(pj, "T", "problem"), cfg.horizon));
  }
  cfg.alpha = get_double(pj, "alpha", "problem");
  if (!(cfg.alpha > 0.0)) throw ConfigError("problem.alpha must be positive");
  cfg.rescale = pj.value("rescale", false);
  const bool has_reward = pj.contains("reward");
  const bool has_manufactured = pj.contains("manufactured");
  if (has_reward == has_manufactured) {
    throw ConfigError("problem needs exactly one of 'reward' and 'manufactured'");
  }
  if (has_reward) {
    (void)RewardSpec::from_json(pj["reward"], cfg.dim);
  } else {
    if (cfg.rescale) throw ConfigError("problem.rescale does not apply to manufactured rewards");
    require_known_keys(pj["manufactured"], {"fstar", "noise"}, "problem.manufactured");
    const json& fj = require_field(pj["manufactured"], "fstar", "problem.manufactured");
    require_known_keys(fj, {"basis", "theta"}, "problem.manufactured.fstar");
    require_field(fj, "basis", "problem.manufactured.fstar");
    require_field(fj, "theta", "problem.manufactured.fstar");
  }

  // data
  const json& dj = require_field(j, "data", "config");
  require_known_keys(dj, {"n", "K", "dt", "seed"}, "data");
  cfg.data.n = get_count(dj, "n", cfg.data.n, "data", 1);
  cfg.data.K = get_count(dj, "K", cfg.data.K, "data", 1);
  cfg.data.dt = get_double_or(dj, "dt", cfg.data.dt, "data");
  cfg.data.seed = require_seed(dj, "data");
  (void)TimeGrid(0.0, cfg.horizon, cfg.data.dt);

  cfg.basis = require_field(j, "basis", "config");
  (void)Basis::from_json(cfg.basis, cfg.dim, cfg.horizon);

  cfg.solver = j.contains("solver") ? SolverConfig::from_json(j["solver"]) : SolverConfig{};
  cfg.oracle = OracleConfig::from_json(require_field(j, "oracle", "config"));

  // evaluation
  const json& ej = require_field(j, "evaluation", "config");
  require_known_keys(ej, {"probes", "n_eval", "dt", "seed", "holdout_n", "baseline"}, "evaluation");
  cfg.evaluation.n_eval = get_count(ej, "n_eval", cfg.evaluation.n_eval, "evaluation", 2);
  cfg.evaluation.dt = get_double_or(ej, "dt", cfg.evaluation.dt, "evaluation");
  (void)TimeGrid(0.0, cfg.horizon, cfg.evaluation.dt);
  cfg.evaluation.seed = require_seed(ej, "evaluation");
  cfg.evaluation.holdout_n = get_count(ej, "holdout_n", cfg.evaluation.holdout_n, "evaluation", 2);
  cfg.evaluation.baseline = ej.value("baseline", true);
  if (ej.contains("probes")) {
    for (const auto& p : ej["probes"]) {
      require_known_keys(p, {"t", "x"}, "evaluation.probes");
      ProbePoint pp{get_double(p, "t", "evaluation.probes"),
                    vec_from_json(require_field(p, "x", "evaluation.probes"), "evaluation.probes.x",
                                  cfg.dim)};
      if (!(pp.t >= 0.0 && pp.t <= cfg.horizon)) {
        throw ConfigError(fmt::format("evaluation probe t = {} outside [0, {}]", pp.t, cfg.horizon));
      }
      cfg.evaluation.probes.push_back(std::move(pp));
    }
  }

  if (j.contains("mirror_descent")) {
    const json& mj = j["mirror_descent"];
    require_known_keys(mj, {"steps", "gamma", "policy_penalty"}, "mirror_descent");
    cfg.mirror_descent.steps = get_count(mj, "steps", cfg.mirror_descent.steps, "mirror_descent", 1);
    cfg.mirror_descent.gamma = get_double_or(mj, "gamma", cfg.mirror_descent.gamma, "mirror_descent");
    if (!(cfg.mirror_descent.gamma > 0.0)) throw ConfigError("mirror_descent.gamma must be positive");
    cfg.mirror_descent.policy_penalty = mj.value("policy_penalty", false);
  }

  if (j.contains("outputs")) {
    const json& oj = j["outputs"];
    require_known_keys(oj, {"directory", "formats"}, "outputs");
    if (oj.contains("directory")) cfg.outputs.directory = get_string(oj, "directory", "outputs");
    if (oj.contains("formats")) {
      cfg.outputs.csv = false;
      for (const auto& f : oj["formats"]) {
        const auto s = f.get<std::string>();
        if (s == "csv") {
          cfg.outputs.csv = true;
        } else if (s != "json") {
          throw ConfigError(fmt::format("outputs.formats: unknown format '{}'", s));
        }
      }
    }
  }

  if (j.contains("acceptance")) {
    require_known_keys(j["acceptance"], {"seed"}, "acceptance");
    cfg.acceptance_seed = require_seed(j["acceptance"], "acceptance");
  }
  return cfg;
}

std::string ExperimentConfig::digest() const { return digest_hex(dump_canonical(source)); }

std::shared_ptr<const Basis> ExperimentConfig::make_basis() const {
  return std::make_shared<const Basis>(Basis::from_json(basis, dim, horizon));
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  json j = json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw ConfigError(fmt::format("config '{}' is not valid JSON", path.string()));
  for (const auto& o : overrides) apply_override(j, o);
  return ExperimentConfig::from_json(j);
}

Problem build_problem(const ExperimentConfig& cfg) {
  Problem p;
  p.diffusion = std::make_shared<const DiffusionSpec>(
      DiffusionSpec::from_json(cfg.problem.at("diffusion")));
  p.alpha = cfg.alpha;
  p.scaling = cfg.scaling();
  const DiffusionSpec& diff = *p.diffusion;

  if (cfg.problem.contains("manufactured")) {
    const json& mj = cfg.problem["manufactured"];
    const json& fj = mj["fstar"];
    auto basis = std::make_shared<const Basis>(Basis::from_json(fj["basis"], cfg.dim, cfg.horizon));
    Vec theta = vec_from_json(fj["theta"], "problem.manufactured.fstar.theta", basis->size());
    const double radius = std::max(1.0, 2.0 * theta.norm());
    auto fstar = std::make_shared<const ValueModel>(basis, std::move(theta), radius);

    RewardNoise noise = NoNoise{};
    if (mj.contains("noise")) {
      // reuse the reward parser for the noise block
      json stub{{"intermediate", {{"type", "constant"}, {"value", -1.0}}},
                {"terminal", {{"type", "linear"}, {"c", json::array()}}},
                {"noise", mj["noise"]}};
      for (int i = 0; i < cfg.dim; ++i) stub["terminal"]["c"].push_back(0.0);
      noise = RewardSpec::from_json(stub, cfg.dim).noise;
    }
    const MarginalMeasure probes =
        diff.ou() && cfg.dim <= 2
            ? ou_gauss_hermite_measure(diff, 24, 41)
            : measure_from_cloud(simulate_paths(diff, 256, cfg.data.dt, mix64(cfg.data.seed)), 10);
    json descriptor{{"type", "manufactured"}, {"fstar", fstar->to_json()}};
    ManufacturedProblem mp =
        manufactured_problem(fstar, diff, p.alpha, probes, std::move(descriptor), noise, p.scaling);
    p.reward = std::make_shared<const RewardSpec>(std::move(mp.reward));
    p.truth = fstar;
    p.truth_kind = "manufactured";
    p.info = {{"r_min", mp.r_min}, {"r_max", mp.r_max}, {"f_min", mp.f_min}};
    return p;
  }

  RewardSpec reward = RewardSpec::from_json(cfg.problem.at("reward"), cfg.dim);
  if (cfg.rescale) {
    auto [rescaled, alpha] = rescale_problem(reward, p.alpha);
    p.info["rescaled_from_alpha"] = p.alpha;
    reward = std::move(rescaled);
    p.alpha = alpha;
  }
  p.reward = std::make_shared<const RewardSpec>(std::move(reward));
  const OuDrift* ou = diff.ou();
  if (ou && cfg.dim == 1 && ou->mu(0) == 0.0 && diff.time_homogeneous_noise() &&
      is_linear_constant(*p.reward)) {
    p.truth = std::make_shared<const OuClosedForm>(
        OuClosedForm::from_problem(diff, *p.reward, p.alpha, p.scaling));
    p.truth_kind = "closed_form";
  }
  p.info["alpha"] = p.alpha;
  return p;
}

}  // namespace hjbvi
