// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/rewards.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hjbvi/errors.hpp"
#include "hjbvi/overloaded.hpp"

namespace hjbvi {

namespace {

double raw_intermediate(const IntermediateReward& r, double t, const Eigen::Ref<const Vec>& x) {
  return std::visit(Overloaded{
                        [](const ConstantReward& c) { return c.value; },
                        [&](const AffineReward& a) { return a.offset + a.slope.dot(x); },
                        [&](const TanhReward& h) {
                          return h.offset + h.amplitude * std::tanh(h.direction.dot(x));
                        },
                        [&](const CustomReward& c) { return c.fn(t, x); },
                    },
                    r);
}

double raw_terminal(const TerminalReward& y, const Eigen::Ref<const Vec>& x) {
  return std::visit(Overloaded{
                        [&](const LinearTerminal& l) { return l.c0 + l.c.dot(x); },
                        [&](const TanhTerminal& h) {
                          return h.offset + h.amplitude * std::tanh(h.direction.dot(x));
                        },
                        [&](const CustomTerminal& c) { return c.fn(x); },
                    },
                    y);
}

Vec dir_or_ones(const json& j, const char* key, int dim, std::string_view ctx) {
  return j.contains(key) ? vec_from_json(j[key], ctx, dim) : Vec(Vec::Ones(dim));
}

}  // namespace

json RewardSpec::to_json() const {
  json j;
  j["intermediate"] = std::visit(
      Overloaded{
          [](const ConstantReward& c) { return json{{"type", "constant"}, {"value", c.value}}; },
          [](const AffineReward& a) {
            return json{{"type", "affine"}, {"offset", a.offset}, {"slope", vec_to_json(a.slope)}};
          },
          [](const TanhReward& h) {
            return json{{"type", "tanh"},
                        {"offset", h.offset},
                        {"amplitude", h.amplitude},
                        {"direction", vec_to_json(h.direction)}};
          },
          [](const CustomReward& c) { return json{{"type", "custom"}, {"descriptor", c.descriptor}}; },
      },
      intermediate);
  j["terminal"] = std::visit(
      Overloaded{
          [](const LinearTerminal& l) {
            return json{{"type", "linear"}, {"c", vec_to_json(l.c)}, {"c0", l.c0}};
          },
          [](const TanhTerminal& h) {
            return json{{"type", "tanh"},
                        {"offset", h.offset},
                        {"amplitude", h.amplitude},
                        {"direction", vec_to_json(h.direction)}};
          },
          [](const CustomTerminal& c) { return json{{"type", "custom"}, {"descriptor", c.descriptor}}; },
      },
      terminal);
  j["noise"] = std::visit(
      Overloaded{
          [](const NoNoise&) { return json{{"type", "none"}}; },
          [](const UniformNoise& u) { return json{{"type", "uniform"}, {"half_width", u.half_width}}; },
          [](const TwoPointNoise& p) { return json{{"type", "two_point"}, {"spread", p.spread}}; },
      },
      noise);
  j["r_max"] = r_max;
  j["bound"] = bound;
  j["normalized"] = normalized;
  j["manufactured"] = manufactured;
  j["transform"] = {{"r_scale", r_scale}, {"r_shift", r_shift}, {"y_scale", y_scale}};
  return j;
}

RewardSpec RewardSpec::from_json(const json& j, int dim) {
  constexpr std::string_view ctx = "reward";
  require_known_keys(j, {"intermediate", "terminal", "noise", "r_max", "bound", "normalized",
                         "manufactured", "transform"},
                     ctx);
  if (j.value("manufactured", false)) {
    throw ConfigError("reward: manufactured rewards are built from an f* model, not parsed");
  }
  RewardSpec spec;
  spec.dim = dim;

  const json& ij = require_field(j, "intermediate", ctx);
  const std::string itype = get_string(ij, "type", "reward.intermediate");
  if (itype == "constant") {
    require_known_keys(ij, {"type", "value"}, "reward.intermediate");
    spec.intermediate = ConstantReward{get_double(ij, "value", "reward.intermediate")};
  } else if (itype == "affine") {
    require_known_keys(ij, {"type", "offset", "slope"}, "reward.intermediate");
    spec.intermediate =
        AffineReward{get_double_or(ij, "offset", 0.0, "reward.intermediate"),
                     vec_from_json(require_field(ij, "slope", "reward.intermediate"),
                                   "reward.intermediate.slope", dim)};
  } else if (itype == "tanh") {
    require_known_keys(ij, {"type", "offset", "amplitude", "direction"}, "reward.intermediate");
    spec.intermediate =
        TanhReward{get_double_or(ij, "offset", 0.0, "reward.intermediate"),
                   get_double_or(ij, "amplitude", 1.0, "reward.intermediate"),
                   dir_or_ones(ij, "direction", dim, "reward.intermediate.direction")};
  } else {
    throw ConfigError(fmt::format("reward.intermediate: unknown type '{}'", itype));
  }

  const json& tj = require_field(j, "terminal", ctx);
  const std::string ttype = get_string(tj, "type", "reward.terminal");
  if (ttype == "linear") {
    require_known_keys(tj, {"type", "c", "c0"}, "reward.terminal");
    spec.terminal = LinearTerminal{
        vec_from_json(require_field(tj, "c", "reward.terminal"), "reward.terminal.c", dim),
        get_double_or(tj, "c0", 0.0, "reward.terminal")};
  } else if (ttype == "tanh") {
    require_known_keys(tj, {"type", "offset", "amplitude", "direction"}, "reward.terminal");
    spec.terminal = TanhTerminal{get_double_or(tj, "offset", 0.0, "reward.terminal"),
                                 get_double_or(tj, "amplitude", 1.0, "reward.terminal"),
                                 dir_or_ones(tj, "direction", dim, "reward.terminal.direction")};
  } else {
    throw ConfigError(fmt::format("reward.terminal: unknown type '{}'", ttype));
  }

  if (j.contains("noise")) {
    const json& nj = j["noise"];
    const std::string ntype = get_string(nj, "type", "reward.noise");
    if (ntype == "none") {
      require_known_keys(nj, {"type"}, "reward.noise");
      spec.noise = NoNoise{};
    } else if (ntype == "uniform") {
      require_known_keys(nj, {"type", "half_width"}, "reward.noise");
      spec.noise = UniformNoise{get_double(nj, "half_width", "reward.noise")};
    } else if (ntype == "two_point") {
      require_known_keys(nj, {"type", "spread"}, "reward.noise");
      spec.noise = TwoPointNoise{get_double(nj, "spread", "reward.noise")};
    } else {
      throw ConfigError(fmt::format("reward.noise: unknown type '{}'", ntype));
    }
  }
  spec.r_max = get_double_or(j, "r_max", 1.0, ctx);
  spec.bound = get_double_or(j, "bound", 1.0, ctx);
  spec.normalized = j.value("normalized", false);
  if (j.contains("transform")) {
    const json& xj = j["transform"];
    require_known_keys(xj, {"r_scale", "r_shift", "y_scale"}, "reward.transform");
    spec.r_scale = get_double_or(xj, "r_scale", 1.0, "reward.transform");
    spec.r_shift = get_double_or(xj, "r_shift", 0.0, "reward.transform");
    spec.y_scale = get_double_or(xj, "y_scale", 1.0, "reward.transform");
  }
  if (!(spec.r_max > 0.0)) throw ConfigError("reward.r_max must be positive");
  const double w = std::visit(Overloaded{[](const NoNoise&) { return 0.0; },
                                         [](const UniformNoise& u) { return u.half_width; },
                                         [](const TwoPointNoise& p) { return p.spread; }},
                              spec.noise);
  if (!(w >= 0.0)) throw ConfigError("reward.noise width must be non-negative");
  return spec;
}

std::string RewardSpec::digest() const { return digest_hex(dump_canonical(to_json())); }

double intermediate_eval(const RewardSpec& reward, double t, const Eigen::Ref<const Vec>& x) {
  return reward.r_scale * raw_intermediate(reward.intermediate, t, x) + reward.r_shift;
}

double sample_intermediate(const RewardSpec& reward, double t, const Eigen::Ref<const Vec>& x,
                           const CounterRng& rng, std::uint64_t index, std::uint32_t step) {
  const double r = raw_intermediate(reward.intermediate, t, x);
  const double noise = std::visit(
      Overloaded{
          [](const NoNoise&) { return 0.0; },
          [&](const UniformNoise& u) {
            return u.half_width * (2.0 * rng.uniform_pair(index, step, 0)[0] - 1.0);
          },
          [&](const TwoPointNoise& p) {
            return rng.uniform_pair(index, step, 0)[0] < 0.5 ? -p.spread : p.spread;
          },
      },
      reward.noise);
  const double value = reward.r_scale * (r + noise) + reward.r_shift;
  if (reward.normalized && !reward.manufactured) {
    // tiny slack for the rounding of the affine rescale
    const double tol = 1e-12 * (1.0 + reward.r_max);
    if (value > -1.0 + tol || value < -reward.r_max - 1.0 - tol || !std::isfinite(value)) {
      throw DataError(fmt::format(
          "intermediate reward {} at t = {} outside the normalized range [{}, -1]", value, t,
          -reward.r_max - 1.0));
    }
  }
  return value;
}

double terminal_eval(const RewardSpec& reward, const Eigen::Ref<const Vec>& x) {
  return reward.y_scale * raw_terminal(reward.terminal, x);
}

std::pair<RewardSpec, double> rescale_problem(const RewardSpec& reward, double alpha) {
  if (!(reward.bound > 0.0)) throw ConfigError("rescale_problem: bound B must be positive");
  if (!(alpha > 0.0)) throw ConfigError("rescale_problem: alpha must be positive");
  const double c = 1.0 / (2.0 * reward.bound);
  RewardSpec out = reward;
  out.r_scale = reward.r_scale * c;
  out.r_shift = reward.r_shift * c - 1.5;
  out.y_scale = reward.y_scale * c;
  out.r_max = 1.0;
  out.normalized = true;
  return {out, alpha * c};
}

bool is_linear_constant(const RewardSpec& reward) {
  const auto* y = std::get_if<LinearTerminal>(&reward.terminal);
  return y && y->c0 == 0.0 && std::holds_alternative<ConstantReward>(reward.intermediate);
}

}  // namespace hjbvi
