// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <variant>

#include "hjbvi/json_util.hpp"
#include "hjbvi/numerics.hpp"
#include "hjbvi/rng.hpp"

namespace hjbvi {

using StateFn = std::function<double(double t, const Eigen::Ref<const Vec>& x)>;

// r_t(x) families
struct ConstantReward {
  double value = -1.0;
};
// offset + slope . x
struct AffineReward {
  double offset = 0.0;
  Vec slope;
};
// offset + amplitude * tanh(direction . x)
struct TanhReward {
  double offset = 0.0;
  double amplitude = 1.0;
  Vec direction;
};
// Arbitrary callable; `descriptor` is what gets serialized and digested.
struct CustomReward {
  StateFn fn;
  json descriptor;
};
using IntermediateReward = std::variant<ConstantReward, AffineReward, TanhReward, CustomReward>;

// y(x) families
struct LinearTerminal {
  Vec c;
  double c0 = 0.0;
};
struct TanhTerminal {
  double offset = 0.0;
  double amplitude = 1.0;
  Vec direction;
};
struct CustomTerminal {
  std::function<double(const Eigen::Ref<const Vec>& x)> fn;
  json descriptor;
};
using TerminalReward = std::variant<LinearTerminal, TanhTerminal, CustomTerminal>;

struct NoNoise {};
// R = r + w * (2U - 1)
struct UniformNoise {
  double half_width = 0.0;
};
// R = r +/- spread with probability 1/2 each
struct TwoPointNoise {
  double spread = 0.0;
};
using RewardNoise = std::variant<NoNoise, UniformNoise, TwoPointNoise>;

/// Intermediate and terminal rewards plus the observation noise model.
/// The effective rewards are r_scale * r_raw + r_shift and y_scale * y_raw,
/// which is how rescale_problem stays exact for every family.
struct RewardSpec {
  int dim = 1;
  IntermediateReward intermediate = ConstantReward{};
  TerminalReward terminal;
  RewardNoise noise = NoNoise{};
  double r_max = 1.0;
  double bound = 1.0;  // B, raw |r|, |y| <= B
  bool normalized = false;
  bool manufactured = false;
  double r_scale = 1.0;
  double r_shift = 0.0;
  double y_scale = 1.0;

  json to_json() const;
  /// Manufactured rewards are built by oracle::manufactured_problem, not parsed.
  static RewardSpec from_json(const json& j, int dim);
  std::string digest() const;
};

/// Exact r_t(x).
double intermediate_eval(const RewardSpec& reward, double t, const Eigen::Ref<const Vec>& x);

/// Noisy observation R with E[R | t, x] = r_t(x). The draw is keyed by
/// (rng, index, step). Throws DataError if normalized and R leaves
/// [-r_max - 1, -1] (manufactured specs are exempt).
double sample_intermediate(const RewardSpec& reward, double t, const Eigen::Ref<const Vec>& x,
                           const CounterRng& rng, std::uint64_t index, std::uint32_t step);

double terminal_eval(const RewardSpec& reward, const Eigen::Ref<const Vec>& x);

/// r~ = r/(2B) - 3/2, y~ = y/(2B), alpha~ = alpha/(2B), r_max = 1.
std::pair<RewardSpec, double> rescale_problem(const RewardSpec& reward, double alpha);

/// True when the terminal reward is y = c . x + c0 and r is constant.
bool is_linear_constant(const RewardSpec& reward);

}  // namespace hjbvi
