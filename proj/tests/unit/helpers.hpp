// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>

#include "hjbvi/diffusion.hpp"
#include "hjbvi/rewards.hpp"

namespace testutil {

using hjbvi::Mat;
using hjbvi::Vec;

inline hjbvi::DiffusionSpec ou1d(double theta = 1.0, double lambda = 2.0, double horizon = 1.0,
                                 bool gaussian_init = true) {
  hjbvi::InitLaw init = gaussian_init ? hjbvi::InitLaw{hjbvi::GaussianInit{Vec::Zero(1), Mat::Identity(1, 1)}}
                                      : hjbvi::InitLaw{hjbvi::PointInit{Vec::Zero(1)}};
  return hjbvi::DiffusionSpec(1, horizon, hjbvi::OuDrift{theta, Vec::Zero(1)},
                              hjbvi::DiffusionMatrix{Mat::Constant(1, 1, lambda), {}}, init);
}

// r = r0, y = c x
inline hjbvi::RewardSpec linear_reward(double c, double r0 = -1.0, bool normalized = true) {
  hjbvi::RewardSpec r;
  r.dim = 1;
  r.intermediate = hjbvi::ConstantReward{r0};
  r.terminal = hjbvi::LinearTerminal{Vec::Constant(1, c), 0.0};
  r.normalized = normalized;
  return r;
}

inline Vec v1(double x) { return Vec::Constant(1, x); }

}  // namespace testutil
