// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

#include "hjbvi/errors.hpp"

using namespace hjbvi;
using testutil::v1;

TEST_CASE("noise-free constant reward") {
  const auto r = testutil::linear_reward(0.5);
  const CounterRng rng(1, Stream::kRewardNoise);
  for (std::uint64_t i = 0; i < 100; ++i) CHECK(sample_intermediate(r, 0.3, v1(0.2), rng, i, 0) == -1.0);
  CHECK(terminal_eval(r, v1(1.0)) == 0.5);
  CHECK(terminal_eval(testutil::linear_reward(0.0), v1(3.0)) == 0.0);
}

TEST_CASE("two-point noise") {
  auto r = testutil::linear_reward(0.0, -1.5);
  r.noise = TwoPointNoise{0.5};
  const CounterRng rng(2, Stream::kRewardNoise);
  const int n = 20000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double R = sample_intermediate(r, 0.5, v1(0.0), rng, static_cast<std::uint64_t>(i), 3);
    CHECK((R == -2.0 || R == -1.0));
    s += R;
  }
  CHECK(std::abs(s / n + 1.5) < 3.0 * 0.5 / std::sqrt(n));
}

TEST_CASE("normalized bound is enforced") {
  auto r = testutil::linear_reward(0.0, -1.0);
  r.noise = UniformNoise{0.2};
  const CounterRng rng(3, Stream::kRewardNoise);
  bool threw = false;
  for (std::uint64_t i = 0; i < 100 && !threw; ++i) {
    try {
      sample_intermediate(r, 0.0, v1(0.0), rng, i, 0);
    } catch (const DataError&) {
      threw = true;
    }
  }
  CHECK(threw);
  auto ok = testutil::linear_reward(0.0, -1.5);
  ok.noise = UniformNoise{0.5};
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const double R = sample_intermediate(ok, 0.0, v1(0.0), rng, i, 0);
    CHECK((R >= -2.0 && R <= -1.0));
  }
}

TEST_CASE("rescaling") {
  auto r = testutil::linear_reward(0.5, 0.0, false);
  r.bound = 1.0;
  const auto [s, alpha] = rescale_problem(r, 1.0);
  CHECK(alpha == 0.5);
  CHECK(s.normalized);
  CHECK(s.r_max == 1.0);
  CHECK(intermediate_eval(s, 0.2, v1(3.0)) == doctest::Approx(-1.5));
  CHECK(terminal_eval(s, v1(1.0)) == doctest::Approx(0.25));
  CHECK(alpha / 1.0 == doctest::Approx(terminal_eval(s, v1(2.0)) / terminal_eval(r, v1(2.0))));
  // r in [-B, B] maps into [-2, -1]
  RewardSpec t;
  t.dim = 1;
  t.bound = 3.0;
  t.terminal = LinearTerminal{v1(0.0), 0.0};
  for (double r0 : {-3.0, 0.0, 3.0}) {
    t.intermediate = ConstantReward{r0};
    const double v = intermediate_eval(rescale_problem(t, 1.0).first, 0.0, v1(0.0));
    CHECK((v >= -2.0 - 1e-15 && v <= -1.0 + 1e-15));
  }
  r.bound = 0.0;
  CHECK_THROWS_AS(rescale_problem(r, 1.0), ConfigError);
}

TEST_CASE("reward json round trip") {
  RewardSpec r;
  r.dim = 1;
  r.intermediate = TanhReward{0.1, 0.5, v1(2.0)};
  r.terminal = TanhTerminal{0.0, 0.8, v1(0.7)};
  r.noise = UniformNoise{0.25};
  r.bound = 1.0;
  const RewardSpec back = RewardSpec::from_json(r.to_json(), 1);
  CHECK(back.digest() == r.digest());
  CHECK(intermediate_eval(back, 0.0, v1(0.3)) == intermediate_eval(r, 0.0, v1(0.3)));
  CHECK(terminal_eval(r, v1(0.3)) == doctest::Approx(0.8 * std::tanh(0.21)));
}
