// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "doctest.h"

#include "hjbvi/errors.hpp"
#include "hjbvi/json_util.hpp"
#include "hjbvi/numerics.hpp"
#include "hjbvi/rng.hpp"

using namespace hjbvi;

TEST_CASE("potential coefficient and its tag") {
  CHECK(potential_coefficient(2.0, PotentialScaling::kAlphaR) == 2.0);
  CHECK(potential_coefficient(2.0, PotentialScaling::kROverAlpha) == 0.5);
  CHECK(parse_potential_scaling("alpha_r") == PotentialScaling::kAlphaR);
  CHECK(to_string(PotentialScaling::kROverAlpha) == "r_over_alpha");
  CHECK_THROWS_AS(parse_potential_scaling("alpha"), ConfigError);
}

TEST_CASE("mean and standard error") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto ms = mean_stderr(v);
  CHECK(ms.mean == doctest::Approx(2.5));
  CHECK(ms.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(pairwise_sum(v) == 10.0);
}

TEST_CASE("gauss-hermite integrates polynomials against exp(-z^2)") {
  const auto q = gauss_hermite(20);
  double m0 = 0.0, m2 = 0.0, m4 = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const double z = q.nodes[i];
    m0 += q.weights[i];
    m2 += q.weights[i] * z * z;
    m4 += q.weights[i] * z * z * z * z;
  }
  const double sp = std::sqrt(M_PI);
  CHECK(m0 == doctest::Approx(sp).epsilon(1e-12));
  CHECK(m2 == doctest::Approx(sp / 2).epsilon(1e-12));
  CHECK(m4 == doctest::Approx(3 * sp / 4).epsilon(1e-12));
}

TEST_CASE("psd square root") {
  Mat a(2, 2);
  a << 4.0, 1.0, 1.0, 3.0;
  const Mat s = psd_sqrt(a);
  CHECK((s * s - a).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("counter rng is a pure function of its key") {
  const CounterRng a(42, Stream::kDiffusion), b(42, Stream::kDiffusion), c(42, Stream::kOracle);
  CHECK(a.normal_pair(7, 3, 0) == b.normal_pair(7, 3, 0));
  CHECK(a.normal_pair(7, 3, 0) != c.normal_pair(7, 3, 0));
  CHECK(a.normal_pair(7, 3, 0) != a.normal_pair(8, 3, 0));
  // rough moments
  double s = 0.0, s2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto z = a.normal_pair(static_cast<std::uint64_t>(i), 0, 0);
    s += z[0] + z[1];
    s2 += z[0] * z[0] + z[1] * z[1];
  }
  CHECK(std::abs(s / (2 * n)) < 4.0 / std::sqrt(2.0 * n));
  CHECK(s2 / (2 * n) == doctest::Approx(1.0).epsilon(0.03));
  for (int i = 0; i < 1000; ++i) {
    const auto u = a.uniform_pair(static_cast<std::uint64_t>(i), 1, 2);
    CHECK((u[0] > 0.0 && u[0] < 1.0 && u[1] > 0.0 && u[1] < 1.0));
  }
}

TEST_CASE("canonical json round-trips doubles exactly") {
  const double x = 0.1 + 0.2;
  json j{{"x", x}, {"v", vec_to_json(Vec::Constant(2, 1.0 / 3.0))}};
  const json back = json::parse(dump_canonical(j));
  CHECK(back["x"].get<double>() == x);
  CHECK(vec_from_json(back["v"], "v", 2)(1) == 1.0 / 3.0);
  CHECK(dump_canonical(j) == dump_canonical(back));
}

TEST_CASE("unknown keys are rejected") {
  json j{{"a", 1}, {"b", 2}};
  CHECK_NOTHROW(require_known_keys(j, {"a", "b"}, "ctx"));
  CHECK_THROWS_AS(require_known_keys(j, {"a"}, "ctx"), ConfigError);
}
