// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

#include "hjbvi/errors.hpp"
#include "hjbvi/fnclass.hpp"
#include "hjbvi/forms.hpp"
#include "hjbvi/oracle.hpp"

using namespace hjbvi;
using testutil::v1;

namespace {

OracleConfig oracle_cfg(std::size_t n, double dt, std::uint64_t seed) {
  OracleConfig c;
  c.n_paths = n;
  c.dt = dt;
  c.seed = seed;
  c.gradient_fd_step = 1e-2;
  return c;
}

}  // namespace

TEST_CASE("closed form examples") {
  const OuParams ou{1.0, 2.0};
  CHECK(ou_closed_form(ou, 0.5, 1.0, 0.0, 0.0, 1.0) ==
        doctest::Approx(std::exp(-1.0 + 0.125 * (1.0 - std::exp(-2.0)))).epsilon(1e-14));
  CHECK(ou_closed_form(ou, 0.5, 2.0, 1.0, 0.8, 1.0) == doctest::Approx(std::exp(0.5 * 0.8 / 2.0)));
  CHECK(ou_closed_form(ou, 0.0, 1.5, 0.4, 2.0, 1.0) == doctest::Approx(std::exp(-1.5 * 0.6)));

  // against Gauss-Hermite on the Gaussian transition law
  const double t = 0.3, x = -0.7, c = 0.5, alpha = 0.8;
  const double tau = 1.0 - t;
  const double m = x * std::exp(-tau), v = 2.0 * (1 - std::exp(-2 * tau)) / 2.0;
  const auto gh = gauss_hermite(40);
  double e = 0.0;
  for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
    e += gh.weights[k] * std::exp(c * (m + std::sqrt(2 * v) * gh.nodes[k]) / alpha) / std::sqrt(M_PI);
  }
  CHECK(ou_closed_form(ou, c, alpha, t, x, 1.0) ==
        doctest::Approx(std::exp(-alpha * tau) * e).epsilon(1e-12));
}

TEST_CASE("closed form field derivatives") {
  const OuClosedForm f(OuParams{1.0, 2.0}, 0.5, 1.0, 1.0);
  const double h = 1e-5;
  for (double t : {0.0, 0.4, 0.9}) {
    for (double x : {-1.0, 0.3}) {
      Vec g(1);
      f.gradient(t, v1(x), g);
      CHECK(g(0) == doctest::Approx((f.value(t, v1(x + h)) - f.value(t, v1(x - h))) / (2 * h)).epsilon(1e-7));
      CHECK(g(0) / f.value(t, v1(x)) == doctest::Approx(f.log_slope(t)));
      CHECK(f.log_slope(t) == doctest::Approx(0.5 * std::exp(-(1.0 - t))));
      if (t > 0.0) {
        const double fd = (f.value(t + h, v1(x)) - f.value(t - h, v1(x))) / (2 * h);
        CHECK(f.time_derivative(t, v1(x)) == doctest::Approx(fd).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("terminal time and deterministic weights") {
  const auto diff = testutil::ou1d();
  const auto cfg = oracle_cfg(500, 1e-2, 1);
  const auto e = fk_value(diff, testutil::linear_reward(0.5), 2.0, 1.0, v1(0.6), cfg);
  CHECK(e.value == doctest::Approx(std::exp(0.5 * 0.6 / 2.0)).epsilon(1e-15));
  CHECK(e.std_error == 0.0);
  for (double alpha : {0.5, 1.0, 2.0}) {
    const auto d = fk_value(diff, testutil::linear_reward(0.0), alpha, 0.25, v1(1.3), cfg);
    CHECK(d.value == doctest::Approx(std::exp(-alpha * 0.75)).epsilon(1e-12));
    CHECK(d.std_error < 1e-12);
  }
  CHECK_THROWS_AS(fk_value(diff, testutil::linear_reward(0.5), 1.0, 1.5, v1(0), cfg), ConfigError);
}

TEST_CASE("feynman-kac agrees with the closed form") {
  const auto diff = testutil::ou1d();
  const auto cfg = oracle_cfg(20000, 2e-3, 77);
  const OuParams ou{1.0, 2.0};
  for (auto [t, x] : {std::pair{0.0, 0.0}, {0.5, -1.0}, {0.75, 1.5}}) {
    const auto e = fk_value(diff, testutil::linear_reward(0.5), 1.0, t, v1(x), cfg);
    const double exact = ou_closed_form(ou, 0.5, 1.0, t, x, 1.0);
    // Euler bias at dt = 2e-3 is far below the Monte Carlo error
    CHECK(std::abs(e.value - exact) <= 3.0 * e.std_error + 2e-3 * exact);
  }
}

TEST_CASE("feynman-kac gradient agrees with the closed form") {
  const auto diff = testutil::ou1d();
  const auto cfg = oracle_cfg(20000, 2e-3, 78);
  const OuClosedForm f(OuParams{1.0, 2.0}, 0.5, 1.0, 1.0);
  for (auto [t, x] : {std::pair{0.2, 0.4}, {0.6, -0.9}}) {
    const auto g = fk_gradient(diff, testutil::linear_reward(0.5), 1.0, t, v1(x), cfg);
    Vec exact(1);
    f.gradient(t, v1(x), exact);
    CHECK(std::abs(g.grad(0) - exact(0)) <= 3.0 * g.grad_std_error(0) + 1e-3);
    CHECK(g.policy(0) == doctest::Approx(g.grad(0) / g.value.value * 2.0));
    CHECK(std::abs(g.policy(0) - 2.0 * f.log_slope(t)) <= 3.0 * g.policy_std_error(0) + 2e-3);
  }
  // symmetric problem: y = 0 gives a flat value in x
  const auto flat = fk_gradient(diff, testutil::linear_reward(0.0), 1.0, 0.3, v1(0.0), cfg);
  CHECK(std::abs(flat.grad(0)) < 1e-12);
}

TEST_CASE("seeded oracle runs are reproducible") {
  const auto diff = testutil::ou1d();
  const auto cfg = oracle_cfg(1000, 1e-2, 5);
  const auto a = fk_value(diff, testutil::linear_reward(0.5), 1.0, 0.1, v1(0.2), cfg);
  const auto b = fk_value(diff, testutil::linear_reward(0.5), 1.0, 0.1, v1(0.2), cfg);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("manufactured rewards") {
  const auto diff = testutil::ou1d();
  const auto mu = ou_gauss_hermite_measure(diff, 16, 11);
  auto b0 = std::make_shared<const Basis>(1, 1.0, 0, monomials_up_to(1, 0));
  auto one = std::make_shared<const ValueModel>(b0, Vec::Ones(1), 10.0);
  const auto m1 = manufactured_problem(one, diff, 1.0, mu, json{{"case", "one"}});
  for (double t : {0.0, 0.5}) {
    for (double x : {-1.0, 2.0}) {
      CHECK(std::abs(intermediate_eval(m1.reward, t, v1(x))) < 1e-14);
      CHECK(std::abs(terminal_eval(m1.reward, v1(x))) < 1e-14);
    }
  }

  // exp(-alpha (T - t)) has r = -1 and y = 0
  const double alpha = 0.7;
  const OuClosedForm decay(OuParams{1.0, 2.0}, 0.0, alpha, 1.0);
  auto dptr = std::make_shared<const OuClosedForm>(decay);
  const auto m2 = manufactured_problem(dptr, diff, alpha, mu, json{{"case", "decay"}});
  CHECK(m2.r_min == doctest::Approx(-1.0));
  CHECK(m2.r_max == doctest::Approx(-1.0));
  CHECK(intermediate_eval(m2.reward, 0.3, v1(0.4)) == doctest::Approx(-1.0));
  CHECK(std::abs(terminal_eval(m2.reward, v1(0.4))) < 1e-14);
  CHECK(m2.reward.manufactured);

  // the PDE residual of f* vanishes under the manufactured reward
  auto b1 = std::make_shared<const Basis>(
      1, 1.0, 2, std::vector<SpatialFeature>{MonomialFeature{{0}}, RbfFeature{v1(0.3), 0.9}});
  Vec th(6);
  th << 2.0, 0.1, 0.4, 0.2, -0.1, 0.05;
  auto fs = std::make_shared<const ValueModel>(b1, th, 10.0);
  const auto m3 = manufactured_problem(fs, diff, alpha, mu, json{{"case", "rbf"}});
  for (double t : {0.1, 0.6}) {
    for (double x : {-0.5, 1.2}) {
      Vec g(1);
      Mat h(1, 1);
      const double f = fs->value_gradient(t, v1(x), g);
      fs->hessian(t, v1(x), h);
      const double res = fs->time_derivative(t, v1(x)) + drift_eval(diff, t, v1(x)).dot(g) +
                         0.5 * 2.0 * h(0, 0) + alpha * intermediate_eval(m3.reward, t, v1(x)) * f;
      CHECK(std::abs(res) < 1e-12);
    }
  }
  CHECK(std::exp(terminal_eval(m3.reward, v1(0.2)) / alpha) ==
        doctest::Approx(fs->value(1.0, v1(0.2))).epsilon(1e-13));
  // f* must be positive on the probes
  auto neg = std::make_shared<const ValueModel>(b0, -Vec::Ones(1), 10.0);
  CHECK_THROWS(manufactured_problem(neg, diff, 1.0, mu, json{{"case", "neg"}}));
}

TEST_CASE("oracle config needs a seed") {
  CHECK_THROWS_AS(OracleConfig::from_json(json{{"n_paths", 10}, {"dt", 0.01}}), ConfigError);
  const auto c = OracleConfig::from_json(json{{"n_paths", 10}, {"dt", 0.01}, {"seed", 4}});
  CHECK(c.seed == 4);
}
