// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"

#include "hjbvi/errors.hpp"
#include "hjbvi/fnclass.hpp"

using namespace hjbvi;
using testutil::v1;

namespace {

std::shared_ptr<const Basis> mixed_basis(int dim) {
  auto spatial = monomials_up_to(dim, 2);
  Vec c = Vec::Constant(dim, 0.3);
  spatial.push_back(RbfFeature{c, 0.7});
  spatial.push_back(RbfFeature{-c, 1.3});
  return std::make_shared<const Basis>(dim, 2.0, 4, std::move(spatial));
}

}  // namespace

TEST_CASE("legendre time factors") {
  Basis b(1, 2.0, 2, monomials_up_to(1, 0));
  Vec p(3), dp(3);
  b.time_factors(1.0, p, dp);  // s = 0
  CHECK(p(0) == 1.0);
  CHECK(p(1) == doctest::Approx(0.0));
  CHECK(p(2) == doctest::Approx(-0.5));
  b.time_factors(2.0, p, dp);  // s = 1
  CHECK(p(1) == doctest::Approx(1.0));
  CHECK(p(2) == doctest::Approx(1.0));
  CHECK(dp(0) == 0.0);
  CHECK(dp(1) == doctest::Approx(1.0));  // ds/dt = 2/T
  CHECK(b.size() == 3);
}

TEST_CASE("constant and rbf spatial features") {
  Mat lam = Mat::Identity(2, 2);
  Vec c(2);
  c << 0.4, -1.1;
  Basis b(2, 1.0, 0, {MonomialFeature{{0, 0}}, RbfFeature{c, 0.5}});
  FeatureBlock fb;
  b.features(0.3, c, fb, &lam);
  CHECK(fb.grad.row(0).isZero());
  CHECK(fb.phi(1) == doctest::Approx(1.0));
  CHECK(fb.grad.row(1).norm() < 1e-15);
  std::vector<Mat> hess;
  Vec psi(2);
  Mat grad(2, 2);
  b.spatial_eval(c, psi, grad, &hess);
  CHECK((hess[1] + Mat::Identity(2, 2) / 0.25).norm() < 1e-12);
  CHECK(hess[0].isZero());
  // half trace of Lambda Hess at the center
  CHECK(fb.half_trace(1) == doctest::Approx(-0.5 * 2.0 / 0.25));
  CHECK_THROWS_AS(Basis(1, 1.0, 1, {RbfFeature{v1(0.0), 0.0}}), ConfigError);
}

TEST_CASE("unit coefficient on the constant feature") {
  auto b = mixed_basis(2);
  Vec theta = Vec::Zero(b->size());
  theta(0) = 1.0;  // l = 0, psi = 1
  ValueModel f(b, theta, 10.0);
  Vec x(2);
  x << 0.8, -0.2;
  Vec g(2);
  f.gradient(0.7, x, g);
  CHECK(f.value(0.7, x) == doctest::Approx(1.0));
  CHECK(g.isZero());
  CHECK(f.time_derivative(0.7, x) == 0.0);
}

TEST_CASE("analytic derivatives match central differences") {
  auto b = mixed_basis(2);
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ut(0.05, 1.95);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    Vec theta(b->size());
    for (auto& v : theta) v = nd(gen);
    ValueModel f(b, theta, 1e3);
    const double t = ut(gen);
    Vec x(2);
    x << nd(gen), nd(gen);
    Vec g(2), gp(2), gm(2);
    f.gradient(t, x, g);
    Mat hs(2, 2);
    f.hessian(t, x, hs);
    for (int a = 0; a < 2; ++a) {
      Vec xp = x, xm = x;
      xp(a) += h;
      xm(a) -= h;
      const double fd = (f.value(t, xp) - f.value(t, xm)) / (2 * h);
      CHECK(std::abs(g(a) - fd) <= 1e-6 * (1 + std::abs(g(a))));
      f.gradient(t, xp, gp);
      f.gradient(t, xm, gm);
      const Vec fdh = (gp - gm) / (2 * h);
      CHECK((hs.col(a) - fdh).norm() <= 1e-5 * (1 + hs.col(a).norm()));
    }
    const double dt = f.time_derivative(t, x);
    const double fdt = (f.value(t + h, x) - f.value(t - h, x)) / (2 * h);
    CHECK(std::abs(dt - fdt) <= 1e-6 * (1 + std::abs(dt)));
    CHECK((hs - hs.transpose()).norm() < 1e-12);
    Vec vg(2);
    CHECK(f.value_gradient(t, x, vg) == doctest::Approx(f.value(t, x)).epsilon(1e-14));
    CHECK((vg - g).norm() < 1e-12);
  }
}

TEST_CASE("model evaluation is linear in the coefficients") {
  auto b = mixed_basis(1);
  std::mt19937_64 gen(11);
  std::normal_distribution<double> nd;
  Vec t1(b->size()), t2(b->size());
  for (auto& v : t1) v = nd(gen);
  for (auto& v : t2) v = nd(gen);
  ValueModel f1(b, t1, 1e3), f2(b, t2, 1e3), f12(b, 2.0 * t1 - 0.5 * t2, 1e3);
  for (double x : {-1.3, 0.0, 0.9}) {
    const double t = 0.77;
    CHECK(f12.value(t, v1(x)) == doctest::Approx(2 * f1.value(t, v1(x)) - 0.5 * f2.value(t, v1(x))));
    CHECK(f12.time_derivative(t, v1(x)) ==
          doctest::Approx(2 * f1.time_derivative(t, v1(x)) - 0.5 * f2.time_derivative(t, v1(x))));
  }
}

TEST_CASE("ball projection") {
  Vec th(2);
  th << 3.0, 4.0;
  const Vec p = project_ball(th, 1.0);
  CHECK(p(0) == doctest::Approx(0.6));
  CHECK(p(1) == doctest::Approx(0.8));
  CHECK(project_ball(th, 10.0) == th);
  CHECK((project_ball(p, 1.0) - p).norm() < 1e-15);
  CHECK((project_ball(project_ball(th, 2.0), 2.0) - project_ball(th, 2.0)).norm() < 1e-15);
  CHECK_THROWS_AS(project_ball(th, 0.0), ConfigError);
}

TEST_CASE("model json round trip") {
  auto b = mixed_basis(2);
  Vec theta = Vec::LinSpaced(b->size(), -1.0, 1.0) / 3.0;
  ValueModel f(b, theta, 5.0);
  const ValueModel g = ValueModel::from_json(json::parse(f.to_json().dump()));
  CHECK(g.basis() == f.basis());
  CHECK(g.theta() == f.theta());
  CHECK(g.ball_radius() == 5.0);
  Vec x(2);
  x << 0.1, 0.2;
  CHECK(g.value(0.5, x) == f.value(0.5, x));
}

TEST_CASE("basis from json") {
  const json j = json::parse(R"({"time_degree": 2, "monomial_degree": 2,
                                 "rbf_grid": {"lo": -1, "hi": 1, "count": 3, "width": 0.5}})");
  const Basis b = Basis::from_json(j, 1, 1.0);
  CHECK(b.spatial_count() == 6);
  CHECK(b.size() == 18);
  CHECK(Basis::from_json(b.to_json(), 1, 1.0) == b);
  CHECK_THROWS_AS(Basis::from_json(json::parse(R"({"time_degree": 2, "bogus": 1})"), 1, 1.0),
                  ConfigError);
}
