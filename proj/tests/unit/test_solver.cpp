// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

#include "hjbvi/dataset.hpp"
#include "hjbvi/errors.hpp"
#include "hjbvi/oracle.hpp"
#include "hjbvi/solver.hpp"

using namespace hjbvi;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::shared_ptr<const Basis> small_basis() {
  auto spatial = monomials_up_to(1, 2);
  spatial.push_back(RbfFeature{Vec::Constant(1, 0.5), 0.8});
  return std::make_shared<const Basis>(1, 1.0, 2, std::move(spatial));
}

FormContext ou_context(std::size_t n, std::uint64_t seed) {
  const auto diff = testutil::ou1d();
  const auto ds = generate_dataset(diff, testutil::linear_reward(0.5), n, 10, 1e-2, seed);
  return assemble(ds, small_basis(), diff, 1.0);
}

}  // namespace

TEST_CASE("proximal step closed forms") {
  Mat k(2, 2);
  k << 2.0, 1.0, -1.0, 3.0;
  ProximalProblem prob(Mat::Identity(2, 2), k, vec2(1.0, -2.0), 0.0, 1.0);
  const Vec th = vec2(0.1, 0.2);
  const Vec c = prob.residual(th);
  CHECK(prob.step(th, c, 0.0) == th);
  const Vec s = prob.step(th, c, 0.05);
  CHECK((s - (th + 0.05 * c)).norm() < 1e-14);

  bool active = false;
  ProximalProblem id(Mat::Identity(2, 2), Mat::Zero(2, 2), vec2(3.0, 4.0), 0.0, 1.0);
  const Vec b = id.step(Vec::Zero(2), vec2(3.0, 4.0), 1.0, &active);
  CHECK(active);
  CHECK(b(0) == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(b(1) == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("boundary step is the constrained minimizer") {
  Mat g(2, 2);
  g << 2.0, 0.5, 0.5, 1.0;
  ProximalProblem prob(g, Mat::Zero(2, 2), Vec::Zero(2), 0.0, 0.5);
  const Vec th = vec2(0.2, -0.1);
  const Vec c = vec2(4.0, 7.0);
  bool active = false;
  const Vec s = prob.step(th, c, 1.0, &active);
  REQUIRE(active);
  CHECK(s.norm() == doctest::Approx(0.5).epsilon(1e-9));
  auto obj = [&](const Vec& v) { return (v - th).dot(g * (v - th)) - 2.0 * c.dot(v - th); };
  // no point on the circle does better
  for (int k = 0; k < 360; ++k) {
    const double a = k * M_PI / 180.0;
    CHECK(obj(s) <= obj(vec2(0.5 * std::cos(a), 0.5 * std::sin(a))) + 1e-9);
  }
}

TEST_CASE("solver basics on an empirical problem") {
  const auto ctx = ou_context(300, 7);
  SolverConfig cfg;
  cfg.max_iters = 0;
  const Vec init = Vec::Constant(ctx.size(), 0.01);
  auto r0 = fit(ctx, cfg, init);
  CHECK(r0.model.theta() == init);
  CHECK(r0.report.iterations_run == 0);

  cfg.max_iters = 4000;
  cfg.stop_tol = 1e-12;
  auto r = fit(ctx, cfg);
  CHECK(r.report.converged);
  CHECK(r.report.gamma == doctest::Approx(0.5 * r.report.coercivity_floor / r.report.lipschitz_estimate));
  CHECK(r.model.theta().norm() <= cfg.ball_radius + 1e-9);

  // the fixed point does not move
  const Vec th = r.model.theta();
  const Vec again = prox_step(ctx, th, cfg);
  CHECK((again - th).norm() <= 1e-8 * (1 + th.norm()));

  auto r2 = fit(ctx, cfg);
  CHECK(r2.model.theta() == r.model.theta());
  CHECK(r2.report.to_json() == r.report.to_json());
}

TEST_CASE("iterates stay in the ball") {
  const auto ctx = ou_context(200, 8);
  SolverConfig cfg;
  cfg.ball_radius = 0.3;
  cfg.max_iters = 300;
  auto r = fit(ctx, cfg);
  CHECK(r.model.theta().norm() <= 0.3 + 1e-9);
  bool any_active = false;
  for (const auto& row : r.report.trace) {
    CHECK(row.theta_norm <= 0.3 + 1e-9);
    any_active = any_active || row.constraint_active;
  }
  CHECK(any_active);
}

TEST_CASE("population iteration contracts and is Galerkin orthogonal") {
  const auto diff = testutil::ou1d();
  auto fb = std::make_shared<const Basis>(
      1, 1.0, 1, std::vector<SpatialFeature>{MonomialFeature{{0}}, RbfFeature{Vec::Zero(1), 1.0}});
  Vec th(4);
  th << 2.0, 0.3, 0.5, -0.2;
  auto fstar = std::make_shared<const ValueModel>(fb, th, 10.0);
  const auto mu = ou_gauss_hermite_measure(diff, 24, 41);
  const auto mp = manufactured_problem(fstar, diff, 1.0, mu, json{{"case", "solver test"}});
  // a smaller class than f* lives in
  auto basis = std::make_shared<const Basis>(1, 1.0, 1, monomials_up_to(1, 2));
  SolverConfig cfg;
  cfg.max_iters = 400;
  cfg.stop_tol = 0.0;
  auto pf = fit_population(diff, mp.reward, 1.0, basis, cfg, mu, fstar.get());
  const double bound = 1.0 - pf.report.gamma * pf.report.coercivity_floor / 4.0 + 0.05;
  const double d0 = pf.distances.front();
  for (std::size_t m = 2; m + 1 < pf.distances.size(); ++m) {
    if (pf.distances[m] <= 1e-9 * d0) break;
    CHECK(pf.distances[m + 1] / pf.distances[m] <= bound);
  }
  // B[f* - f_bar, phi_j] = 0 for every basis function
  const auto forms = assemble_population(*basis, diff, mp.reward, 1.0, mu, fstar.get());
  const Vec res = forms.bvec - forms.kmat * pf.model.theta();
  CHECK(res.cwiseAbs().maxCoeff() <= 1e-8 * (1 + forms.bvec.cwiseAbs().maxCoeff()));
}

TEST_CASE("a step size far above the threshold is reported as diverging") {
  const auto diff = testutil::ou1d();
  auto fb = std::make_shared<const Basis>(1, 1.0, 1, monomials_up_to(1, 2));
  const Vec th = Vec::LinSpaced(fb->size(), 1.0, 0.2);
  auto fstar = std::make_shared<const ValueModel>(fb, th, 10.0);
  const auto mu = ou_gauss_hermite_measure(diff, 24, 41);
  const auto mp = manufactured_problem(fstar, diff, 1.0, mu, json{{"case", "gamma scan"}});
  SolverConfig cfg;
  cfg.max_iters = 50;
  cfg.stop_tol = 0.0;
  cfg.ball_radius = 1e6;
  auto ok = fit_population(diff, mp.reward, 1.0, fb, cfg, mu, fstar.get());
  cfg.gamma = 50.0 * ok.report.gamma / ok.report.coercivity_floor * ok.report.lipschitz_estimate;
  auto bad = fit_population(diff, mp.reward, 1.0, fb, cfg, mu, fstar.get());
  bool increased = false;
  for (std::size_t m = 1; m < bad.distances_to_fstar.size(); ++m) {
    increased = increased || bad.distances_to_fstar[m] > bad.distances_to_fstar[m - 1];
  }
  CHECK(increased);
  CHECK_FALSE(bad.report.converged);
  CHECK(ok.distances_to_fstar.back() < 1e-3 * ok.distances_to_fstar.front());
}

TEST_CASE("solver config validation") {
  CHECK_THROWS_AS(SolverConfig::from_json(json{{"stop_tol", -1.0}}), ConfigError);
  CHECK_THROWS_AS(SolverConfig::from_json(json{{"ball_radius", 0.0}}), ConfigError);
  CHECK_THROWS_AS(SolverConfig::from_json(json{{"iters", 5}}), ConfigError);
  const auto c = SolverConfig::from_json(json{{"max_iters", 7}});
  CHECK(c.max_iters == 7);
  CHECK(SolverConfig::from_json(c.to_json()).to_json() == c.to_json());
}
