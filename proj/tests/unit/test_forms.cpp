// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"

#include "hjbvi/dataset.hpp"
#include "hjbvi/errors.hpp"
#include "hjbvi/forms.hpp"
#include "hjbvi/oracle.hpp"

using namespace hjbvi;

namespace {

std::shared_ptr<const Basis> constant_basis(double T) {
  return std::make_shared<const Basis>(1, T, 0, monomials_up_to(1, 0));
}

std::shared_ptr<const Basis> small_basis(double T) {
  auto spatial = monomials_up_to(1, 2);
  spatial.push_back(RbfFeature{Vec::Constant(1, 0.5), 0.8});
  return std::make_shared<const Basis>(1, T, 2, std::move(spatial));
}

Vec random_vec(std::mt19937_64& gen, int p) {
  std::normal_distribution<double> nd;
  Vec v(p);
  for (auto& x : v) x = nd(gen);
  return v;
}

}  // namespace

TEST_CASE("constant feature energy and symmetry") {
  const auto diff = testutil::ou1d();
  const auto ds = generate_dataset(diff, testutil::linear_reward(0.5), 200, 7, 1e-2, 3);
  const auto ctx = assemble(ds, constant_basis(1.0), diff, 1.0);
  CHECK(ctx.gram(0, 0) == doctest::Approx(2.0 + 1.0).epsilon(1e-13));

  const auto big = assemble(ds, small_basis(1.0), diff, 1.0);
  CHECK((big.gram - big.gram.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Mat> es(big.gram);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("bilinear vector at zero is the terminal moment") {
  const auto diff = testutil::ou1d();
  const auto ds = generate_dataset(diff, testutil::linear_reward(0.5), 300, 3, 1e-2, 4);
  const double alpha = 0.7;
  const auto ctx = assemble(ds, constant_basis(1.0), diff, alpha);
  double mean = 0.0;
  for (const auto& r : ds.records) mean += std::exp(r.Y / alpha) / ds.size();
  CHECK(empirical_bilinear(ctx, Vec::Zero(1), Vec::Ones(1)) == doctest::Approx(mean).epsilon(1e-13));
}

TEST_CASE("empirical forms are linear in the test function") {
  const auto diff = testutil::ou1d();
  const auto ds = generate_dataset(diff, testutil::linear_reward(0.5), 100, 5, 1e-2, 5);
  const auto ctx = assemble(ds, small_basis(1.0), diff, 1.0);
  std::mt19937_64 gen(3);
  const int p = ctx.size();
  const Vec th = random_vec(gen, p), g1 = random_vec(gen, p), g2 = random_vec(gen, p);
  const double lhs = empirical_bilinear(ctx, th, 1.5 * g1 - 2.0 * g2);
  const double rhs = 1.5 * empirical_bilinear(ctx, th, g1) - 2.0 * empirical_bilinear(ctx, th, g2);
  CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(lhs) + std::abs(rhs)));
  CHECK(empirical_bilinear_abs_scale(ctx, th, g1) >= std::abs(empirical_bilinear(ctx, th, g1)) -
                                                          1e-12);
  // Cauchy-Schwarz for the empirical energy
  for (int k = 0; k < 20; ++k) {
    const Vec a = random_vec(gen, p), b = random_vec(gen, p);
    const double ab = empirical_energy(ctx, a, b);
    CHECK(ab * ab <= empirical_energy(ctx, a, a) * empirical_energy(ctx, b, b) * (1 + 1e-12));
  }
}

TEST_CASE("the manufactured solution satisfies the empirical orthogonality in mean") {
  const auto diff = testutil::ou1d();
  const double T = diff.horizon();
  auto fb = std::make_shared<const Basis>(
      1, T, 1, std::vector<SpatialFeature>{MonomialFeature{{0}}, RbfFeature{Vec::Zero(1), 1.0}});
  Vec th(4);
  th << 2.0, 0.3, 0.5, -0.2;  // index l * J + j
  auto fstar = std::make_shared<const ValueModel>(fb, th, 10.0);
  const auto mu = ou_gauss_hermite_measure(diff, 16, 11);
  const auto mp = manufactured_problem(fstar, diff, 1.0, mu, json{{"case", "forms test"}},
                                       UniformNoise{0.3});
  const auto ds = generate_dataset(diff, mp.reward, 2000, 10, 1e-2, 17);
  const auto ctx = assemble(ds, small_basis(T), diff, 1.0);
  std::mt19937_64 gen(5);
  const double w = T / static_cast<double>(ctx.K);
  int outliers = 0;
  for (int k = 0; k < 20; ++k) {
    const Vec g = random_vec(gen, ctx.size());
    // per-record contributions of B_n(f*, g)
    const Vec gT = ctx.phi_T * g;
    const Vec gobs = ctx.phi_obs * g;
    std::vector<double> terms(ctx.n);
    for (std::size_t i = 0; i < ctx.n; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < ctx.K; ++j) {
        const auto& o = ds.records[i].obs[j];
        Vec gr(1);
        Mat h(1, 1);
        const double f = fstar->value_gradient(o.t, o.x, gr);
        fstar->hessian(o.t, o.x, h);
        const double lf = fstar->time_derivative(o.t, o.x) + drift_eval(diff, o.t, o.x).dot(gr) +
                          0.5 * (diff.lambda(o.t).cwiseProduct(h)).sum() + o.R * f;
        v += w * lf * gobs(i * ctx.K + j);
      }
      terms[i] = (ctx.exp_Y(i) - fstar->value(T, ds.records[i].xT)) * gT(i) - v;
    }
    const auto ms = mean_stderr(terms);
    if (std::abs(ms.mean) > 4.0 * ms.std_error) ++outliers;
  }
  CHECK(outliers == 0);
}

TEST_CASE("population forms on constants") {
  const auto diff = testutil::ou1d();
  const auto mu = ou_gauss_hermite_measure(diff, 16, 21);
  Basis b(1, 1.0, 0, monomials_up_to(1, 0));
  const ValueModel one(std::make_shared<const Basis>(b), Vec::Ones(1), 10.0);
  for (double alpha : {0.5, 1.0, 3.0}) {
    // r = -1 makes the running integrand deterministic
    const double bb = quadrature_bilinear(one, one, diff, testutil::linear_reward(0.5), alpha, mu);
    CHECK(bb == doctest::Approx(1.0 + alpha * 1.0).epsilon(1e-12));
  }
  CHECK(quadrature_energy(one, one, mu) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("population energy is an inner product") {
  const auto diff = testutil::ou1d();
  const auto mu = ou_gauss_hermite_measure(diff, 16, 21);
  auto b = small_basis(1.0);
  std::mt19937_64 gen(9);
  for (int k = 0; k < 10; ++k) {
    const ValueModel f(b, random_vec(gen, b->size()), 1e3), g(b, random_vec(gen, b->size()), 1e3);
    const double fg = quadrature_energy(f, g, mu);
    CHECK(fg * fg <= quadrature_energy(f, f, mu) * quadrature_energy(g, g, mu) * (1 + 1e-12));
    CHECK(fg == doctest::Approx(quadrature_energy(g, f, mu)).epsilon(1e-12));
  }
}

TEST_CASE("empirical energy approaches the population energy") {
  const auto diff = testutil::ou1d();
  const auto mu = ou_gauss_hermite_measure(diff, 32, 101);
  auto b = small_basis(1.0);
  std::mt19937_64 gen(13);
  const Vec th = random_vec(gen, b->size()) / 3.0;
  const ValueModel f(b, th, 1e3);
  const auto ds = generate_dataset(diff, testutil::linear_reward(0.5), 4000, 10, 1e-3, 19);
  const auto ctx = assemble(ds, b, diff, 1.0);
  const double pop = quadrature_energy(f, f, mu);
  const double emp = empirical_energy(ctx, th, th);
  CHECK(emp == doctest::Approx(empirical_energy_fields(ds, f, f)).epsilon(1e-10));

  // per-record contributions give the sampling error
  std::vector<double> terms(ctx.n);
  const Vec f0 = ctx.phi_0 * th, fT = ctx.phi_T * th;
  const double w = 1.0 / static_cast<double>(ctx.K);
  for (std::size_t i = 0; i < ctx.n; ++i) {
    double v = f0(i) * f0(i) + fT(i) * fT(i);
    for (std::size_t k = 0; k < ctx.K; ++k) {
      const auto& o = ds.records[i].obs[k];
      Vec gr(1);
      const double fv = f.value_gradient(o.t, o.x, gr);
      v += w * (fv * fv + gr.squaredNorm());
    }
    terms[i] = v;
  }
  const auto ms = mean_stderr(terms);
  CHECK(ms.mean == doctest::Approx(emp).epsilon(1e-10));
  CHECK(std::abs(emp - pop) <= 4.0 * ms.std_error);
}

TEST_CASE("assembly preconditions") {
  const auto diff = testutil::ou1d();
  const auto ds = generate_dataset(diff, testutil::linear_reward(0.5), 10, 2, 1e-2, 3);
  auto b2 = std::make_shared<const Basis>(2, 1.0, 1, monomials_up_to(2, 1));
  CHECK_THROWS_AS(assemble(ds, b2, diff, 1.0), ConfigError);
  CHECK_THROWS_AS(assemble(ds, constant_basis(1.0), diff, 0.0), ConfigError);
  const auto ctx = assemble(ds, constant_basis(1.0), diff, 1.0);
  CHECK_THROWS_AS(empirical_bilinear(ctx, Vec::Zero(2), Vec::Zero(1)), ConfigError);
}
