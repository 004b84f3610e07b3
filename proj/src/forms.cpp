// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/forms.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hjbvi/errors.hpp"
#include "hjbvi/overloaded.hpp"

namespace hjbvi {

namespace {

// {d_t + A + kappa * pot} f at (t, x), pot being R or r_t(x).
double apply_operator(const ScalarField& f, const DiffusionSpec& diff, double t,
                      const Eigen::Ref<const Vec>& x, double kappa_pot, Vec& grad, Mat& hess,
                      Vec& drift, double* value_out) {
  const double v = f.value_gradient(t, x, grad);
  f.hessian(t, x, hess);
  diff.drift(t, x, drift);
  if (value_out) *value_out = v;
  return f.time_derivative(t, x) + drift.dot(grad) +
         0.5 * diff.lambda(t).cwiseProduct(hess).sum() + kappa_pot * v;
}

std::vector<double> trapezoid_weights(const std::vector<double>& times) {
  std::vector<double> w(times.size(), 0.0);
  for (std::size_t l = 0; l + 1 < times.size(); ++l) {
    const double h = times[l + 1] - times[l];
    w[l] += 0.5 * h;
    w[l + 1] += 0.5 * h;
  }
  return w;
}

}  // namespace

FormContext assemble(const ObservationDataset& ds, std::shared_ptr<const Basis> basis,
                     const DiffusionSpec& diff, double alpha, PotentialScaling scaling) {
  if (ds.records.empty()) throw ConfigError("assemble: empty dataset");
  if (!basis) throw ConfigError("assemble: missing basis");
  if (basis->dim() != ds.dim || diff.dim() != ds.dim) {
    throw ConfigError(fmt::format("assemble: basis dim {} / diffusion dim {} vs dataset dim {}",
                                  basis->dim(), diff.dim(), ds.dim));
  }
  if (std::abs(ds.horizon - diff.horizon()) > 1e-12 * diff.horizon()) {
    throw ConfigError("assemble: dataset horizon differs from the diffusion horizon");
  }
  if (!(alpha > 0.0)) throw ConfigError("assemble: alpha must be positive");

  FormContext ctx;
  ctx.basis = basis;
  ctx.alpha = alpha;
  ctx.scaling = scaling;
  ctx.n = ds.records.size();
  ctx.K = ds.K;
  ctx.horizon = ds.horizon;
  ctx.lambda_min = diff.lambda_bounds().first;
  const int p = basis->size();
  const int d = ds.dim;
  const std::size_t n = ctx.n;
  const std::size_t K = ctx.K;
  const double kappa = potential_coefficient(alpha, scaling);

  ctx.phi_T.resize(n, p);
  ctx.phi_0.resize(n, p);
  ctx.phi_obs.resize(n * K, p);
  ctx.lphi_obs.resize(n * K, p);
  ctx.exp_Y.resize(n);
  std::vector<Mat> grad_obs(d, Mat(n * K, p));
  const bool const_lambda = diff.time_homogeneous_noise();
  const Mat lambda0 = diff.lambda(0.0);
  const double T = ds.horizon;

#pragma omp parallel
  {
    FeatureBlock fb;
    Vec drift(d);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      const auto& rec = ds.records[i];
      basis->features(T, rec.xT, fb);
      ctx.phi_T.row(i) = fb.phi.transpose();
      basis->features(0.0, rec.x0, fb);
      ctx.phi_0.row(i) = fb.phi.transpose();
      ctx.exp_Y(i) = std::exp(rec.Y / alpha);
      for (std::size_t k = 0; k < K; ++k) {
        const auto& o = rec.obs[k];
        const Mat lam = const_lambda ? lambda0 : diff.lambda(o.t);
        basis->features(o.t, o.x, fb, &lam);
        diff.drift(o.t, o.x, drift);
        const std::size_t row = i * K + k;
        ctx.phi_obs.row(row) = fb.phi.transpose();
        ctx.lphi_obs.row(row) =
            (fb.dphi_dt + fb.grad * drift + fb.half_trace + kappa * o.R * fb.phi).transpose();
        for (int a = 0; a < d; ++a) grad_obs[a].row(row) = fb.grad.col(a).transpose();
      }
    }
  }
  if (!ctx.exp_Y.allFinite()) {
    throw NumericalError("assemble: exp(Y / alpha) overflowed; rescale the rewards");
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  const double w = ctx.obs_weight();
  ctx.gram = inv_n * (ctx.phi_T.transpose() * ctx.phi_T + ctx.phi_0.transpose() * ctx.phi_0);
  ctx.kmat = inv_n * (ctx.phi_T.transpose() * ctx.phi_T);
  if (K > 0) {
    Mat inner = ctx.phi_obs.transpose() * ctx.phi_obs;
    for (int a = 0; a < d; ++a) inner += grad_obs[a].transpose() * grad_obs[a];
    ctx.gram += w * inner;
    ctx.kmat -= w * (ctx.phi_obs.transpose() * ctx.lphi_obs);
  }
  ctx.gram = 0.5 * (ctx.gram + ctx.gram.transpose());
  ctx.bvec = inv_n * (ctx.phi_T.transpose() * ctx.exp_Y);
  return ctx;
}

Vec empirical_bilinear_vector(const FormContext& ctx, const Vec& theta) {
  if (theta.size() != ctx.size()) throw ConfigError("empirical_bilinear: basis mismatch");
  return ctx.bvec - ctx.kmat * theta;
}

double empirical_bilinear(const FormContext& ctx, const Vec& theta, const Vec& eta) {
  if (eta.size() != ctx.size()) throw ConfigError("empirical_bilinear: basis mismatch");
  return eta.dot(empirical_bilinear_vector(ctx, theta));
}

double empirical_bilinear(const FormContext& ctx, const ValueModel& f, const Vec& eta) {
  if (!(f.basis() == *ctx.basis)) throw ConfigError("empirical_bilinear: basis mismatch");
  return empirical_bilinear(ctx, f.theta(), eta);
}

double empirical_bilinear_abs_scale(const FormContext& ctx, const Vec& theta, const Vec& eta) {
  const Vec fT = ctx.phi_T * theta;
  const Vec gT = ctx.phi_T * eta;
  double terminal = ((ctx.exp_Y - fT).cwiseProduct(gT)).cwiseAbs().sum();
  double running = 0.0;
  if (ctx.K > 0) {
    running = ((ctx.lphi_obs * theta).cwiseProduct(ctx.phi_obs * eta)).cwiseAbs().sum();
  }
  return terminal / static_cast<double>(ctx.n) + ctx.obs_weight() * running;
}

double empirical_energy(const FormContext& ctx, const Vec& a, const Vec& b) {
  return a.dot(ctx.gram * b);
}

double empirical_energy_fields(const ObservationDataset& ds, const ScalarField& f,
                               const ScalarField& g) {
  const int d = ds.dim;
  const std::size_t n = ds.records.size();
  const double T = ds.horizon;
  std::vector<double> boundary(n), running(n);
#pragma omp parallel
  {
    Vec gf(d), gg(d);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      const auto& rec = ds.records[i];
      boundary[i] = f.value(0.0, rec.x0) * g.value(0.0, rec.x0) +
                    f.value(T, rec.xT) * g.value(T, rec.xT);
      double acc = 0.0;
      for (const auto& o : rec.obs) {
        const double fv = f.value_gradient(o.t, o.x, gf);
        const double gv = g.value_gradient(o.t, o.x, gg);
        acc += fv * gv + gf.dot(gg);
      }
      running[i] = acc;
    }
  }
  double out = pairwise_sum(boundary) / static_cast<double>(n);
  if (ds.K > 0) out += T / static_cast<double>(n * ds.K) * pairwise_sum(running);
  return out;
}

MarginalMeasure measure_from_cloud(const PathBatch& cloud, std::size_t stride) {
  if (stride < 1 || cloud.steps() % stride != 0) {
    throw ConfigError("measure_from_cloud: stride must divide the number of steps");
  }
  MarginalMeasure mu;
  mu.kind = "cloud";
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < cloud.n_paths; ++i) {
    if (!cloud.is_aborted(i)) kept.push_back(i);
  }
  if (kept.empty()) throw NumericalError("measure_from_cloud: every path aborted");
  const double w = 1.0 / static_cast<double>(kept.size());
  for (std::size_t l = 0; l <= cloud.steps(); l += stride) {
    mu.times.push_back(cloud.grid[l]);
    Mat pts(cloud.dim, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t q = 0; q < kept.size(); ++q) pts.col(q) = cloud.state(kept[q], l);
    mu.points.push_back(std::move(pts));
    mu.weights.push_back(Vec::Constant(static_cast<Eigen::Index>(kept.size()), w));
  }
  mu.time_weights = trapezoid_weights(mu.times);
  return mu;
}

MarginalMeasure ou_gauss_hermite_measure(const DiffusionSpec& diff, int nodes,
                                         std::size_t time_points) {
  const OuDrift* ou = diff.ou();
  if (!ou) throw ConfigError("ou_gauss_hermite_measure: diffusion is not OU");
  if (!diff.time_homogeneous_noise()) {
    throw ConfigError("ou_gauss_hermite_measure: needs a constant diffusion matrix");
  }
  const int d = diff.dim();
  if (d > 2) throw ConfigError("ou_gauss_hermite_measure: d <= 2 only");
  if (time_points < 2) throw ConfigError("ou_gauss_hermite_measure: need >= 2 time points");
  const QuadratureRule rule = gauss_hermite(nodes);
  Vec m0;
  Mat s0;
  std::visit(Overloaded{
                 [&](const PointInit& p) {
                   m0 = p.x0;
                   s0 = Mat::Zero(d, d);
                 },
                 [&](const GaussianInit& g) {
                   m0 = g.mean;
                   s0 = g.cov;
                 },
             },
             diff.init());
  const Mat lambda = diff.lambda(0.0);
  const double th = ou->theta;
  const std::size_t M = d == 1 ? rule.nodes.size() : rule.nodes.size() * rule.nodes.size();

  MarginalMeasure mu;
  mu.kind = "gauss_hermite";
  for (std::size_t l = 0; l < time_points; ++l) {
    const double t = diff.horizon() * static_cast<double>(l) / static_cast<double>(time_points - 1);
    const double decay = std::exp(-th * t);
    // int_0^t e^{-2 th s} ds
    const double growth = std::abs(th) < 1e-12 ? t : (1.0 - decay * decay) / (2.0 * th);
    const Vec mean = ou->mu + decay * (m0 - ou->mu);
    const Mat cov = decay * decay * s0 + growth * lambda;
    const Mat root = std::sqrt(2.0) * psd_sqrt(cov);
    Mat pts(d, static_cast<Eigen::Index>(M));
    Vec wts(static_cast<Eigen::Index>(M));
    const double norm = std::pow(M_PI, -0.5 * d);
    std::size_t q = 0;
    if (d == 1) {
      for (std::size_t a = 0; a < rule.nodes.size(); ++a, ++q) {
        pts(0, q) = mean(0) + root(0, 0) * rule.nodes[a];
        wts(q) = rule.weights[a] * norm;
      }
    } else {
      Vec z(2);
      for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
        for (std::size_t b = 0; b < rule.nodes.size(); ++b, ++q) {
          z << rule.nodes[a], rule.nodes[b];
          pts.col(q) = mean + root * z;
          wts(q) = rule.weights[a] * rule.weights[b] * norm;
        }
      }
    }
    mu.times.push_back(t);
    mu.points.push_back(std::move(pts));
    mu.weights.push_back(std::move(wts));
  }
  mu.time_weights = trapezoid_weights(mu.times);
  return mu;
}

double quadrature_bilinear(const ScalarField& f, const ScalarField& g, const DiffusionSpec& diff,
                           const RewardSpec& reward, double alpha, const MarginalMeasure& mu,
                           PotentialScaling scaling) {
  const int d = diff.dim();
  const double kappa = potential_coefficient(alpha, scaling);
  const std::size_t L = mu.times.size();
  std::vector<double> per_time(L, 0.0);
#pragma omp parallel
  {
    Vec grad(d), drift(d);
    Mat hess(d, d);
#pragma omp for schedule(static)
    for (std::size_t l = 0; l < L; ++l) {
      const double t = mu.times[l];
      const Mat& pts = mu.points[l];
      double acc = 0.0;
      for (Eigen::Index q = 0; q < pts.cols(); ++q) {
        const auto x = pts.col(q);
        const double r = intermediate_eval(reward, t, x);
        const double lf = apply_operator(f, diff, t, x, kappa * r, grad, hess, drift, nullptr);
        acc += mu.weights[l](q) * lf * g.value(t, x);
      }
      per_time[l] = mu.time_weights[l] * acc;
    }
  }
  const Mat& last = mu.points.back();
  const double T = mu.times.back();
  double terminal = 0.0;
  for (Eigen::Index q = 0; q < last.cols(); ++q) {
    terminal += mu.weights.back()(q) * f.value(T, last.col(q)) * g.value(T, last.col(q));
  }
  return terminal - pairwise_sum(per_time);
}

double quadrature_energy(const ScalarField& f, const ScalarField& g, const MarginalMeasure& mu) {
  const int d = f.dim();
  const std::size_t L = mu.times.size();
  std::vector<double> per_time(L, 0.0);
#pragma omp parallel
  {
    Vec gf(d), gg(d);
#pragma omp for schedule(static)
    for (std::size_t l = 0; l < L; ++l) {
      const double t = mu.times[l];
      const Mat& pts = mu.points[l];
      double acc = 0.0;
      for (Eigen::Index q = 0; q < pts.cols(); ++q) {
        const auto x = pts.col(q);
        const double fv = f.value_gradient(t, x, gf);
        const double gv = g.value_gradient(t, x, gg);
        acc += mu.weights[l](q) * (fv * gv + gf.dot(gg));
      }
      per_time[l] = mu.time_weights[l] * acc;
    }
  }
  auto boundary = [&](std::size_t l) {
    double acc = 0.0;
    for (Eigen::Index q = 0; q < mu.points[l].cols(); ++q) {
      const auto x = mu.points[l].col(q);
      acc += mu.weights[l](q) * f.value(mu.times[l], x) * g.value(mu.times[l], x);
    }
    return acc;
  };
  return boundary(0) + boundary(L - 1) + pairwise_sum(per_time);
}

PopulationForms assemble_population(const Basis& basis, const DiffusionSpec& diff,
                                    const RewardSpec& reward, double alpha,
                                    const MarginalMeasure& mu, const ScalarField* fstar,
                                    PotentialScaling scaling) {
  const int d = diff.dim();
  const int p = basis.size();
  const double kappa = potential_coefficient(alpha, scaling);
  const std::size_t L = mu.times.size();
  std::vector<Mat> g_t(L), k_t(L);
  std::vector<Vec> b_t(L);
#pragma omp parallel
  {
    FeatureBlock fb;
    Vec drift(d), grad(d);
    Mat hess(d, d);
#pragma omp for schedule(static)
    for (std::size_t l = 0; l < L; ++l) {
      const double t = mu.times[l];
      const Mat lam = diff.lambda(t);
      const Mat& pts = mu.points[l];
      Mat G = Mat::Zero(p, p);
      Mat Kt = Mat::Zero(p, p);
      Vec bt = Vec::Zero(p);
      for (Eigen::Index q = 0; q < pts.cols(); ++q) {
        const auto x = pts.col(q);
        const double w = mu.weights[l](q);
        basis.features(t, x, fb, &lam);
        diff.drift(t, x, drift);
        const double r = intermediate_eval(reward, t, x);
        const Vec lphi = fb.dphi_dt + fb.grad * drift + fb.half_trace + kappa * r * fb.phi;
        G.noalias() += w * (fb.phi * fb.phi.transpose() + fb.grad * fb.grad.transpose());
        Kt.noalias() += w * (fb.phi * lphi.transpose());
        if (fstar) {
          const double lf = apply_operator(*fstar, diff, t, x, kappa * r, grad, hess, drift, nullptr);
          bt += w * lf * fb.phi;
        }
      }
      g_t[l] = std::move(G);
      k_t[l] = std::move(Kt);
      b_t[l] = std::move(bt);
    }
  }
  PopulationForms out;
  out.gram = Mat::Zero(p, p);
  out.kmat = Mat::Zero(p, p);
  out.bvec = Vec::Zero(p);
  for (std::size_t l = 0; l < L; ++l) {
    out.gram += mu.time_weights[l] * g_t[l];
    out.kmat -= mu.time_weights[l] * k_t[l];
    out.bvec -= mu.time_weights[l] * b_t[l];
  }
  // boundary terms
  FeatureBlock fb;
  for (std::size_t l : {std::size_t{0}, L - 1}) {
    const double t = mu.times[l];
    for (Eigen::Index q = 0; q < mu.points[l].cols(); ++q) {
      const auto x = mu.points[l].col(q);
      const double w = mu.weights[l](q);
      basis.features(t, x, fb);
      out.gram.noalias() += w * fb.phi * fb.phi.transpose();
      if (l == L - 1) {
        out.kmat.noalias() += w * fb.phi * fb.phi.transpose();
        if (fstar) out.bvec += w * fstar->value(t, x) * fb.phi;
      }
    }
  }
  out.gram = 0.5 * (out.gram + out.gram.transpose());
  return out;
}

}  // namespace hjbvi
