// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "hjbvi/errors.hpp"

namespace hjbvi {

json SolverConfig::to_json() const {
  return json{{"gamma", gamma},       {"max_iters", max_iters}, {"ball_radius", ball_radius},
              {"ridge", ridge},       {"stop_tol", stop_tol},   {"record_trace", record_trace}};
}

SolverConfig SolverConfig::from_json(const json& j) {
  constexpr std::string_view ctx = "solver";
  require_known_keys(j, {"gamma", "max_iters", "ball_radius", "ridge", "stop_tol", "record_trace"},
                     ctx);
  SolverConfig cfg;
  cfg.gamma = get_double_or(j, "gamma", cfg.gamma, ctx);
  const auto iters = get_int_or(j, "max_iters", static_cast<long long>(cfg.max_iters), ctx);
  if (iters < 0) throw ConfigError("solver.max_iters must be >= 0");
  cfg.max_iters = static_cast<std::size_t>(iters);
  cfg.ball_radius = get_double_or(j, "ball_radius", cfg.ball_radius, ctx);
  cfg.ridge = get_double_or(j, "ridge", cfg.ridge, ctx);
  cfg.stop_tol = get_double_or(j, "stop_tol", cfg.stop_tol, ctx);
  cfg.record_trace = j.value("record_trace", cfg.record_trace);
  if (!(cfg.ball_radius > 0.0)) throw ConfigError("solver.ball_radius must be positive");
  if (!(cfg.stop_tol >= 0.0)) throw ConfigError("solver.stop_tol must be >= 0");
  return cfg;
}

json FitReport::to_json() const {
  json rows = json::array();
  for (const auto& r : trace) {
    rows.push_back(json{{"iter", r.iter},
                        {"step_norm", r.step_norm},
                        {"objective", r.objective},
                        {"theta_norm", r.theta_norm},
                        {"constraint_active", r.constraint_active}});
  }
  json j;
  j["iterations_run"] = iterations_run;
  j["converged"] = converged;
  j["gamma"] = gamma;
  j["ridge"] = ridge;
  j["lipschitz_estimate"] = lipschitz_estimate;
  j["coercivity_floor"] = coercivity_floor;
  j["final_theta_norm"] = theta.norm();
  j["config"] = config.to_json();
  j["trace"] = std::move(rows);
  return j;
}

std::string FitReport::trace_csv() const {
  std::string out = "iter,step_norm,objective,theta_norm,constraint_active\n";
  for (const auto& r : trace) {
    out += fmt::format("{},{},{},{},{}\n", r.iter, format_double(r.step_norm),
                       format_double(r.objective), format_double(r.theta_norm),
                       r.constraint_active ? 1 : 0);
  }
  return out;
}

ProximalProblem::ProximalProblem(Mat gram, Mat kmat, Vec bvec, double ridge, double ball_radius)
    : k_(std::move(kmat)), b_(std::move(bvec)), ridge_(ridge), rho_(ball_radius) {
  const auto p = gram.rows();
  if (gram.cols() != p || k_.rows() != p || k_.cols() != p || b_.size() != p) {
    throw ConfigError("ProximalProblem: inconsistent shapes");
  }
  if (!(ridge_ >= 0.0)) throw ConfigError("ridge must be >= 0");
  if (!(rho_ > 0.0)) throw ConfigError("ball_radius must be positive");
  h_ = gram + ridge_ * Mat::Identity(p, p);
  Eigen::SelfAdjointEigenSolver<Mat> eig(h_);
  if (eig.info() != Eigen::Success || !eig.eigenvalues().allFinite()) {
    throw NumericalError("Gram eigendecomposition failed; increase solver.ridge");
  }
  d_ = eig.eigenvalues();
  q_ = eig.eigenvectors();
  if (!(d_.minCoeff() > 0.0)) {
    throw NumericalError(fmt::format(
        "Gram matrix plus ridge is singular (min eigenvalue {}); increase solver.ridge",
        d_.minCoeff()));
  }
}

Vec ProximalProblem::step(const Vec& theta_m, const Vec& c, double gamma, bool* active) const {
  if (active) *active = false;
  if (gamma == 0.0) return theta_m;
  // unconstrained: theta_m + gamma H^{-1} c
  const Vec qc = q_.transpose() * c;
  const Vec unconstrained = theta_m + q_ * (gamma * qc.cwiseQuotient(d_));
  if (unconstrained.norm() <= rho_) return unconstrained;
  if (active) *active = true;
  // (H + mu I) theta = H theta_m + gamma c, with |theta(mu)| = rho
  const Vec v = q_.transpose() * (h_ * theta_m + gamma * c);
  auto norm_at = [&](double mu) { return (v.array() / (d_.array() + mu)).matrix().norm(); };
  double lo = 0.0;
  double hi = std::max(v.norm() / rho_, 1e-300);
  while (norm_at(hi) > rho_) hi *= 2.0;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double nm = norm_at(mid);
    if (nm > rho_) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (std::abs(nm - rho_) <= 1e-10 * rho_ && nm <= rho_) break;
    if (hi - lo <= 1e-16 * hi) break;
  }
  return q_ * (v.array() / (d_.array() + hi)).matrix();
}

double ProximalProblem::lipschitz_estimate(int iterations) const {
  // M = H^{-1/2} K H^{-1/2}; power iteration on M^T M
  const Vec inv_sqrt = d_.cwiseSqrt().cwiseInverse();
  const Mat hm = q_ * inv_sqrt.asDiagonal() * q_.transpose();
  const Mat m = hm * k_ * hm;
  Vec v = Vec::Ones(m.cols()).normalized();
  double sigma = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vec w = m.transpose() * (m * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    const double next = std::sqrt(nw);
    v = w / nw;
    if (std::abs(next - sigma) <= 1e-12 * next) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  return sigma;
}

double default_ridge(const Mat& gram) {
  return 1e-8 * gram.trace() / static_cast<double>(std::max<Eigen::Index>(gram.rows(), 1));
}

namespace {

struct IterationResult {
  Vec theta;
  FitReport report;
  std::vector<Vec> history;
};

IterationResult iterate(const ProximalProblem& prob, const SolverConfig& cfg, double floor_c,
                        const Vec& theta0, bool keep_history) {
  const auto start = std::chrono::steady_clock::now();
  IterationResult out;
  FitReport& rep = out.report;
  rep.config = cfg;
  rep.ridge = prob.ridge();
  rep.coercivity_floor = floor_c;
  rep.lipschitz_estimate = prob.lipschitz_estimate();
  rep.gamma = cfg.gamma > 0.0 ? cfg.gamma
                              : (rep.lipschitz_estimate > 0.0
                                     ? 0.5 * floor_c / rep.lipschitz_estimate
                                     : 0.5 * floor_c);
  Vec theta = project_ball(theta0, cfg.ball_radius);
  if (keep_history) out.history.push_back(theta);
  for (std::size_t m = 0; m < cfg.max_iters; ++m) {
    const Vec c = prob.residual(theta);
    bool active = false;
    Vec next = prob.step(theta, c, rep.gamma, &active);
    if (!next.allFinite()) {
      throw NumericalError(fmt::format("solver produced non-finite coefficients at iteration {}", m));
    }
    const Vec delta = next - theta;
    const double step_norm = prob.h_norm(delta);
    const double objective = delta.dot(prob.metric() * delta) - 2.0 * rep.gamma * c.dot(delta);
    theta = std::move(next);
    rep.iterations_run = m + 1;
    if (cfg.record_trace) {
      rep.trace.push_back({m + 1, step_norm, objective, theta.norm(), active});
    }
    if (keep_history) out.history.push_back(theta);
    const double scale = std::max(prob.h_norm(theta), 1e-300);
    if (step_norm <= cfg.stop_tol * scale) {
      rep.converged = true;
      break;
    }
  }
  rep.theta = theta;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.theta = std::move(theta);
  return out;
}

}  // namespace

Vec prox_step(const FormContext& ctx, const Vec& theta_m, const SolverConfig& cfg) {
  const double ridge = cfg.ridge >= 0.0 ? cfg.ridge : default_ridge(ctx.gram);
  ProximalProblem prob(ctx.gram, ctx.kmat, ctx.bvec, ridge, cfg.ball_radius);
  double gamma = cfg.gamma;
  if (gamma <= 0.0) {
    const double floor_c = std::min({ctx.alpha, ctx.lambda_min, 1.0});
    const double l_hat = prob.lipschitz_estimate();
    gamma = l_hat > 0.0 ? 0.5 * floor_c / l_hat : 0.5 * floor_c;
  }
  return prob.step(theta_m, prob.residual(theta_m), gamma);
}

FitResult fit(const FormContext& ctx, const SolverConfig& cfg, const std::optional<Vec>& warm_start) {
  const double ridge = cfg.ridge >= 0.0 ? cfg.ridge : default_ridge(ctx.gram);
  ProximalProblem prob(ctx.gram, ctx.kmat, ctx.bvec, ridge, cfg.ball_radius);
  const Vec theta0 = warm_start ? *warm_start : Vec(Vec::Zero(ctx.size()));
  if (theta0.size() != ctx.size()) throw ConfigError("fit: warm start has the wrong length");
  auto res = iterate(prob, cfg, std::min({ctx.alpha, ctx.lambda_min, 1.0}), theta0, false);
  return {ValueModel(ctx.basis, res.theta, cfg.ball_radius), std::move(res.report)};
}

FitResult fit(const ObservationDataset& ds, std::shared_ptr<const Basis> basis,
              const DiffusionSpec& diff, double alpha, const SolverConfig& cfg,
              PotentialScaling scaling) {
  const FormContext ctx = assemble(ds, std::move(basis), diff, alpha, scaling);
  return fit(ctx, cfg);
}

PopulationFit fit_population(const DiffusionSpec& diff, const RewardSpec& reward, double alpha,
                             std::shared_ptr<const Basis> basis, const SolverConfig& cfg,
                             const MarginalMeasure& mu, const ScalarField* fstar,
                             PotentialScaling scaling) {
  if (!fstar) throw ConfigError("fit_population: a known f* is required");
  const PopulationForms pf = assemble_population(*basis, diff, reward, alpha, mu, fstar, scaling);
  const double ridge = cfg.ridge >= 0.0 ? cfg.ridge : default_ridge(pf.gram);
  ProximalProblem prob(pf.gram, pf.kmat, pf.bvec, ridge, cfg.ball_radius);
  const double floor_c = std::min({alpha, diff.lambda_bounds().first, 1.0});
  auto res = iterate(prob, cfg, floor_c, Vec::Zero(basis->size()), true);

  // Interior VI solution solves K theta = b exactly; otherwise use the last iterate.
  Vec fbar = res.theta;
  const Eigen::PartialPivLU<Mat> lu(pf.kmat);
  const Vec exact = lu.solve(pf.bvec);
  if (exact.allFinite() && exact.norm() <= cfg.ball_radius &&
      (pf.kmat * exact - pf.bvec).norm() <= 1e-10 * std::max(1.0, pf.bvec.norm())) {
    fbar = exact;
  }
  PopulationFit out{ValueModel(basis, res.theta, cfg.ball_radius), std::move(res.report), {}, {}};
  // |f* - f_theta|^2 = <f*, f*> - 2 theta^T e + theta^T G theta, e_j = <f*, phi_j>
  const int p = basis->size();
  Vec e(p);
  for (int j = 0; j < p; ++j) {
    const ValueModel unit(basis, Vec::Unit(p, j), 1.0);
    e(j) = quadrature_energy(*fstar, unit, mu);
  }
  const double fstar_sq = quadrature_energy(*fstar, *fstar, mu);
  for (const Vec& th : res.history) {
    const Vec to_bar = th - fbar;
    out.distances.push_back(std::sqrt(std::max(0.0, to_bar.dot(pf.gram * to_bar))));
    out.distances_to_fstar.push_back(
        std::sqrt(std::max(0.0, fstar_sq - 2.0 * th.dot(e) + th.dot(pf.gram * th))));
  }
  return out;
}

}  // namespace hjbvi
