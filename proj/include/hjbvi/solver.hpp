// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "hjbvi/forms.hpp"
#include "hjbvi/fnclass.hpp"

namespace hjbvi {

struct SolverConfig {
  double gamma = 0.0;         // <= 0: 0.5 * min(alpha, lambda_min, 1) / L_hat
  std::size_t max_iters = 500;
  double ball_radius = 100.0;
  double ridge = -1.0;        // < 0: 1e-8 * trace(G) / p
  double stop_tol = 1e-8;
  bool record_trace = true;

  json to_json() const;
  static SolverConfig from_json(const json& j);
};

struct TraceRow {
  std::size_t iter = 0;
  double step_norm = 0.0;  // |theta_{m+1} - theta_m|_G
  double objective = 0.0;  // proximal objective at theta_{m+1}
  double theta_norm = 0.0;
  bool constraint_active = false;
};

struct FitReport {
  std::size_t iterations_run = 0;
  std::vector<TraceRow> trace;
  double gamma = 0.0;
  double ridge = 0.0;
  double lipschitz_estimate = 0.0;  // L_hat
  double coercivity_floor = 0.0;    // min(alpha, lambda_min, 1)
  bool converged = false;
  double wall_seconds = 0.0;  // not serialized in to_json (kept out of deterministic reports)
  Vec theta;
  SolverConfig config;

  /// Deterministic content only.
  json to_json() const;
  /// iter,step_norm,objective,theta_norm,constraint_active
  std::string trace_csv() const;
};

/// The quadratic metric H = G + ridge I with a cached eigendecomposition,
/// the affine operator c(theta) = b - K theta, and the ball radius.
class ProximalProblem {
 public:
  ProximalProblem(Mat gram, Mat kmat, Vec bvec, double ridge, double ball_radius);

  const Mat& metric() const { return h_; }
  Vec residual(const Vec& theta) const { return b_ - k_ * theta; }
  double ball_radius() const { return rho_; }
  double ridge() const { return ridge_; }

  /// argmin (th - th_m)^T H (th - th_m) - 2 gamma c^T (th - th_m) over |th| <= rho.
  Vec step(const Vec& theta_m, const Vec& c, double gamma, bool* active = nullptr) const;

  /// Power-iteration estimate of |H^{-1/2} K H^{-1/2}|_2.
  double lipschitz_estimate(int iterations = 500) const;

  double h_norm(const Vec& v) const { return std::sqrt(std::max(0.0, v.dot(h_ * v))); }

 private:
  Mat h_, k_;
  Vec b_;
  double ridge_, rho_;
  Mat q_;  // eigenvectors of H
  Vec d_;  // eigenvalues of H
};

double default_ridge(const Mat& gram);

/// One proximal step on the empirical problem.
Vec prox_step(const FormContext& ctx, const Vec& theta_m, const SolverConfig& cfg);

struct FitResult {
  ValueModel model;
  FitReport report;
};

/// Proximal iteration on the empirical forms from theta0 (zero by default).
FitResult fit(const FormContext& ctx, const SolverConfig& cfg,
              const std::optional<Vec>& warm_start = std::nullopt);
FitResult fit(const ObservationDataset& ds, std::shared_ptr<const Basis> basis,
              const DiffusionSpec& diff, double alpha, const SolverConfig& cfg,
              PotentialScaling scaling = PotentialScaling::kAlphaR);

struct PopulationFit {
  ValueModel model;
  FitReport report;
  /// |f^(m) - f_bar|_{S,T} for m = 0..iterations, f_bar the converged point.
  std::vector<double> distances;
  /// |f^(m) - f*|_{S,T}
  std::vector<double> distances_to_fstar;
};

/// The same iteration on quadrature (population) forms; f* is required.
PopulationFit fit_population(const DiffusionSpec& diff, const RewardSpec& reward, double alpha,
                             std::shared_ptr<const Basis> basis, const SolverConfig& cfg,
                             const MarginalMeasure& mu, const ScalarField* fstar,
                             PotentialScaling scaling = PotentialScaling::kAlphaR);

}  // namespace hjbvi
