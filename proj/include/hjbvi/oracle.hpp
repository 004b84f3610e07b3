// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>

#include "hjbvi/diffusion.hpp"
#include "hjbvi/field.hpp"
#include "hjbvi/forms.hpp"
#include "hjbvi/rewards.hpp"

namespace hjbvi {

struct OracleConfig {
  std::size_t n_paths = 10000;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  double gradient_fd_step = 1e-3;
  PotentialScaling scaling = PotentialScaling::kAlphaR;

  json to_json() const;
  /// The seed is mandatory.
  static OracleConfig from_json(const json& j);
};

struct FkEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Feynman–Kac Monte Carlo for d_t f + A f + kappa r f = 0, f_T = exp(y / alpha):
/// mean of exp(kappa int_t^T r ds + y(X_T) / alpha) over paths from (t, x).
FkEstimate fk_value(const DiffusionSpec& diff, const RewardSpec& reward, double alpha, double t,
                    const Vec& x, const OracleConfig& cfg);

struct FkGradient {
  FkEstimate value;
  Vec grad;
  Vec grad_std_error;
  /// Lambda grad f / f with delta-method standard errors.
  Vec policy;
  Vec policy_std_error;
  bool weak_signal = false;  // some |grad_a| < 5 stderr_a
};

/// Central differences with common random numbers for x +/- h e_a.
FkGradient fk_gradient(const DiffusionSpec& diff, const RewardSpec& reward, double alpha, double t,
                       const Vec& x, const OracleConfig& cfg);

struct OuParams {
  double theta = 1.0;
  double sigma2 = 1.0;
};

/// Scalar OU dX = -theta X dt + sigma dB, r = r0 constant, y = c x:
/// f = exp(kappa r0 (T - t) + c m / alpha + c^2 v / (2 alpha^2)),
/// m = x e^{-theta tau}, v = sigma^2 (1 - e^{-2 theta tau}) / (2 theta), tau = T - t.
/// With r0 = -1 and the default scaling this is exp(-alpha (T - t) + ...).
double ou_closed_form(const OuParams& ou, double c, double alpha, double t, double x,
                      double horizon, PotentialScaling scaling = PotentialScaling::kAlphaR,
                      double r0 = -1.0);

/// The closed form above as a field, for policies and Sobolev errors.
class OuClosedForm final : public ScalarField {
 public:
  OuClosedForm(const OuParams& ou, double c, double alpha, double horizon,
               PotentialScaling scaling = PotentialScaling::kAlphaR, double r0 = -1.0);
  /// From a scalar OU spec with mu = 0 and a linear terminal / constant running reward.
  static OuClosedForm from_problem(const DiffusionSpec& diff, const RewardSpec& reward,
                                   double alpha, PotentialScaling scaling);

  int dim() const override { return 1; }
  double value(double t, const Eigen::Ref<const Vec>& x) const override;
  double time_derivative(double t, const Eigen::Ref<const Vec>& x) const override;
  void gradient(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const override;
  void hessian(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Mat> out) const override;

  /// d/dx log f = (c / alpha) e^{-theta (T - t)}
  double log_slope(double t) const;

 private:
  OuParams ou_;
  double c_, alpha_, horizon_, kappa_, r0_;
  PotentialScaling scaling_;
};

struct ManufacturedProblem {
  RewardSpec reward;
  double r_min = 0.0;
  double r_max = 0.0;
  double f_min = 0.0;
};

/// r = -(d_t f* + A f*) / (kappa f*), y = alpha log f*_T, so f* solves the PDE exactly.
/// `probes` is where positivity is checked and the range of r is reported.
ManufacturedProblem manufactured_problem(std::shared_ptr<const ScalarField> fstar,
                                         const DiffusionSpec& diff, double alpha,
                                         const MarginalMeasure& probes, json descriptor,
                                         RewardNoise noise = NoNoise{},
                                         PotentialScaling scaling = PotentialScaling::kAlphaR);

}  // namespace hjbvi
