// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hjbvi/dataset.hpp"
#include "hjbvi/diffusion.hpp"
#include "hjbvi/field.hpp"
#include "hjbvi/fnclass.hpp"
#include "hjbvi/rewards.hpp"

namespace hjbvi {

/// Empirical energy Gram and bilinear-form data over one dataset. With
/// f = theta^T phi and g = eta^T phi,
///   B_n(f, g) = eta^T (b - K theta),   E_n(f, g) = eta^T G theta.
struct FormContext {
  std::shared_ptr<const Basis> basis;
  double alpha = 1.0;
  PotentialScaling scaling = PotentialScaling::kAlphaR;
  std::size_t n = 0;
  std::size_t K = 0;
  double horizon = 0.0;
  double lambda_min = 1.0;  // smallest eigenvalue of Lambda_t on [0, T]

  Mat gram;  // E_n(phi_j, phi_l)
  Mat kmat;  // (1/n) Phi_T^T Phi_T - (T/(nK)) Phi_obs^T L Phi_obs
  Vec bvec;  // (1/n) sum exp(Y/alpha) phi(x_T)

  // per-observation caches
  Mat phi_T;     // n x p at (T, x_T)
  Mat phi_0;     // n x p at (0, x_0)
  Mat phi_obs;   // nK x p at (t_k, x_k)
  Mat lphi_obs;  // nK x p, {d_t + A + kappa R} phi
  Vec exp_Y;     // n

  int size() const { return basis->size(); }
  double obs_weight() const { return K > 0 ? horizon / static_cast<double>(n * K) : 0.0; }
};

FormContext assemble(const ObservationDataset& ds, std::shared_ptr<const Basis> basis,
                     const DiffusionSpec& diff, double alpha,
                     PotentialScaling scaling = PotentialScaling::kAlphaR);

/// c_j = B_n(f_theta, phi_j).
Vec empirical_bilinear_vector(const FormContext& ctx, const Vec& theta);
double empirical_bilinear(const FormContext& ctx, const Vec& theta, const Vec& eta);
double empirical_bilinear(const FormContext& ctx, const ValueModel& f, const Vec& eta);
/// Sum of absolute values of the individual terms of B_n(f, g).
double empirical_bilinear_abs_scale(const FormContext& ctx, const Vec& theta, const Vec& eta);
double empirical_energy(const FormContext& ctx, const Vec& a, const Vec& b);

/// E_n(f, g) for arbitrary fields, evaluated on a dataset's sample points.
double empirical_energy_fields(const ObservationDataset& ds, const ScalarField& f,
                               const ScalarField& g);

/// A discrete stand-in for the marginal laws p_t on [0, T]: time nodes with
/// trapezoid weights, and at each node weighted points in R^d.
struct MarginalMeasure {
  std::vector<double> times;
  std::vector<double> time_weights;
  std::vector<Mat> points;  // d x M_t
  std::vector<Vec> weights;
  std::string kind;
};

/// Empirical marginals of a cloud at every `stride`-th grid node; aborted paths are skipped.
MarginalMeasure measure_from_cloud(const PathBatch& cloud, std::size_t stride = 1);

/// Exact Gaussian marginals of an OU diffusion (Gaussian or point init) by a
/// tensor Gauss–Hermite rule; d <= 2.
MarginalMeasure ou_gauss_hermite_measure(const DiffusionSpec& diff, int nodes = 64,
                                         std::size_t time_points = 201);

/// Population B[f, g] = E f_T g_T - int E[{d_t + A + kappa r} f g] dt.
double quadrature_bilinear(const ScalarField& f, const ScalarField& g, const DiffusionSpec& diff,
                           const RewardSpec& reward, double alpha, const MarginalMeasure& mu,
                           PotentialScaling scaling = PotentialScaling::kAlphaR);

/// Population <f, g>_{S,T} = E f_0 g_0 + E f_T g_T + int E[f g + grad f . grad g] dt.
double quadrature_energy(const ScalarField& f, const ScalarField& g, const MarginalMeasure& mu);

/// Basis matrices of the population forms: G_pop, K_pop with
/// B[f_theta, phi_j] = (b - K theta)_j, b_j = B[f*, phi_j] when f* is given.
struct PopulationForms {
  Mat gram;
  Mat kmat;
  Vec bvec;
};
PopulationForms assemble_population(const Basis& basis, const DiffusionSpec& diff,
                                    const RewardSpec& reward, double alpha,
                                    const MarginalMeasure& mu, const ScalarField* fstar,
                                    PotentialScaling scaling = PotentialScaling::kAlphaR);

}  // namespace hjbvi
