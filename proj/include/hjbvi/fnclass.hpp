// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "hjbvi/field.hpp"
#include "hjbvi/json_util.hpp"
#include "hjbvi/numerics.hpp"

namespace hjbvi {

// prod_i x_i^{powers[i]}
struct MonomialFeature {
  std::vector<int> powers;
};
// exp(-|x - center|^2 / (2 width^2))
struct RbfFeature {
  Vec center;
  double width = 1.0;
};
using SpatialFeature = std::variant<MonomialFeature, RbfFeature>;

/// Feature blocks at one (t, x); feature index is l * J + j for Legendre
/// degree l and spatial feature j.
struct FeatureBlock {
  Vec phi;
  Vec dphi_dt;
  Mat grad;        // p x d
  Vec half_trace;  // 1/2 Tr(Lambda Hess phi_j); only filled when Lambda was given
};

/// Tensor basis P_l(2t/T - 1) psi_j(x), l = 0..m.
class Basis {
 public:
  static constexpr int kMaxTimeDegree = 30;

  Basis(int dim, double horizon, int time_degree, std::vector<SpatialFeature> spatial);

  /// {"time_degree", "monomial_degree", "rbf": [{"center", "width"}],
  ///  "rbf_grid": {"lo", "hi", "count", "width"} (d = 1 only)}
  static Basis from_json(const json& j, int dim, double horizon);
  /// Expanded form (explicit features) that from_json also accepts.
  json to_json() const;

  int dim() const { return dim_; }
  double horizon() const { return horizon_; }
  int time_degree() const { return time_degree_; }
  int spatial_count() const { return static_cast<int>(spatial_.size()); }
  int size() const { return (time_degree_ + 1) * spatial_count(); }
  const std::vector<SpatialFeature>& spatial() const { return spatial_; }

  /// Legendre values and t-derivatives of the m+1 time factors.
  void time_factors(double t, Eigen::Ref<Vec> p, Eigen::Ref<Vec> dp) const;

  /// Spatial values, gradients (J x d) and, if `hess` is non-null, Hessians.
  void spatial_eval(const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> psi, Eigen::Ref<Mat> grad,
                    std::vector<Mat>* hess) const;

  /// Fills `out`; half_trace needs `lambda`.
  void features(double t, const Eigen::Ref<const Vec>& x, FeatureBlock& out,
                const Mat* lambda = nullptr) const;

  bool operator==(const Basis& other) const;

 private:
  int dim_;
  double horizon_;
  int time_degree_;
  std::vector<SpatialFeature> spatial_;
};

std::vector<SpatialFeature> monomials_up_to(int dim, int degree);

/// theta' = theta if |theta| <= rho, else theta * rho / |theta|.
Vec project_ball(const Vec& theta, double rho);

/// f_theta = theta^T phi, a member of the ball-constrained class.
class ValueModel final : public ScalarField {
 public:
  ValueModel(std::shared_ptr<const Basis> basis, Vec theta, double ball_radius);

  const Basis& basis() const { return *basis_; }
  std::shared_ptr<const Basis> basis_ptr() const { return basis_; }
  const Vec& theta() const { return theta_; }
  double ball_radius() const { return ball_radius_; }

  int dim() const override { return basis_->dim(); }
  double value(double t, const Eigen::Ref<const Vec>& x) const override;
  double time_derivative(double t, const Eigen::Ref<const Vec>& x) const override;
  void gradient(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const override;
  void hessian(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Mat> out) const override;
  double value_gradient(double t, const Eigen::Ref<const Vec>& x,
                        Eigen::Ref<Vec> grad) const override;

  json to_json() const;
  static ValueModel from_json(const json& j);

 private:
  // w_j = sum_l theta_{lJ+j} P_l(s) and its t-derivative
  void spatial_weights(double t, Vec& w, Vec* dw) const;

  std::shared_ptr<const Basis> basis_;
  Vec theta_;
  double ball_radius_;
};

}  // namespace hjbvi
