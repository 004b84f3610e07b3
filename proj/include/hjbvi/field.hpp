// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "hjbvi/numerics.hpp"

namespace hjbvi {

/// A smooth scalar function f(t, x) with analytic derivatives.
class ScalarField {
 public:
  virtual ~ScalarField() = default;

  virtual int dim() const = 0;
  virtual double value(double t, const Eigen::Ref<const Vec>& x) const = 0;
  virtual double time_derivative(double t, const Eigen::Ref<const Vec>& x) const = 0;
  virtual void gradient(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const = 0;
  virtual void hessian(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Mat> out) const = 0;

  /// Value and gradient in one pass; the default calls both.
  virtual double value_gradient(double t, const Eigen::Ref<const Vec>& x,
                                Eigen::Ref<Vec> grad) const {
    gradient(t, x, grad);
    return value(t, x);
  }
};

/// sum_i w_i f_i, e.g. f* - f for error and population-form computations.
class CombinedField final : public ScalarField {
 public:
  using Term = std::pair<double, std::shared_ptr<const ScalarField>>;
  explicit CombinedField(std::vector<Term> terms);

  int dim() const override { return dim_; }
  double value(double t, const Eigen::Ref<const Vec>& x) const override;
  double time_derivative(double t, const Eigen::Ref<const Vec>& x) const override;
  void gradient(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const override;
  void hessian(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Mat> out) const override;

 private:
  std::vector<Term> terms_;
  int dim_;
};

}  // namespace hjbvi
