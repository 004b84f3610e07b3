// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/field.hpp"

#include "hjbvi/errors.hpp"

namespace hjbvi {

CombinedField::CombinedField(std::vector<Term> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw ConfigError("CombinedField needs at least one term");
  dim_ = terms_.front().second->dim();
  for (const auto& [w, f] : terms_) {
    if (!f || f->dim() != dim_) throw ConfigError("CombinedField terms must share dim");
  }
}

double CombinedField::value(double t, const Eigen::Ref<const Vec>& x) const {
  double acc = 0.0;
  for (const auto& [w, f] : terms_) acc += w * f->value(t, x);
  return acc;
}

double CombinedField::time_derivative(double t, const Eigen::Ref<const Vec>& x) const {
  double acc = 0.0;
  for (const auto& [w, f] : terms_) acc += w * f->time_derivative(t, x);
  return acc;
}

void CombinedField::gradient(double t, const Eigen::Ref<const Vec>& x,
                             Eigen::Ref<Vec> out) const {
  Vec tmp(dim_);
  out.setZero();
  for (const auto& [w, f] : terms_) {
    f->gradient(t, x, tmp);
    out += w * tmp;
  }
}

void CombinedField::hessian(double t, const Eigen::Ref<const Vec>& x,
                            Eigen::Ref<Mat> out) const {
  Mat tmp(dim_, dim_);
  out.setZero();
  for (const auto& [w, f] : terms_) {
    f->hessian(t, x, tmp);
    out += w * tmp;
  }
}

}  // namespace hjbvi
