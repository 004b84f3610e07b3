// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/fnclass.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hjbvi/errors.hpp"
#include "hjbvi/overloaded.hpp"

namespace hjbvi {

namespace {

double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

void monomials_rec(int dim, int remaining, std::vector<int>& cur, int pos,
                   std::vector<SpatialFeature>& out) {
  if (pos == dim) {
    out.push_back(MonomialFeature{cur});
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    cur[pos] = k;
    monomials_rec(dim, remaining - k, cur, pos + 1, out);
  }
  cur[pos] = 0;
}

struct Scratch {
  Vec p, dp, w, dw, psi;
  Mat grad;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

}  // namespace

std::vector<SpatialFeature> monomials_up_to(int dim, int degree) {
  std::vector<SpatialFeature> out;
  // grouped by total degree so the constant comes first
  for (int total = 0; total <= degree; ++total) {
    std::vector<SpatialFeature> all;
    std::vector<int> cur(dim, 0);
    monomials_rec(dim, total, cur, 0, all);
    for (auto& f : all) {
      int sum = 0;
      for (int p : std::get<MonomialFeature>(f).powers) sum += p;
      if (sum == total) out.push_back(std::move(f));
    }
  }
  return out;
}

Basis::Basis(int dim, double horizon, int time_degree, std::vector<SpatialFeature> spatial)
    : dim_(dim), horizon_(horizon), time_degree_(time_degree), spatial_(std::move(spatial)) {
  if (dim_ < 1) throw ConfigError("basis dim must be positive");
  if (!(horizon_ > 0.0)) throw ConfigError("basis horizon must be positive");
  if (time_degree_ < 0 || time_degree_ > kMaxTimeDegree) {
    throw ConfigError(fmt::format("basis time_degree must be in [0, {}]", kMaxTimeDegree));
  }
  if (spatial_.empty()) throw ConfigError("basis needs at least one spatial feature");
  for (const auto& f : spatial_) {
    std::visit(Overloaded{
                   [&](const MonomialFeature& m) {
                     if (static_cast<int>(m.powers.size()) != dim_) {
                       throw ConfigError("monomial powers must have length dim");
                     }
                     for (int p : m.powers) {
                       if (p < 0) throw ConfigError("monomial powers must be non-negative");
                     }
                   },
                   [&](const RbfFeature& r) {
                     if (r.center.size() != dim_) throw ConfigError("RBF center must have length dim");
                     if (!(r.width > 0.0)) throw ConfigError("RBF widths must be positive");
                   },
               },
               f);
  }
}

Basis Basis::from_json(const json& j, int dim, double horizon) {
  constexpr std::string_view ctx = "basis";
  require_known_keys(j, {"time_degree", "monomial_degree", "monomials", "rbf", "rbf_grid"}, ctx);
  std::vector<SpatialFeature> spatial;
  const auto mono_degree = get_int_or(j, "monomial_degree", -1, ctx);
  if (mono_degree >= 0) spatial = monomials_up_to(dim, static_cast<int>(mono_degree));
  if (j.contains("monomials")) {
    for (const auto& m : j["monomials"]) {
      spatial.push_back(MonomialFeature{m.get<std::vector<int>>()});
    }
  }
  if (j.contains("rbf")) {
    for (const auto& r : j["rbf"]) {
      require_known_keys(r, {"center", "width"}, "basis.rbf");
      spatial.push_back(RbfFeature{vec_from_json(require_field(r, "center", "basis.rbf"),
                                                 "basis.rbf.center", dim),
                                   get_double(r, "width", "basis.rbf")});
    }
  }
  if (j.contains("rbf_grid")) {
    const json& g = j["rbf_grid"];
    require_known_keys(g, {"lo", "hi", "count", "width"}, "basis.rbf_grid");
    if (dim != 1) throw ConfigError("basis.rbf_grid is only available for dim = 1");
    const double lo = get_double(g, "lo", "basis.rbf_grid");
    const double hi = get_double(g, "hi", "basis.rbf_grid");
    const auto count = get_int(g, "count", "basis.rbf_grid");
    const double width = get_double(g, "width", "basis.rbf_grid");
    if (count < 1) throw ConfigError("basis.rbf_grid.count must be >= 1");
    for (long long k = 0; k < count; ++k) {
      const double c = count == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * k / (count - 1);
      spatial.push_back(RbfFeature{Vec::Constant(1, c), width});
    }
  }
  return Basis(dim, horizon, static_cast<int>(get_int(j, "time_degree", ctx)), std::move(spatial));
}

json Basis::to_json() const {
  json mono = json::array();
  json rbf = json::array();
  for (const auto& f : spatial_) {
    std::visit(Overloaded{
                   [&](const MonomialFeature& m) { mono.push_back(m.powers); },
                   [&](const RbfFeature& r) {
                     rbf.push_back(json{{"center", vec_to_json(r.center)}, {"width", r.width}});
                   },
               },
               f);
  }
  // monomials before RBFs is also the order from_json rebuilds
  json j;
  j["time_degree"] = time_degree_;
  j["monomials"] = std::move(mono);
  j["rbf"] = std::move(rbf);
  return j;
}

bool Basis::operator==(const Basis& other) const {
  return dump_canonical(to_json()) == dump_canonical(other.to_json()) && dim_ == other.dim_ &&
         horizon_ == other.horizon_;
}

void Basis::time_factors(double t, Eigen::Ref<Vec> p, Eigen::Ref<Vec> dp) const {
  const double s = 2.0 * t / horizon_ - 1.0;
  const double ds = 2.0 / horizon_;
  p(0) = 1.0;
  dp(0) = 0.0;
  if (time_degree_ >= 1) {
    p(1) = s;
    dp(1) = 1.0;
  }
  // (l+1) P_{l+1} = (2l+1) s P_l - l P_{l-1};  P'_{l+1} = P'_{l-1} + (2l+1) P_l
  for (int l = 1; l < time_degree_; ++l) {
    p(l + 1) = ((2 * l + 1) * s * p(l) - l * p(l - 1)) / (l + 1);
    dp(l + 1) = dp(l - 1) + (2 * l + 1) * p(l);
  }
  dp *= ds;
}

void Basis::spatial_eval(const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> psi,
                         Eigen::Ref<Mat> grad, std::vector<Mat>* hess) const {
  const int d = dim_;
  if (hess) hess->resize(spatial_.size());
  for (std::size_t j = 0; j < spatial_.size(); ++j) {
    std::visit(
        Overloaded{
            [&](const MonomialFeature& m) {
              double v = 1.0;
              for (int i = 0; i < d; ++i) v *= ipow(x(i), m.powers[i]);
              psi(j) = v;
              for (int i = 0; i < d; ++i) {
                const int pi = m.powers[i];
                if (pi == 0) {
                  grad(j, i) = 0.0;
                  continue;
                }
                double g = pi * ipow(x(i), pi - 1);
                for (int k = 0; k < d; ++k) {
                  if (k != i) g *= ipow(x(k), m.powers[k]);
                }
                grad(j, i) = g;
              }
              if (hess) {
                Mat& h = (*hess)[j];
                h.setZero(d, d);
                for (int a = 0; a < d; ++a) {
                  for (int b = 0; b < d; ++b) {
                    const int pa = m.powers[a];
                    const int pb = m.powers[b];
                    double g = 1.0;
                    if (a == b) {
                      if (pa < 2) continue;
                      g = pa * (pa - 1) * ipow(x(a), pa - 2);
                    } else {
                      if (pa < 1 || pb < 1) continue;
                      g = pa * ipow(x(a), pa - 1) * pb * ipow(x(b), pb - 1);
                    }
                    for (int k = 0; k < d; ++k) {
                      if (k != a && k != b) g *= ipow(x(k), m.powers[k]);
                    }
                    h(a, b) = g;
                  }
                }
              }
            },
            [&](const RbfFeature& r) {
              const double inv_w2 = 1.0 / (r.width * r.width);
              double sq = 0.0;
              for (int i = 0; i < d; ++i) sq += (x(i) - r.center(i)) * (x(i) - r.center(i));
              const double v = std::exp(-0.5 * sq * inv_w2);
              psi(j) = v;
              for (int i = 0; i < d; ++i) grad(j, i) = -(x(i) - r.center(i)) * inv_w2 * v;
              if (hess) {
                Mat& h = (*hess)[j];
                h.resize(d, d);
                for (int a = 0; a < d; ++a) {
                  for (int b = 0; b < d; ++b) {
                    h(a, b) = v * (x(a) - r.center(a)) * (x(b) - r.center(b)) * inv_w2 * inv_w2;
                  }
                  h(a, a) -= v * inv_w2;
                }
              }
            },
        },
        spatial_[j]);
  }
}

void Basis::features(double t, const Eigen::Ref<const Vec>& x, FeatureBlock& out,
                     const Mat* lambda) const {
  const int m1 = time_degree_ + 1;
  const int J = spatial_count();
  const int p = m1 * J;
  Scratch& s = scratch();
  s.p.resize(m1);
  s.dp.resize(m1);
  s.psi.resize(J);
  s.grad.resize(J, dim_);
  time_factors(t, s.p, s.dp);
  std::vector<Mat> hess;
  spatial_eval(x, s.psi, s.grad, lambda ? &hess : nullptr);
  out.phi.resize(p);
  out.dphi_dt.resize(p);
  out.grad.resize(p, dim_);
  if (lambda) out.half_trace.resize(p);
  Vec lap;
  if (lambda) {
    lap.resize(J);
    for (int j = 0; j < J; ++j) lap(j) = 0.5 * lambda->cwiseProduct(hess[j]).sum();
  }
  for (int l = 0; l < m1; ++l) {
    out.phi.segment(l * J, J) = s.p(l) * s.psi;
    out.dphi_dt.segment(l * J, J) = s.dp(l) * s.psi;
    out.grad.middleRows(l * J, J) = s.p(l) * s.grad;
    if (lambda) out.half_trace.segment(l * J, J) = s.p(l) * lap;
  }
}

Vec project_ball(const Vec& theta, double rho) {
  if (!(rho > 0.0)) throw ConfigError("project_ball: rho must be positive");
  const double norm = theta.norm();
  if (norm <= rho) return theta;
  return theta * (rho / norm);
}

ValueModel::ValueModel(std::shared_ptr<const Basis> basis, Vec theta, double ball_radius)
    : basis_(std::move(basis)), theta_(std::move(theta)), ball_radius_(ball_radius) {
  if (!basis_) throw ConfigError("ValueModel needs a basis");
  if (theta_.size() != basis_->size()) {
    throw ConfigError(fmt::format("theta has length {}, basis has {} features", theta_.size(),
                                  basis_->size()));
  }
  if (!(ball_radius_ > 0.0)) throw ConfigError("ball_radius must be positive");
  if (theta_.norm() > ball_radius_ * (1.0 + 1e-12) + 1e-9) {
    throw ConfigError(fmt::format("|theta| = {} exceeds ball_radius {}", theta_.norm(),
                                  ball_radius_));
  }
}

void ValueModel::spatial_weights(double t, Vec& w, Vec* dw) const {
  const int m1 = basis_->time_degree() + 1;
  const int J = basis_->spatial_count();
  Scratch& s = scratch();
  s.p.resize(m1);
  s.dp.resize(m1);
  basis_->time_factors(t, s.p, s.dp);
  Eigen::Map<const Mat> th(theta_.data(), J, m1);  // column l holds the degree-l block
  w.noalias() = th * s.p;
  if (dw) dw->noalias() = th * s.dp;
}

double ValueModel::value(double t, const Eigen::Ref<const Vec>& x) const {
  Scratch& s = scratch();
  spatial_weights(t, s.w, nullptr);
  const int J = basis_->spatial_count();
  s.psi.resize(J);
  s.grad.resize(J, dim());
  basis_->spatial_eval(x, s.psi, s.grad, nullptr);
  return s.w.dot(s.psi);
}

double ValueModel::time_derivative(double t, const Eigen::Ref<const Vec>& x) const {
  Scratch& s = scratch();
  spatial_weights(t, s.w, &s.dw);
  const int J = basis_->spatial_count();
  s.psi.resize(J);
  s.grad.resize(J, dim());
  basis_->spatial_eval(x, s.psi, s.grad, nullptr);
  return s.dw.dot(s.psi);
}

void ValueModel::gradient(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const {
  value_gradient(t, x, out);
}

double ValueModel::value_gradient(double t, const Eigen::Ref<const Vec>& x,
                                  Eigen::Ref<Vec> grad) const {
  Scratch& s = scratch();
  spatial_weights(t, s.w, nullptr);
  const int J = basis_->spatial_count();
  s.psi.resize(J);
  s.grad.resize(J, dim());
  basis_->spatial_eval(x, s.psi, s.grad, nullptr);
  grad.noalias() = s.grad.transpose() * s.w;
  return s.w.dot(s.psi);
}

void ValueModel::hessian(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Mat> out) const {
  Scratch& s = scratch();
  spatial_weights(t, s.w, nullptr);
  const int J = basis_->spatial_count();
  s.psi.resize(J);
  s.grad.resize(J, dim());
  std::vector<Mat> hess;
  basis_->spatial_eval(x, s.psi, s.grad, &hess);
  out.setZero();
  for (int j = 0; j < J; ++j) out += s.w(j) * hess[j];
}

json ValueModel::to_json() const {
  json j;
  j["basis"] = basis_->to_json();
  j["dim"] = basis_->dim();
  j["horizon"] = basis_->horizon();
  j["theta"] = vec_to_json(theta_);
  j["ball_radius"] = ball_radius_;
  return j;
}

ValueModel ValueModel::from_json(const json& j) {
  require_known_keys(j, {"basis", "dim", "horizon", "theta", "ball_radius"}, "model");
  const int dim = static_cast<int>(get_int(j, "dim", "model"));
  const double horizon = get_double(j, "horizon", "model");
  auto basis =
      std::make_shared<const Basis>(Basis::from_json(require_field(j, "basis", "model"), dim, horizon));
  Vec theta = vec_from_json(require_field(j, "theta", "model"), "model.theta", basis->size());
  return ValueModel(std::move(basis), std::move(theta), get_double(j, "ball_radius", "model"));
}

}  // namespace hjbvi
