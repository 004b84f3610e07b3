// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/oracle.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hjbvi/errors.hpp"

namespace hjbvi {

json OracleConfig::to_json() const {
  return json{{"n_paths", n_paths},
              {"dt", dt},
              {"seed", seed},
              {"gradient_fd_step", gradient_fd_step},
              {"potential_scaling", to_string(scaling)}};
}

OracleConfig OracleConfig::from_json(const json& j) {
  constexpr std::string_view ctx = "oracle";
  require_known_keys(j, {"n_paths", "dt", "seed", "gradient_fd_step", "potential_scaling"}, ctx);
  OracleConfig cfg;
  const auto n = get_int_or(j, "n_paths", static_cast<long long>(cfg.n_paths), ctx);
  if (n < 1) throw ConfigError("oracle.n_paths must be >= 1");
  cfg.n_paths = static_cast<std::size_t>(n);
  cfg.dt = get_double_or(j, "dt", cfg.dt, ctx);
  if (!(cfg.dt > 0.0)) throw ConfigError("oracle.dt must be positive");
  cfg.seed = require_field(j, "seed", ctx).get<std::uint64_t>();
  cfg.gradient_fd_step = get_double_or(j, "gradient_fd_step", cfg.gradient_fd_step, ctx);
  if (!(cfg.gradient_fd_step > 0.0)) throw ConfigError("oracle.gradient_fd_step must be positive");
  if (j.contains("potential_scaling")) {
    cfg.scaling = parse_potential_scaling(get_string(j, "potential_scaling", ctx));
  }
  return cfg;
}

namespace {

void check_time(const DiffusionSpec& diff, double t) {
  if (!(t >= 0.0 && t <= diff.horizon())) {
    throw ConfigError(fmt::format("oracle: t = {} outside [0, {}]", t, diff.horizon()));
  }
}

// Path weight exp(kappa int r + y(X_T)/alpha) from (t0, x) with path index i.
class WeightSampler {
 public:
  WeightSampler(const DiffusionSpec& diff, const RewardSpec& reward, double alpha, double t0,
                const OracleConfig& cfg)
      : reward_(reward),
        alpha_(alpha),
        kappa_(potential_coefficient(alpha, cfg.scaling)),
        sim_(diff, TimeGrid::nearest(t0, diff.horizon(), cfg.dt),
             CounterRng(cfg.seed, Stream::kOracle), nullptr, 1e6) {}

  double operator()(std::uint64_t path, const Eigen::Ref<const Vec>& x) {
    const double dt = sim_.grid().dt();
    const std::size_t L = sim_.grid().steps();
    double integral = 0.0;
    double y = 0.0;
    const bool ok = sim_.run(path, x, [&](const StepView& s) {
      const double r = intermediate_eval(reward_, s.t, s.state);
      integral += (s.l == 0 || s.l == L ? 0.5 : 1.0) * r * dt;
      if (s.l == L) y = terminal_eval(reward_, s.state);
    });
    if (!ok) return std::numeric_limits<double>::quiet_NaN();
    return std::exp(kappa_ * integral + y / alpha_);
  }

 private:
  const RewardSpec& reward_;
  double alpha_, kappa_;
  PathSimulator sim_;
};

MeanStderr finite_mean(std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericalError(fmt::format("{}: a path blew up or overflowed", what));
  }
  return mean_stderr(v);
}

}  // namespace

FkEstimate fk_value(const DiffusionSpec& diff, const RewardSpec& reward, double alpha, double t,
                    const Vec& x, const OracleConfig& cfg) {
  check_time(diff, t);
  if (x.size() != diff.dim()) throw ConfigError("fk_value: state dimension mismatch");
  if (t >= diff.horizon()) return {std::exp(terminal_eval(reward, x) / alpha), 0.0};
  std::vector<double> w(cfg.n_paths);
#pragma omp parallel
  {
    WeightSampler sampler(diff, reward, alpha, t, cfg);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < cfg.n_paths; ++i) w[i] = sampler(i, x);
  }
  const auto ms = finite_mean(w, "fk_value");
  return {ms.mean, ms.std_error};
}

FkGradient fk_gradient(const DiffusionSpec& diff, const RewardSpec& reward, double alpha, double t,
                       const Vec& x, const OracleConfig& cfg) {
  check_time(diff, t);
  const int d = diff.dim();
  if (x.size() != d) throw ConfigError("fk_gradient: state dimension mismatch");
  const double h = cfg.gradient_fd_step;
  const std::size_t n = cfg.n_paths;
  FkGradient out;
  out.grad.resize(d);
  out.grad_std_error.resize(d);
  out.policy.resize(d);
  out.policy_std_error.resize(d);
  const Mat lambda = diff.lambda(t);

  std::vector<double> w0(n);
  std::vector<std::vector<double>> dw(d, std::vector<double>(n));
  if (t >= diff.horizon()) {
    // exact terminal values; differences of y
    for (int a = 0; a < d; ++a) {
      Vec xp = x, xm = x;
      xp(a) += h;
      xm(a) -= h;
      const double g = (std::exp(terminal_eval(reward, xp) / alpha) -
                        std::exp(terminal_eval(reward, xm) / alpha)) / (2.0 * h);
      std::fill(dw[a].begin(), dw[a].end(), g);
    }
    std::fill(w0.begin(), w0.end(), std::exp(terminal_eval(reward, x) / alpha));
  } else {
#pragma omp parallel
    {
      WeightSampler sampler(diff, reward, alpha, t, cfg);
      Vec xs(d);
#pragma omp for schedule(static)
      for (std::size_t i = 0; i < n; ++i) {
        w0[i] = sampler(i, x);
        for (int a = 0; a < d; ++a) {
          xs = x;
          xs(a) += h;
          const double wp = sampler(i, xs);
          xs(a) -= 2.0 * h;
          const double wm = sampler(i, xs);
          dw[a][i] = (wp - wm) / (2.0 * h);
        }
      }
    }
  }
  const auto v = finite_mean(w0, "fk_gradient");
  out.value = {v.mean, v.std_error};
  for (int a = 0; a < d; ++a) {
    const auto g = finite_mean(dw[a], "fk_gradient");
    out.grad(a) = g.mean;
    out.grad_std_error(a) = g.std_error;
    if (std::abs(g.mean) < 5.0 * g.std_error) out.weak_signal = true;
  }
  // policy_b = sum_a Lambda_ba g_a / f; linearize per path
  out.policy = lambda * out.grad / v.mean;
  std::vector<double> psi(n);
  for (int b = 0; b < d; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      double lg = 0.0;
      for (int a = 0; a < d; ++a) lg += lambda(b, a) * dw[a][i];
      psi[i] = (lg - out.policy(b) * w0[i]) / v.mean;
    }
    out.policy_std_error(b) = mean_stderr(psi).std_error;
  }
  return out;
}

double ou_closed_form(const OuParams& ou, double c, double alpha, double t, double x,
                      double horizon, PotentialScaling scaling, double r0) {
  if (!(ou.theta > 0.0)) throw ConfigError("ou_closed_form: theta must be positive");
  if (!(alpha > 0.0)) throw ConfigError("ou_closed_form: alpha must be positive");
  const double tau = horizon - t;
  const double decay = std::exp(-ou.theta * tau);
  const double m = x * decay;
  const double v = ou.sigma2 * (1.0 - decay * decay) / (2.0 * ou.theta);
  const double kappa = potential_coefficient(alpha, scaling);
  return std::exp(kappa * r0 * tau + c * m / alpha + c * c * v / (2.0 * alpha * alpha));
}

OuClosedForm::OuClosedForm(const OuParams& ou, double c, double alpha, double horizon,
                           PotentialScaling scaling, double r0)
    : ou_(ou),
      c_(c),
      alpha_(alpha),
      horizon_(horizon),
      kappa_(potential_coefficient(alpha, scaling)),
      r0_(r0),
      scaling_(scaling) {
  if (!(ou.theta > 0.0)) throw ConfigError("OuClosedForm: theta must be positive");
}

OuClosedForm OuClosedForm::from_problem(const DiffusionSpec& diff, const RewardSpec& reward,
                                        double alpha, PotentialScaling scaling) {
  const OuDrift* ou = diff.ou();
  if (!ou || diff.dim() != 1 || ou->mu(0) != 0.0 || !diff.time_homogeneous_noise()) {
    throw ConfigError("closed form needs a scalar OU diffusion with mu = 0 and constant Lambda");
  }
  if (!is_linear_constant(reward)) {
    throw ConfigError("closed form needs y = c x and a constant running reward");
  }
  const auto& y = std::get<LinearTerminal>(reward.terminal);
  const double r0 = intermediate_eval(reward, 0.0, Vec::Zero(1));
  return OuClosedForm({ou->theta, diff.lambda(0.0)(0, 0)}, reward.y_scale * y.c(0), alpha,
                      diff.horizon(), scaling, r0);
}

double OuClosedForm::log_slope(double t) const {
  return c_ / alpha_ * std::exp(-ou_.theta * (horizon_ - t));
}

double OuClosedForm::value(double t, const Eigen::Ref<const Vec>& x) const {
  return ou_closed_form(ou_, c_, alpha_, t, x(0), horizon_, scaling_, r0_);
}

double OuClosedForm::time_derivative(double t, const Eigen::Ref<const Vec>& x) const {
  const double g = log_slope(t);
  return value(t, x) * (-kappa_ * r0_ + ou_.theta * g * x(0) - 0.5 * ou_.sigma2 * g * g);
}

void OuClosedForm::gradient(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const {
  out(0) = value(t, x) * log_slope(t);
}

void OuClosedForm::hessian(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Mat> out) const {
  const double g = log_slope(t);
  out(0, 0) = value(t, x) * g * g;
}

ManufacturedProblem manufactured_problem(std::shared_ptr<const ScalarField> fstar,
                                         const DiffusionSpec& diff, double alpha,
                                         const MarginalMeasure& probes, json descriptor,
                                         RewardNoise noise, PotentialScaling scaling) {
  if (!fstar || fstar->dim() != diff.dim()) {
    throw ConfigError("manufactured_problem: f* missing or of the wrong dimension");
  }
  if (!(alpha > 0.0)) throw ConfigError("manufactured_problem: alpha must be positive");
  const double kappa = potential_coefficient(alpha, scaling);
  auto spec = std::make_shared<const DiffusionSpec>(diff);
  const int d = diff.dim();

  auto r_fn = [fstar, spec, kappa, d](double t, const Eigen::Ref<const Vec>& x) {
    thread_local Vec grad, drift;
    thread_local Mat hess;
    grad.resize(d);
    drift.resize(d);
    hess.resize(d, d);
    const double f = fstar->value_gradient(t, x, grad);
    fstar->hessian(t, x, hess);
    spec->drift(t, x, drift);
    const double af = drift.dot(grad) + 0.5 * spec->lambda(t).cwiseProduct(hess).sum();
    return -(fstar->time_derivative(t, x) + af) / (kappa * f);
  };
  const double T = diff.horizon();
  auto y_fn = [fstar, alpha, T](const Eigen::Ref<const Vec>& x) {
    return alpha * std::log(fstar->value(T, x));
  };

  ManufacturedProblem out;
  out.r_min = std::numeric_limits<double>::infinity();
  out.r_max = -std::numeric_limits<double>::infinity();
  out.f_min = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < probes.times.size(); ++l) {
    for (Eigen::Index q = 0; q < probes.points[l].cols(); ++q) {
      const double t = probes.times[l];
      const auto x = probes.points[l].col(q);
      const double f = fstar->value(t, x);
      if (!(f > 0.0)) {
        throw ConfigError(fmt::format("manufactured_problem: f* = {} is not positive at t = {}", f, t));
      }
      const double r = r_fn(t, x);
      out.f_min = std::min(out.f_min, f);
      out.r_min = std::min(out.r_min, r);
      out.r_max = std::max(out.r_max, r);
    }
  }

  descriptor["alpha"] = alpha;
  descriptor["potential_scaling"] = to_string(scaling);
  descriptor["diffusion_digest"] = diff.digest();
  RewardSpec& rs = out.reward;
  rs.dim = d;
  rs.intermediate = CustomReward{r_fn, descriptor};
  rs.terminal = CustomTerminal{y_fn, descriptor};
  rs.noise = std::move(noise);
  rs.manufactured = true;
  rs.normalized = false;
  rs.bound = std::max({std::abs(out.r_min), std::abs(out.r_max), 1.0});
  return out;
}

}  // namespace hjbvi
