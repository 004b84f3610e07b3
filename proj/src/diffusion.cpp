// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <omp.h>

#include "hjbvi/errors.hpp"
#include "hjbvi/overloaded.hpp"

namespace hjbvi {

namespace {

void check_square(const Mat& m, int dim, const char* what) {
  if (m.rows() != dim || m.cols() != dim) {
    throw ConfigError(fmt::format("{} must be {}x{}, got {}x{}", what, dim, dim, m.rows(),
                                  m.cols()));
  }
}

void check_vec(const Vec& v, int dim, const char* what) {
  if (v.size() != dim) {
    throw ConfigError(fmt::format("{} must have length {}, got {}", what, dim, v.size()));
  }
}

std::string vec_string(const Eigen::Ref<const Vec>& x) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) s += ", ";
    s += fmt::format("{}", x(i));
  }
  return s + "]";
}

}  // namespace

DiffusionSpec::DiffusionSpec(int dim, double horizon, Drift drift, DiffusionMatrix diffusion,
                             InitLaw init, bool allow_degenerate)
    : dim_(dim),
      horizon_(horizon),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)),
      init_(std::move(init)) {
  if (dim_ < 1) throw ConfigError("diffusion dim must be positive");
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) {
    throw ConfigError("diffusion horizon must be positive and finite");
  }
  std::visit(Overloaded{
                 [&](const OuDrift& d) {
                   if (!std::isfinite(d.theta)) throw ConfigError("OU theta must be finite");
                   check_vec(d.mu, dim_, "OU mu");
                 },
                 [&](const AffineDrift& d) {
                   check_square(d.a0, dim_, "affine a0");
                   check_square(d.a1, dim_, "affine a1");
                   check_vec(d.c0, dim_, "affine c0");
                   check_vec(d.c1, dim_, "affine c1");
                 },
                 [&](const PolynomialDrift& d) {
                   if (d.coeffs.rows() != dim_ || d.coeffs.cols() < 1) {
                     throw ConfigError("polynomial drift coeffs must have dim rows");
                   }
                 },
                 [&](const ShiftedDrift& d) {
                   if (!d.base || d.base->dim() != dim_) {
                     throw ConfigError("shifted drift base must match dim");
                   }
                   if (!d.control) throw ConfigError("shifted drift needs a control");
                 },
             },
             drift_);
  if (diffusion_.slope.size() == 0) diffusion_.slope = Mat::Zero(dim_, dim_);
  check_square(diffusion_.base, dim_, "diffusion matrix");
  check_square(diffusion_.slope, dim_, "diffusion matrix slope");
  if ((diffusion_.base - diffusion_.base.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
      (diffusion_.slope - diffusion_.slope.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ConfigError("diffusion matrix must be symmetric");
  }
  constant_lambda_ = diffusion_.slope.cwiseAbs().maxCoeff() == 0.0;
  const auto [lo, hi] = lambda_bounds();
  if (!std::isfinite(hi) || (allow_degenerate ? lo < 0.0 : !(lo > 0.0))) {
    throw ConfigError(fmt::format(
        "diffusion matrix must be positive definite on [0, T] (min eigenvalue {})", lo));
  }
  lambda_sqrt_const_ = psd_sqrt(diffusion_.base);

  std::visit(Overloaded{
                 [&](const PointInit& p) { check_vec(p.x0, dim_, "initial point"); },
                 [&](const GaussianInit& g) {
                   check_vec(g.mean, dim_, "initial mean");
                   check_square(g.cov, dim_, "initial covariance");
                   Eigen::SelfAdjointEigenSolver<Mat> eig(g.cov);
                   if (eig.eigenvalues().minCoeff() < -1e-12) {
                     throw ConfigError("initial covariance must be PSD");
                   }
                   init_sqrt_ = psd_sqrt(g.cov);
                 },
             },
             init_);
}

void DiffusionSpec::drift(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const {
  std::visit(Overloaded{
                 [&](const OuDrift& d) { out = -d.theta * (x - d.mu); },
                 [&](const AffineDrift& d) {
                   out.noalias() = d.a0 * x;
                   if (t != 0.0) out.noalias() += t * (d.a1 * x);
                   out += d.c0 + t * d.c1;
                 },
                 [&](const PolynomialDrift& d) {
                   for (int i = 0; i < dim_; ++i) {
                     double acc = 0.0;
                     for (Eigen::Index k = d.coeffs.cols() - 1; k >= 0; --k) {
                       acc = acc * x(i) + d.coeffs(i, k);
                     }
                     out(i) = acc;
                   }
                 },
                 [&](const ShiftedDrift& d) {
                   d.base->drift(t, x, out);
                   Vec u(dim_);
                   d.control(t, x, u);
                   out += d.scale * u;
                 },
             },
             drift_);
}

Mat DiffusionSpec::lambda(double t) const {
  if (constant_lambda_) return diffusion_.base;
  return diffusion_.base + t * diffusion_.slope;
}

Mat DiffusionSpec::lambda_sqrt(double t) const {
  if (constant_lambda_) return lambda_sqrt_const_;
  return psd_sqrt(lambda(t));
}

std::pair<double, double> DiffusionSpec::lambda_bounds(int grid_points) const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const int points = constant_lambda_ ? 1 : std::max(grid_points, 2);
  for (int k = 0; k < points; ++k) {
    const double t = points == 1 ? 0.0 : horizon_ * k / (points - 1);
    Eigen::SelfAdjointEigenSolver<Mat> eig(lambda(t), Eigen::EigenvaluesOnly);
    lo = std::min(lo, eig.eigenvalues().minCoeff());
    hi = std::max(hi, eig.eigenvalues().maxCoeff());
  }
  return {lo, hi};
}

void DiffusionSpec::sample_initial(const CounterRng& rng, std::uint64_t path,
                                   Eigen::Ref<Vec> out) const {
  std::visit(Overloaded{
                 [&](const PointInit& p) { out = p.x0; },
                 [&](const GaussianInit& g) {
                   Vec z(dim_);
                   for (int b = 0; 2 * b < dim_; ++b) {
                     const auto pair = rng.normal_pair(path, 0, static_cast<std::uint32_t>(b));
                     z(2 * b) = pair[0];
                     if (2 * b + 1 < dim_) z(2 * b + 1) = pair[1];
                   }
                   out = g.mean + init_sqrt_ * z;
                 },
             },
             init_);
}

json DiffusionSpec::to_json() const {
  json j;
  j["dim"] = dim_;
  j["horizon"] = horizon_;
  j["drift"] = std::visit(Overloaded{
                              [](const OuDrift& d) {
                                return json{{"type", "ou"},
                                            {"theta", d.theta},
                                            {"mu", vec_to_json(d.mu)}};
                              },
                              [](const AffineDrift& d) {
                                return json{{"type", "affine"},
                                            {"a0", mat_to_json(d.a0)},
                                            {"a1", mat_to_json(d.a1)},
                                            {"c0", vec_to_json(d.c0)},
                                            {"c1", vec_to_json(d.c1)}};
                              },
                              [](const PolynomialDrift& d) {
                                return json{{"type", "polynomial"},
                                            {"coeffs", mat_to_json(d.coeffs)}};
                              },
                              [](const ShiftedDrift& d) {
                                return json{{"type", "shifted"},
                                            {"base", d.base->to_json()},
                                            {"scale", d.scale},
                                            {"control", d.description}};
                              },
                          },
                          drift_);
  j["diffusion"] = {{"lambda", mat_to_json(diffusion_.base)},
                    {"lambda_slope", mat_to_json(diffusion_.slope)}};
  j["init"] = std::visit(Overloaded{
                             [](const PointInit& p) {
                               return json{{"type", "point"}, {"x0", vec_to_json(p.x0)}};
                             },
                             [](const GaussianInit& g) {
                               return json{{"type", "gaussian"},
                                           {"mean", vec_to_json(g.mean)},
                                           {"cov", mat_to_json(g.cov)}};
                             },
                         },
                         init_);
  return j;
}

DiffusionSpec DiffusionSpec::from_json(const json& j) {
  constexpr std::string_view ctx = "diffusion";
  require_known_keys(j, {"dim", "horizon", "drift", "diffusion", "init"}, ctx);
  const int dim = static_cast<int>(get_int(j, "dim", ctx));
  const double horizon = get_double(j, "horizon", ctx);
  if (dim < 1) throw ConfigError("diffusion.dim must be positive");

  const json& dj = require_field(j, "drift", ctx);
  const std::string type = get_string(dj, "type", "diffusion.drift");
  Drift drift;
  if (type == "ou") {
    require_known_keys(dj, {"type", "theta", "mu"}, "diffusion.drift");
    Vec mu = dj.contains("mu") ? vec_from_json(dj["mu"], "diffusion.drift.mu", dim)
                               : Vec::Zero(dim);
    drift = OuDrift{get_double(dj, "theta", "diffusion.drift"), mu};
  } else if (type == "affine") {
    require_known_keys(dj, {"type", "a0", "a1", "c0", "c1"}, "diffusion.drift");
    auto mat_or_zero = [&](const char* key) {
      return dj.contains(key) ? mat_from_json(dj[key], "diffusion.drift", dim, dim)
                              : Mat(Mat::Zero(dim, dim));
    };
    auto vec_or_zero = [&](const char* key) {
      return dj.contains(key) ? vec_from_json(dj[key], "diffusion.drift", dim)
                              : Vec(Vec::Zero(dim));
    };
    drift = AffineDrift{mat_or_zero("a0"), mat_or_zero("a1"), vec_or_zero("c0"),
                        vec_or_zero("c1")};
  } else if (type == "polynomial") {
    require_known_keys(dj, {"type", "coeffs"}, "diffusion.drift");
    drift = PolynomialDrift{mat_from_json(require_field(dj, "coeffs", "diffusion.drift"),
                                          "diffusion.drift.coeffs", dim)};
  } else {
    throw ConfigError(fmt::format("diffusion.drift: unknown type '{}'", type));
  }

  const json& mj = require_field(j, "diffusion", ctx);
  require_known_keys(mj, {"lambda", "lambda_slope"}, "diffusion.diffusion");
  DiffusionMatrix matrix;
  matrix.base = mat_from_json(require_field(mj, "lambda", "diffusion.diffusion"),
                              "diffusion.diffusion.lambda", dim, dim);
  matrix.slope = mj.contains("lambda_slope")
                     ? mat_from_json(mj["lambda_slope"], "diffusion.diffusion.lambda_slope",
                                     dim, dim)
                     : Mat(Mat::Zero(dim, dim));

  const json& ij = require_field(j, "init", ctx);
  const std::string itype = get_string(ij, "type", "diffusion.init");
  InitLaw init;
  if (itype == "point") {
    require_known_keys(ij, {"type", "x0"}, "diffusion.init");
    init = PointInit{vec_from_json(require_field(ij, "x0", "diffusion.init"),
                                   "diffusion.init.x0", dim)};
  } else if (itype == "gaussian") {
    require_known_keys(ij, {"type", "mean", "cov"}, "diffusion.init");
    init = GaussianInit{
        vec_from_json(require_field(ij, "mean", "diffusion.init"), "diffusion.init.mean", dim),
        mat_from_json(require_field(ij, "cov", "diffusion.init"), "diffusion.init.cov", dim,
                      dim)};
  } else {
    throw ConfigError(fmt::format("diffusion.init: unknown type '{}'", itype));
  }
  return DiffusionSpec(dim, horizon, std::move(drift), std::move(matrix), std::move(init));
}

std::string DiffusionSpec::digest() const { return digest_hex(dump_canonical(to_json())); }

Vec drift_eval(const DiffusionSpec& spec, double t, const Vec& x) {
  if (x.size() != spec.dim()) {
    throw ConfigError(fmt::format("drift_eval: state has dim {}, expected {}", x.size(),
                                  spec.dim()));
  }
  if (!(t >= 0.0 && t <= spec.horizon())) {
    throw ConfigError(fmt::format("drift_eval: t = {} outside [0, {}]", t, spec.horizon()));
  }
  Vec out(spec.dim());
  spec.drift(t, x, out);
  if (!out.allFinite()) {
    throw NumericalError(
        fmt::format("drift is not finite at t = {}, x = {}", t, vec_string(x)));
  }
  return out;
}

double generator_apply(const DiffusionSpec& spec, double t, const Vec& x, const Vec& grad,
                       const Mat& hess) {
  const int d = spec.dim();
  if (x.size() != d || grad.size() != d || hess.rows() != d || hess.cols() != d) {
    throw ConfigError(fmt::format("generator_apply: dimension mismatch (dim {})", d));
  }
  Vec b(d);
  spec.drift(t, x, b);
  return b.dot(grad) + 0.5 * (spec.lambda(t).cwiseProduct(hess)).sum();
}

TimeGrid::TimeGrid(double t0, double t1, double dt) {
  if (!(dt > 0.0) || !(t1 > t0)) throw ConfigError("time grid needs dt > 0 and t1 > t0");
  const double ratio = (t1 - t0) / dt;
  const double steps = std::round(ratio);
  if (steps < 1.0 || std::abs(ratio - steps) > 1e-12 * std::max(1.0, ratio)) {
    throw ConfigError(fmt::format("dt = {} does not divide the interval length {}", dt, t1 - t0));
  }
  *this = nearest(t0, t1, dt);
}

TimeGrid TimeGrid::nearest(double t0, double t1, double dt_target) {
  if (!(dt_target > 0.0) || !(t1 >= t0)) throw ConfigError("invalid time grid");
  TimeGrid g;
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::round((t1 - t0) / dt_target)));
  g.dt_ = (t1 - t0) / static_cast<double>(steps);
  g.times_.resize(steps + 1);
  for (std::size_t l = 0; l < steps; ++l) g.times_[l] = t0 + static_cast<double>(l) * g.dt_;
  g.times_[steps] = t1;
  return g;
}

bool PathBatch::is_aborted(std::size_t path) const {
  return std::any_of(aborted.begin(), aborted.end(),
                     [path](const AbortedPath& a) { return a.path == path; });
}

PathSimulator::PathSimulator(const DiffusionSpec& spec, TimeGrid grid, const CounterRng& noise,
                             const ControlFn* control, double blowup_bound)
    : spec_(spec),
      grid_(std::move(grid)),
      noise_(noise),
      control_(control),
      blowup_(blowup_bound),
      x_(spec.dim()),
      drift_(spec.dim()),
      u_(Vec::Zero(spec.dim())),
      db_(spec.dim()),
      noise_term_(spec.dim()) {
  if (spec.time_homogeneous_noise()) {
    sqrt_lambda_.push_back(spec.lambda_sqrt(0.0));
  } else {
    sqrt_lambda_.reserve(grid_.steps());
    for (std::size_t l = 0; l < grid_.steps(); ++l) {
      sqrt_lambda_.push_back(spec.lambda_sqrt(grid_.time(l)));
    }
  }
}

void PathSimulator::draw_increment(std::uint64_t path, std::size_t l) {
  // Normals are consumed in pairs along the flattened (step, component)
  // index, so odd dimensions do not waste half of every draw.
  const double sqrt_dt = std::sqrt(grid_.dt());
  const std::uint64_t d = static_cast<std::uint64_t>(spec_.dim());
  for (std::uint64_t a = 0; a < d; ++a) {
    const std::uint64_t q = static_cast<std::uint64_t>(l) * d + a;
    const std::uint64_t pair = q >> 1;
    if (pair != cached_pair_) {
      cached_z_ = noise_.normal_pair(path, static_cast<std::uint32_t>(pair),
                                     static_cast<std::uint32_t>(pair >> 32));
      cached_pair_ = pair;
    }
    db_(static_cast<Eigen::Index>(a)) = sqrt_dt * cached_z_[q & 1];
  }
}

PathBatch simulate_paths(const DiffusionSpec& spec, std::size_t n, double dt, std::uint64_t seed,
                         const ControlFn* policy, SimOptions options) {
  if (n < 1) throw ConfigError("simulate_paths: n must be >= 1");
  TimeGrid grid(0.0, spec.horizon(), dt);
  const int d = spec.dim();
  const std::size_t nodes = grid.steps() + 1;

  PathBatch batch;
  batch.n_paths = n;
  batch.dim = d;
  batch.dt = grid.dt();
  batch.grid = grid.times();
  batch.seed = seed;
  batch.brownian_increments_retained = options.retain_increments;
  batch.states.assign(n * nodes * static_cast<std::size_t>(d),
                      std::numeric_limits<double>::quiet_NaN());
  if (options.retain_increments) {
    batch.increments.assign(n * grid.steps() * static_cast<std::size_t>(d), 0.0);
  }

  const CounterRng noise(seed, Stream::kDiffusion);
  const CounterRng init_rng(seed, Stream::kInitialState);
  std::vector<std::size_t> abort_step(n, 0);

#pragma omp parallel
  {
    PathSimulator sim(spec, grid, noise, policy, options.blowup_bound);
    Vec x0(d);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      spec.sample_initial(init_rng, i, x0);
      double* out = batch.states.data() + i * nodes * d;
      double* inc = options.retain_increments
                        ? batch.increments.data() + i * grid.steps() * d
                        : nullptr;
      std::size_t failed_at = 0;
      const bool ok = sim.run(
          i, x0,
          [&](const StepView& s) {
            std::copy(s.state.data(), s.state.data() + d, out + s.l * d);
            if (inc && s.increment) {
              std::copy(s.increment->data(), s.increment->data() + d, inc + s.l * d);
            }
          },
          &failed_at);
      if (!ok) abort_step[i] = failed_at;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (abort_step[i] > 0) {
      batch.aborted.push_back({i, abort_step[i], grid.time(abort_step[i])});
    }
  }
  return batch;
}

}  // namespace hjbvi
