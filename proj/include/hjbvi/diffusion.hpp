// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hjbvi/json_util.hpp"
#include "hjbvi/numerics.hpp"
#include "hjbvi/rng.hpp"

namespace hjbvi {

class DiffusionSpec;

/// Additive drift control u = pi_t(x), written into `out`.
using ControlFn =
    std::function<void(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out)>;

// b(x) = -theta * (x - mu)
struct OuDrift {
  double theta = 1.0;
  Vec mu;
};

// b_t(x) = (a0 + t a1) x + c0 + t c1
struct AffineDrift {
  Mat a0, a1;
  Vec c0, c1;
};

// Separable polynomial: b_i(x) = sum_k coeffs(i, k) * x_i^k
struct PolynomialDrift {
  Mat coeffs;
};

// b_t(x) = base_t(x) + scale * control(t, x); used for mirror-descent updates.
struct ShiftedDrift {
  std::shared_ptr<const DiffusionSpec> base;
  ControlFn control;
  double scale = 1.0;
  std::string description;
};

using Drift = std::variant<OuDrift, AffineDrift, PolynomialDrift, ShiftedDrift>;

// Lambda_t = base + t * slope, symmetric positive definite on [0, T].
struct DiffusionMatrix {
  Mat base;
  Mat slope;
};

struct PointInit {
  Vec x0;
};
struct GaussianInit {
  Vec mean;
  Mat cov;
};
using InitLaw = std::variant<PointInit, GaussianInit>;

/// Uncontrolled SDE dX = b_t(X) dt + Lambda_t^{1/2} dB on [0, T]. Immutable.
class DiffusionSpec {
 public:
  /// `allow_degenerate` admits Lambda = 0 (deterministic test mode).
  DiffusionSpec(int dim, double horizon, Drift drift, DiffusionMatrix diffusion, InitLaw init,
                bool allow_degenerate = false);

  int dim() const { return dim_; }
  double horizon() const { return horizon_; }
  const Drift& drift_family() const { return drift_; }
  const DiffusionMatrix& diffusion_matrix() const { return diffusion_; }
  const InitLaw& init() const { return init_; }
  bool time_homogeneous_noise() const { return constant_lambda_; }

  /// Allocation-free drift evaluation; no validation.
  void drift(double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) const;
  Mat lambda(double t) const;
  Mat lambda_sqrt(double t) const;

  /// Extreme eigenvalues of Lambda_t over a uniform t-grid of `grid_points`.
  std::pair<double, double> lambda_bounds(int grid_points = 101) const;

  const OuDrift* ou() const { return std::get_if<OuDrift>(&drift_); }

  void sample_initial(const CounterRng& rng, std::uint64_t path, Eigen::Ref<Vec> out) const;

  json to_json() const;
  static DiffusionSpec from_json(const json& j);
  std::string digest() const;

 private:
  int dim_;
  double horizon_;
  Drift drift_;
  DiffusionMatrix diffusion_;
  InitLaw init_;
  bool constant_lambda_ = true;
  Mat lambda_sqrt_const_;
  Mat init_sqrt_;
};

/// b_t(x) with range and finiteness checks.
Vec drift_eval(const DiffusionSpec& spec, double t, const Vec& x);

/// <b_t(x), grad> + 1/2 Tr(Lambda_t hess).
double generator_apply(const DiffusionSpec& spec, double t, const Vec& x, const Vec& grad,
                       const Mat& hess);

/// Uniform grid t0 = s_0 < ... < s_L = t1 with spacing dt; the last stamp is t1 exactly.
class TimeGrid {
 public:
  /// Requires (t1 - t0) / dt to be an integer within 1e-12 relative.
  TimeGrid(double t0, double t1, double dt);
  /// Uses round((t1 - t0) / dt_target) steps of equal size.
  static TimeGrid nearest(double t0, double t1, double dt_target);

  std::size_t steps() const { return times_.size() - 1; }
  double dt() const { return dt_; }
  double time(std::size_t l) const { return times_[l]; }
  const std::vector<double>& times() const { return times_; }

 private:
  TimeGrid() = default;
  std::vector<double> times_;
  double dt_ = 0.0;
};

struct SimOptions {
  double blowup_bound = 1e6;
  bool retain_increments = false;
};

struct AbortedPath {
  std::size_t path = 0;
  std::size_t step = 0;
  double time = 0.0;
};

/// n_paths x (L + 1) x d states on a uniform grid.
struct PathBatch {
  std::size_t n_paths = 0;
  int dim = 0;
  double dt = 0.0;
  std::vector<double> grid;
  std::vector<double> states;
  /// Brownian increments dB_l (not scaled by Lambda^{1/2}), n_paths x L x d.
  std::vector<double> increments;
  std::uint64_t seed = 0;
  bool brownian_increments_retained = false;
  std::vector<AbortedPath> aborted;

  std::size_t steps() const { return grid.size() - 1; }
  Eigen::Map<const Vec> state(std::size_t path, std::size_t l) const {
    return {states.data() + (path * grid.size() + l) * dim, dim};
  }
  Eigen::Map<const Vec> increment(std::size_t path, std::size_t l) const {
    return {increments.data() + (path * steps() + l) * dim, dim};
  }
  bool is_aborted(std::size_t path) const;
};

/// Euler–Maruyama, X_{l+1} = X_l + (b + pi)(t_l, X_l) dt + Lambda_{t_l}^{1/2} dB_l.
/// Paths whose |X|_inf exceeds the blow-up bound are stopped, filled with NaN
/// from that step on, and listed in `aborted`.
PathBatch simulate_paths(const DiffusionSpec& spec, std::size_t n, double dt,
                         std::uint64_t seed, const ControlFn* policy = nullptr,
                         SimOptions options = {});

/// Per-step callback of simulate_single_path: the state X_l at time t_l, the
/// control u_l applied on [t_l, t_{l+1}), and the Brownian increment dB_l.
/// At the final node (l == L) `control` and `increment` are empty.
struct StepView {
  std::size_t l;
  double t;
  const Vec& state;
  const Vec* control;
  const Vec* increment;
};

/// Scratch and cached noise factors for repeatedly simulating on one grid.
class PathSimulator {
 public:
  PathSimulator(const DiffusionSpec& spec, TimeGrid grid, const CounterRng& noise,
                const ControlFn* control, double blowup_bound);

  const TimeGrid& grid() const { return grid_; }

  /// Simulates one path from `x_start` at grid().time(0). Returns false and
  /// sets `abort_step` if the blow-up bound was exceeded. Not thread-safe;
  /// use one simulator per thread.
  template <class OnStep>
  bool run(std::uint64_t path, const Eigen::Ref<const Vec>& x_start, OnStep&& on_step,
           std::size_t* abort_step = nullptr);

 private:
  void draw_increment(std::uint64_t path, std::size_t l);

  const DiffusionSpec& spec_;
  TimeGrid grid_;
  CounterRng noise_;
  const ControlFn* control_;
  double blowup_;
  std::vector<Mat> sqrt_lambda_;
  Vec x_, drift_, u_, db_, noise_term_;
  std::uint64_t cached_pair_ = ~std::uint64_t{0};
  std::array<double, 2> cached_z_{};
};

template <class OnStep>
bool PathSimulator::run(std::uint64_t path, const Eigen::Ref<const Vec>& x_start,
                        OnStep&& on_step, std::size_t* abort_step) {
  x_ = x_start;
  cached_pair_ = ~std::uint64_t{0};
  if (!control_) u_.setZero();
  const std::size_t steps = grid_.steps();
  const double dt = grid_.dt();
  for (std::size_t l = 0; l < steps; ++l) {
    const double t = grid_.time(l);
    spec_.drift(t, x_, drift_);
    if (control_) (*control_)(t, x_, u_);
    draw_increment(path, l);
    on_step(StepView{l, t, x_, &u_, &db_});
    const Mat& s = sqrt_lambda_.size() == 1 ? sqrt_lambda_[0] : sqrt_lambda_[l];
    noise_term_.noalias() = s * db_;
    if (control_) drift_ += u_;
    x_ += drift_ * dt + noise_term_;
    if (!(x_.cwiseAbs().maxCoeff() <= blowup_)) {
      if (abort_step) *abort_step = l + 1;
      return false;
    }
  }
  on_step(StepView{steps, grid_.time(steps), x_, nullptr, nullptr});
  return true;
}

}  // namespace hjbvi
