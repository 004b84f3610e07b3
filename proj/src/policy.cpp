// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/policy.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hjbvi/errors.hpp"

namespace hjbvi {

double default_f_floor(double horizon, double alpha) { return std::exp(-(horizon + 2.0) / alpha); }

PolicyHandle PolicyHandle::zero() { return PolicyHandle{}; }

PolicyHandle PolicyHandle::from_field(std::shared_ptr<const ScalarField> f, double f_floor,
                                      std::string name) {
  if (!f) throw ConfigError("policy: missing field");
  if (!(f_floor > 0.0)) throw ConfigError("policy: f_floor must be positive");
  PolicyHandle ph;
  ph.source_ = Source::kField;
  ph.name_ = std::move(name);
  ph.field_ = std::move(f);
  ph.f_floor_ = f_floor;
  return ph;
}

PolicyHandle PolicyHandle::composite(std::vector<std::pair<double, PolicyHandle>> parts) {
  PolicyHandle ph;
  ph.source_ = Source::kComposite;
  ph.name_ = "composite";
  ph.parts_ = std::move(parts);
  for (auto& [w, part] : ph.parts_) part.clamps_ = ph.clamps_;
  return ph;
}

PolicyHandle PolicyHandle::oracle(std::shared_ptr<const DiffusionSpec> diff,
                                  std::shared_ptr<const RewardSpec> reward, double alpha,
                                  OracleConfig cfg) {
  PolicyHandle ph;
  ph.source_ = Source::kOracle;
  ph.name_ = "oracle";
  ph.oracle_diff_ = std::move(diff);
  ph.oracle_reward_ = std::move(reward);
  ph.oracle_alpha_ = alpha;
  ph.oracle_cfg_ = cfg;
  return ph;
}

void PolicyHandle::eval(const DiffusionSpec& diff, double t, const Eigen::Ref<const Vec>& x,
                        Eigen::Ref<Vec> out) const {
  const int d = diff.dim();
  switch (source_) {
    case Source::kZero:
      out.setZero();
      return;
    case Source::kField: {
      thread_local Vec grad;
      grad.resize(d);
      double f = field_->value_gradient(t, x, grad);
      if (!(f >= f_floor_)) {
        clamps_->fetch_add(1, std::memory_order_relaxed);
        f = f_floor_;
      }
      if (diff.time_homogeneous_noise()) {
        out.noalias() = diff.diffusion_matrix().base * grad;
      } else {
        out.noalias() = diff.lambda(t) * grad;
      }
      out /= f;
      break;
    }
    case Source::kComposite: {
      Vec tmp(d);
      out.setZero();
      for (const auto& [w, part] : parts_) {
        part.eval(diff, t, x, tmp);
        out += w * tmp;
      }
      break;
    }
    case Source::kOracle:
      out = fk_gradient(*oracle_diff_, *oracle_reward_, oracle_alpha_, t, Vec(x), oracle_cfg_).policy;
      break;
  }
  if (action_cap_) {
    const double nrm = out.norm();
    if (nrm > *action_cap_) out *= *action_cap_ / nrm;
  }
}

ControlFn PolicyHandle::control(const DiffusionSpec& diff) const {
  return [self = *this, &diff](double t, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> out) {
    self.eval(diff, t, x, out);
  };
}

std::uint64_t PolicyHandle::clamp_activations() const { return clamps_->load(); }
void PolicyHandle::reset_clamp_count() const { clamps_->store(0); }

json PolicyHandle::describe() const {
  json j;
  j["source"] = name_;
  if (source_ == Source::kField) j["f_floor"] = f_floor_;
  if (action_cap_) j["action_cap"] = *action_cap_;
  if (source_ == Source::kComposite) {
    json parts = json::array();
    for (const auto& [w, part] : parts_) parts.push_back(json{{"weight", w}, {"policy", part.describe()}});
    j["parts"] = std::move(parts);
  }
  if (source_ == Source::kOracle) j["oracle"] = oracle_cfg_.to_json();
  return j;
}

Vec policy_eval(const PolicyHandle& ph, const DiffusionSpec& diff, double t, const Vec& x) {
  if (x.size() != diff.dim()) throw ConfigError("policy_eval: state dimension mismatch");
  Vec out(diff.dim());
  ph.eval(diff, t, x, out);
  if (!out.allFinite()) {
    throw NumericalError(fmt::format("policy '{}' is not finite at t = {}", ph.name(), t));
  }
  return out;
}

json ObjectiveEstimate::to_json() const {
  return json{{"J_hat", J},
              {"stderr", std_error},
              {"components",
               {{"terminal", terminal},
                {"terminal_stderr", terminal_std_error},
                {"running", running},
                {"running_stderr", running_std_error},
                {"control_cost", control_cost},
                {"control_cost_stderr", control_cost_std_error}}},
              {"clamp_activations", clamp_activations}};
}

json KlEstimate::to_json() const {
  return json{{"kl_quadratic", kl_quadratic},
              {"kl_quadratic_stderr", kl_quadratic_std_error},
              {"kl_logratio", kl_logratio},
              {"kl_logratio_stderr", kl_logratio_std_error},
              {"combined_stderr", combined_std_error},
              {"paired_stderr", paired_std_error}};
}

namespace {

// Lambda_t^{-1/2} on every step of the grid (one entry if constant).
std::vector<Mat> inverse_sqrt_lambdas(const DiffusionSpec& diff, const TimeGrid& grid) {
  std::vector<Mat> out;
  auto inv_sqrt = [](const Mat& lam) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(lam);
    return Mat(eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
               eig.eigenvectors().transpose());
  };
  if (diff.time_homogeneous_noise()) {
    out.push_back(inv_sqrt(diff.lambda(0.0)));
  } else {
    for (std::size_t l = 0; l < grid.steps(); ++l) out.push_back(inv_sqrt(diff.lambda(grid.time(l))));
  }
  return out;
}

struct PathStats {
  double terminal = 0.0;
  double running = 0.0;
  double quad = 0.0;      // 1/2 int |Lambda^{-1/2} pi|^2 dt
  double logratio = 0.0;  // int (Lambda^{-1/2} pi)^T dB + quad
};

KlEstimate kl_summary(const std::vector<PathStats>& stats) {
  const std::size_t n = stats.size();
  std::vector<double> q(n), lr(n), dq(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = stats[i].quad;
    lr[i] = stats[i].logratio;
    dq[i] = stats[i].logratio - stats[i].quad;
  }
  KlEstimate kl;
  const auto mq = mean_stderr(q);
  const auto ml = mean_stderr(lr);
  kl.kl_quadratic = mq.mean;
  kl.kl_quadratic_std_error = mq.std_error;
  kl.kl_logratio = ml.mean;
  kl.kl_logratio_std_error = ml.std_error;
  kl.combined_std_error = std::hypot(mq.std_error, ml.std_error);
  kl.paired_std_error = mean_stderr(dq).std_error;
  return kl;
}

}  // namespace

PolicyEvaluation evaluate_policy(const DiffusionSpec& diff, const RewardSpec& reward, double alpha,
                                 const PolicyHandle& ph, std::size_t n, double dt,
                                 std::uint64_t seed) {
  if (n < 2) throw ConfigError("evaluate_policy: need n >= 2 paths");
  const TimeGrid grid(0.0, diff.horizon(), dt);
  const std::size_t L = grid.steps();
  const double h = grid.dt();
  const int d = diff.dim();
  const std::vector<Mat> inv_sqrt = inverse_sqrt_lambdas(diff, grid);
  const ControlFn control = ph.control(diff);
  const CounterRng noise(seed, Stream::kEvaluation);
  const CounterRng init_rng(seed, Stream::kInitialState);
  std::vector<PathStats> stats(n);
  std::vector<std::size_t> failed(n, 0);
  const std::uint64_t clamps_before = ph.clamp_activations();

#pragma omp parallel
  {
    PathSimulator sim(diff, grid, noise, &control, 1e6);
    Vec x0(d), z(d);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      diff.sample_initial(init_rng, i, x0);
      PathStats& s = stats[i];
      std::size_t abort_step = 0;
      const bool ok = sim.run(
          i, x0,
          [&](const StepView& v) {
            const double r = intermediate_eval(reward, v.t, v.state);
            s.running += (v.l == 0 || v.l == L ? 0.5 : 1.0) * r * h;
            if (v.l == L) {
              s.terminal = terminal_eval(reward, v.state);
              return;
            }
            const Mat& is = inv_sqrt.size() == 1 ? inv_sqrt[0] : inv_sqrt[v.l];
            z.noalias() = is * (*v.control);
            const double q = 0.5 * z.squaredNorm() * h;
            s.quad += q;
            s.logratio += z.dot(*v.increment) + q;
          },
          &abort_step);
      if (!ok) failed[i] = abort_step;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) {
      throw NumericalError(fmt::format("controlled path {} under policy '{}' blew up at step {}", i,
                                       ph.name(), failed[i]));
    }
  }

  std::vector<double> term(n), run(n), cost(n), total(n);
  for (std::size_t i = 0; i < n; ++i) {
    term[i] = stats[i].terminal;
    run[i] = stats[i].running;
    cost[i] = alpha * stats[i].quad;
    total[i] = term[i] + run[i] - cost[i];
  }
  PolicyEvaluation out;
  ObjectiveEstimate& o = out.objective;
  const auto mt = mean_stderr(term), mr = mean_stderr(run), mc = mean_stderr(cost),
             mj = mean_stderr(total);
  o.J = mj.mean;
  o.std_error = mj.std_error;
  o.terminal = mt.mean;
  o.terminal_std_error = mt.std_error;
  o.running = mr.mean;
  o.running_std_error = mr.std_error;
  o.control_cost = mc.mean;
  o.control_cost_std_error = mc.std_error;
  o.clamp_activations = ph.clamp_activations() - clamps_before;
  out.kl = kl_summary(stats);
  return out;
}

ObjectiveEstimate estimate_objective(const DiffusionSpec& diff, const RewardSpec& reward,
                                     double alpha, const PolicyHandle& ph, std::size_t n,
                                     double dt, std::uint64_t seed) {
  return evaluate_policy(diff, reward, alpha, ph, n, dt, seed).objective;
}

KlEstimate kl_path_estimate(const DiffusionSpec& diff, const PolicyHandle& ph, std::size_t n,
                            double dt, std::uint64_t seed) {
  const ControlFn control = ph.control(diff);
  const PathBatch batch = simulate_paths(diff, n, dt, seed, &control, {1e6, true});
  return kl_from_batch(diff, ph, batch);
}

KlEstimate kl_from_batch(const DiffusionSpec& diff, const PolicyHandle& ph, const PathBatch& batch) {
  if (!batch.brownian_increments_retained) {
    throw ConfigError("kl_from_batch: the batch did not retain Brownian increments");
  }
  if (!batch.aborted.empty()) throw NumericalError("kl_from_batch: batch has aborted paths");
  const TimeGrid grid = TimeGrid::nearest(0.0, diff.horizon(), batch.dt);
  const std::vector<Mat> inv_sqrt = inverse_sqrt_lambdas(diff, grid);
  const int d = diff.dim();
  std::vector<PathStats> stats(batch.n_paths);
#pragma omp parallel
  {
    Vec u(d), z(d);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < batch.n_paths; ++i) {
      for (std::size_t l = 0; l < batch.steps(); ++l) {
        ph.eval(diff, batch.grid[l], batch.state(i, l), u);
        const Mat& is = inv_sqrt.size() == 1 ? inv_sqrt[0] : inv_sqrt[l];
        z.noalias() = is * u;
        const double q = 0.5 * z.squaredNorm() * batch.dt;
        stats[i].quad += q;
        stats[i].logratio += z.dot(batch.increment(i, l)) + q;
      }
    }
  }
  return kl_summary(stats);
}

MirrorDescentStep mirror_descent_step(std::shared_ptr<const DiffusionSpec> diff,
                                      const RewardSpec& reward, double alpha0, double gamma_md,
                                      const PolicyHandle& prev_policy, bool policy_penalty) {
  if (!(gamma_md > 0.0)) throw ConfigError("mirror_descent_step: gamma must be positive");
  if (!(alpha0 > 0.0)) throw ConfigError("mirror_descent_step: alpha0 must be positive");
  if (!diff) throw ConfigError("mirror_descent_step: missing diffusion");
  const double scale = 1.0 / (1.0 + alpha0 * gamma_md);
  ShiftedDrift shifted;
  shifted.base = diff;
  shifted.control = [prev_policy, diff](double t, const Eigen::Ref<const Vec>& x,
                                        Eigen::Ref<Vec> out) { prev_policy.eval(*diff, t, x, out); };
  shifted.scale = scale;
  shifted.description = dump_canonical(prev_policy.describe());

  MirrorDescentStep out;
  out.diffusion = std::make_shared<const DiffusionSpec>(
      diff->dim(), diff->horizon(), std::move(shifted), diff->diffusion_matrix(), diff->init());
  out.alpha = alpha0 + 1.0 / gamma_md;
  out.carried = PolicyHandle::composite({{scale, prev_policy}});
  out.reward = reward;
  if (policy_penalty) {
    const auto base = std::make_shared<const RewardSpec>(reward);
    const double coef = alpha0 * scale / 2.0;
    StateFn fn = [base, prev_policy, diff, coef](double t, const Eigen::Ref<const Vec>& x) {
      Vec u(diff->dim());
      prev_policy.eval(*diff, t, x, u);
      return intermediate_eval(*base, t, x) - coef * u.dot(diff->lambda(t).ldlt().solve(u));
    };
    json desc{{"type", "mirror_descent_penalized"},
              {"base", reward.to_json()},
              {"policy", prev_policy.describe()},
              {"coefficient", coef}};
    out.reward.intermediate = CustomReward{std::move(fn), std::move(desc)};
    out.reward.r_scale = 1.0;
    out.reward.r_shift = 0.0;
    out.reward.manufactured = true;  // the normalized bound no longer applies
  }
  return out;
}

ValueModel classifier_guidance_fit(const ObservationDataset& ds, std::shared_ptr<const Basis> basis,
                                   double alpha, double ridge) {
  if (ds.records.empty()) throw ConfigError("classifier_guidance_fit: empty dataset");
  if (ds.K == 0) throw ConfigError("classifier_guidance_fit: dataset has no snapshots");
  const int p = basis->size();
  const std::size_t N = ds.observation_count();
  Mat phi(N, p);
  Vec target(N);
#pragma omp parallel
  {
    FeatureBlock fb;
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      const double e = std::exp(ds.records[i].Y / alpha);
      for (std::size_t k = 0; k < ds.K; ++k) {
        const auto& o = ds.records[i].obs[k];
        basis->features(o.t, o.x, fb);
        phi.row(i * ds.K + k) = fb.phi.transpose();
        target(i * ds.K + k) = e;
      }
    }
  }
  Mat normal = phi.transpose() * phi / static_cast<double>(N);
  const Vec rhs = phi.transpose() * target / static_cast<double>(N);
  const double lam = ridge >= 0.0 ? ridge : 1e-8 * normal.trace() / p;
  normal.diagonal().array() += lam;
  const Eigen::LDLT<Mat> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
    throw NumericalError("classifier_guidance_fit: singular normal equations; add ridge");
  }
  const Vec theta = ldlt.solve(rhs);
  if (!theta.allFinite()) throw NumericalError("classifier_guidance_fit: non-finite solution");
  return ValueModel(std::move(basis), theta, std::max(theta.norm() * (1.0 + 1e-12), 1e-12));
}

}  // namespace hjbvi
