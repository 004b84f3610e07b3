// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hjbvi/dataset.hpp"
#include "hjbvi/diffusion.hpp"
#include "hjbvi/field.hpp"
#include "hjbvi/fnclass.hpp"
#include "hjbvi/oracle.hpp"
#include "hjbvi/rewards.hpp"

namespace hjbvi {

/// exp(-(T + 2) / alpha), the lower bound on f* for normalized rewards.
double default_f_floor(double horizon, double alpha);

/// pi(t, x) = Lambda_t grad f / max(f, f_floor), optionally capped in |.|_2.
/// Copies share the clamp counter.
class PolicyHandle {
 public:
  enum class Source { kZero, kField, kComposite, kOracle };

  static PolicyHandle zero();
  /// `name` is recorded in reports, e.g. "value_model" or "closed_form".
  static PolicyHandle from_field(std::shared_ptr<const ScalarField> f, double f_floor,
                                 std::string name);
  /// sum_k w_k pi_k
  static PolicyHandle composite(std::vector<std::pair<double, PolicyHandle>> parts);
  /// Feynman–Kac gradient at every call; only practical for probing.
  static PolicyHandle oracle(std::shared_ptr<const DiffusionSpec> diff,
                             std::shared_ptr<const RewardSpec> reward, double alpha,
                             OracleConfig cfg);

  Source source() const { return source_; }
  const std::string& name() const { return name_; }
  double f_floor() const { return f_floor_; }
  void set_action_cap(std::optional<double> cap) { action_cap_ = cap; }

  void eval(const DiffusionSpec& diff, double t, const Eigen::Ref<const Vec>& x,
            Eigen::Ref<Vec> out) const;
  /// Binds the diffusion for use as a simulator control.
  ControlFn control(const DiffusionSpec& diff) const;

  std::uint64_t clamp_activations() const;
  void reset_clamp_count() const;
  json describe() const;

 private:
  Source source_ = Source::kZero;
  std::string name_ = "zero";
  std::shared_ptr<const ScalarField> field_;
  double f_floor_ = 0.0;
  std::optional<double> action_cap_;
  std::vector<std::pair<double, PolicyHandle>> parts_;
  std::shared_ptr<const DiffusionSpec> oracle_diff_;
  std::shared_ptr<const RewardSpec> oracle_reward_;
  double oracle_alpha_ = 1.0;
  OracleConfig oracle_cfg_;
  std::shared_ptr<std::atomic<std::uint64_t>> clamps_ =
      std::make_shared<std::atomic<std::uint64_t>>(0);
};

Vec policy_eval(const PolicyHandle& ph, const DiffusionSpec& diff, double t, const Vec& x);

struct ObjectiveEstimate {
  double J = 0.0;
  double std_error = 0.0;
  double terminal = 0.0, terminal_std_error = 0.0;
  double running = 0.0, running_std_error = 0.0;
  double control_cost = 0.0, control_cost_std_error = 0.0;  // (alpha/2) int pi^T Lambda^-1 pi
  std::uint64_t clamp_activations = 0;
  json to_json() const;
};

struct KlEstimate {
  double kl_quadratic = 0.0, kl_quadratic_std_error = 0.0;
  double kl_logratio = 0.0, kl_logratio_std_error = 0.0;
  double combined_std_error = 0.0;  // sqrt of the sum of squares
  double paired_std_error = 0.0;    // of the per-path difference
  json to_json() const;
};

struct PolicyEvaluation {
  ObjectiveEstimate objective;
  KlEstimate kl;
};

/// One controlled simulation, both objective and KL statistics (stream kEvaluation).
PolicyEvaluation evaluate_policy(const DiffusionSpec& diff, const RewardSpec& reward, double alpha,
                                 const PolicyHandle& ph, std::size_t n, double dt,
                                 std::uint64_t seed);

ObjectiveEstimate estimate_objective(const DiffusionSpec& diff, const RewardSpec& reward,
                                     double alpha, const PolicyHandle& ph, std::size_t n,
                                     double dt, std::uint64_t seed);

KlEstimate kl_path_estimate(const DiffusionSpec& diff, const PolicyHandle& ph, std::size_t n,
                            double dt, std::uint64_t seed);
/// From a batch simulated under `ph` with increments retained.
KlEstimate kl_from_batch(const DiffusionSpec& diff, const PolicyHandle& ph, const PathBatch& batch);

struct MirrorDescentStep {
  std::shared_ptr<const DiffusionSpec> diffusion;
  double alpha = 1.0;
  RewardSpec reward;
  /// Control of the previous policy carried by the new drift, as a policy handle.
  PolicyHandle carried;
};

/// Drift b + pi_prev / (1 + alpha0 gamma), alpha' = alpha0 + 1/gamma. With
/// `policy_penalty` the running reward also gets
/// -alpha0 |Lambda^{-1/2} pi_prev|^2 / (2 (1 + alpha0 gamma)).
MirrorDescentStep mirror_descent_step(std::shared_ptr<const DiffusionSpec> diff,
                                      const RewardSpec& reward, double alpha0, double gamma_md,
                                      const PolicyHandle& prev_policy, bool policy_penalty = false);

/// Ridge regression of exp(Y_i / alpha) on phi(t_k, x_k) over every snapshot.
ValueModel classifier_guidance_fit(const ObservationDataset& ds, std::shared_ptr<const Basis> basis,
                                   double alpha, double ridge = -1.0);

}  // namespace hjbvi
