// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>
#include <omp.h>

#include "hjbvi/dataset.hpp"
#include "hjbvi/errors.hpp"
#include "hjbvi/experiment.hpp"
#include "hjbvi/forms.hpp"
#include "hjbvi/oracle.hpp"
#include "hjbvi/policy.hpp"
#include "hjbvi/solver.hpp"

namespace fs = std::filesystem;

namespace hjbvi {

json CriterionResult::to_json() const {
  return json{{"id", id},   {"name", name},           {"pass", pass},     {"measured", measured},
              {"threshold", threshold}, {"relation", relation}, {"detail", detail}};
}

std::string format_result_line(const CriterionResult& r) {
  return fmt::format("[{}] C{} {}: measured {:.6g} {} {:.6g} ({:.1f} s)", r.pass ? "PASS" : "FAIL",
                     r.id, r.name, r.measured, r.relation, r.threshold, r.seconds);
}

json ou_instance_config(std::uint64_t seed) {
  json probes = json::array();
  for (auto [t, x] : {std::pair{0.0, 0.0}, {0.25, 0.8}, {0.5, -1.0}, {0.75, 1.5}, {0.9, -0.5}}) {
    probes.push_back(json{{"t", t}, {"x", json::array({x})}});
  }
  return json{
      {"problem",
       {{"diffusion",
         {{"dim", 1},
          {"horizon", 1.0},
          {"drift", {{"type", "ou"}, {"theta", 1.0}, {"mu", json::array({0.0})}}},
          {"diffusion", {{"lambda", json::array({json::array({2.0})})}}},
          {"init",
           {{"type", "gaussian"},
            {"mean", json::array({0.0})},
            {"cov", json::array({json::array({1.0})})}}}}},
        {"reward",
         {{"intermediate", {{"type", "constant"}, {"value", -1.0}}},
          {"terminal", {{"type", "linear"}, {"c", json::array({0.5})}}},
          {"r_max", 1.0},
          {"bound", 1.0},
          {"normalized", true}}},
        {"alpha", 1.0},
        {"T", 1.0}}},
      {"data", {{"n", 2000}, {"K", 20}, {"dt", 1e-3}, {"seed", seed}}},
      {"basis", {{"time_degree", 3}, {"monomial_degree", 3}}},
      {"solver", {{"max_iters", 20000}, {"stop_tol", 1e-12}}},
      {"oracle",
       {{"n_paths", 20000},
        {"dt", 1e-3},
        {"seed", seed + 1},
        {"gradient_fd_step", 1e-2},
        {"potential_scaling", "alpha_r"}}},
      {"evaluation",
       {{"probes", probes},
        {"n_eval", 100000},
        {"dt", 2e-3},
        {"seed", seed + 2},
        {"holdout_n", 2000},
        {"baseline", true}}},
      {"mirror_descent", {{"steps", 2}, {"gamma", 1.0}, {"policy_penalty", false}}},
      {"outputs", {{"directory", "out"}, {"formats", json::array({"json", "csv"})}}},
      {"acceptance", {{"seed", seed}}}};
}

namespace {

using Clock = std::chrono::steady_clock;

CriterionResult criterion(int id, std::string name, double threshold, std::string relation) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  r.threshold = threshold;
  r.relation = std::move(relation);
  return r;
}

Vec random_normal(const CounterRng& rng, std::uint64_t index, int p) {
  Vec v(p);
  for (int b = 0; 2 * b < p; ++b) {
    const auto z = rng.normal_pair(index, 0, static_cast<std::uint32_t>(b));
    v(2 * b) = z[0];
    if (2 * b + 1 < p) v(2 * b + 1) = z[1];
  }
  return v;
}

double holdout_relative_error(const ObservationDataset& holdout, const ValueModel& fit,
                              std::shared_ptr<const ScalarField> truth) {
  CombinedField diff({{1.0, std::make_shared<const ValueModel>(fit)}, {-1.0, truth}});
  return std::sqrt(empirical_energy_fields(holdout, diff, diff) /
                   empirical_energy_fields(holdout, *truth, *truth));
}

/// Shared instances, built on first use.
class Battery {
 public:
  explicit Battery(const AcceptanceOptions& opt) : opt_(opt) {}

  CriterionResult c1();
  CriterionResult c2();
  CriterionResult c3();
  CriterionResult c4();
  CriterionResult c5();
  CriterionResult c6();
  CriterionResult c7();
  CriterionResult c8();
  CriterionResult c9();
  CriterionResult c10();

 private:
  // OU instance
  const ExperimentConfig& ou_config() {
    if (!ou_cfg_) ou_cfg_ = ExperimentConfig::from_json(ou_instance_config(opt_.seed));
    return *ou_cfg_;
  }
  const Problem& ou() {
    if (!ou_) ou_ = build_problem(ou_config());
    return *ou_;
  }
  const MarginalMeasure& ou_measure() {
    if (!ou_mu_) ou_mu_ = ou_gauss_hermite_measure(*ou().diffusion, 48, 101);
    return *ou_mu_;
  }

  // manufactured instance
  struct Manufactured {
    std::shared_ptr<const Basis> basis;
    std::shared_ptr<const ValueModel> fstar;
    std::shared_ptr<const RewardSpec> reward;
    ManufacturedProblem info;
    double alpha = 1.0;
  };
  const Manufactured& manufactured();
  const ObservationDataset& manufactured_holdout();
  struct ManufacturedFit {
    std::size_t n = 0;
    std::shared_ptr<FormContext> ctx;
    FitResult result;
    double error = 0.0;
  };
  const ManufacturedFit& manufactured_fit(std::size_t n);

  // policies on the OU instance
  struct PolicyStudy {
    PolicyEvaluation zero, exact, fitted;
    FitReport fit;
  };
  const PolicyStudy& policy_study();

  const AcceptanceOptions& opt_;
  std::optional<ExperimentConfig> ou_cfg_;
  std::optional<Problem> ou_;
  std::optional<MarginalMeasure> ou_mu_;
  std::optional<Manufactured> man_;
  std::optional<ObservationDataset> man_holdout_;
  std::vector<ManufacturedFit> man_fits_;
  std::optional<PolicyStudy> study_;
};

constexpr std::size_t kManufacturedK = 20;
constexpr double kManufacturedDt = 1e-3;

const Battery::Manufactured& Battery::manufactured() {
  if (man_) return *man_;
  const DiffusionSpec& diff = *ou().diffusion;
  std::vector<SpatialFeature> spatial{MonomialFeature{{0}}};
  for (int k = 0; k < 8; ++k) spatial.push_back(RbfFeature{Vec::Constant(1, -2.1 + 0.6 * k), 0.6});
  auto basis = std::make_shared<const Basis>(1, diff.horizon(), 3, spatial);

  // f* = (1 + t)^3 (1 + eps h(x)): exactly degree 3 in t, and d_t f*/f* = 3/(1+t) >= 1.5
  // keeps r <= -1 once eps is small, so the problem is coercive like the OU instance
  const int J = basis->spatial_count();
  Vec time_coef(4);  // (1 + t)^3 in Legendre polynomials of s = 2t/T - 1
  {
    Mat V(4, 4);
    Vec rhs(4);
    Vec pl(4), dpl(4);
    for (int i = 0; i < 4; ++i) {
      const double t = diff.horizon() * i / 3.0;
      basis->time_factors(t, pl, dpl);
      V.row(i) = pl.transpose();
      rhs(i) = std::pow(1.0 + t, 3);
    }
    time_coef = V.fullPivLu().solve(rhs);
  }
  const CounterRng rng(opt_.seed, Stream::kModelSampling);
  const Vec pert = random_normal(rng, 1'000'000, J);
  const MarginalMeasure probes = ou_gauss_hermite_measure(diff, 32, 41);
  double eps = 0.3;
  std::shared_ptr<const ValueModel> fstar;
  ManufacturedProblem info;
  for (;;) {
    Vec h = eps * pert;
    h(0) = 1.0;
    Vec theta(basis->size());
    for (int l = 0; l < 4; ++l) theta.segment(l * J, J) = time_coef(l) * h;
    fstar = std::make_shared<const ValueModel>(basis, theta, 100.0);
    info = manufactured_problem(fstar, diff, 1.0, probes,
                                json{{"type", "manufactured"}, {"fstar", fstar->to_json()}},
                                UniformNoise{0.5});
    if (info.f_min >= 0.5 && info.r_max <= -1.0) break;
    eps *= 0.5;
  }
  Manufactured m;
  m.basis = basis;
  m.fstar = fstar;
  m.alpha = 1.0;
  m.info = std::move(info);
  m.reward = std::make_shared<const RewardSpec>(m.info.reward);
  man_ = std::move(m);
  return *man_;
}

const ObservationDataset& Battery::manufactured_holdout() {
  if (!man_holdout_) {
    const auto& m = manufactured();
    man_holdout_ = generate_dataset(*ou().diffusion, *m.reward, 2000, kManufacturedK,
                                    kManufacturedDt, mix64(opt_.seed + 17), m.alpha);
  }
  return *man_holdout_;
}

const Battery::ManufacturedFit& Battery::manufactured_fit(std::size_t n) {
  for (const auto& f : man_fits_) {
    if (f.n == n) return f;
  }
  const auto& m = manufactured();
  const DiffusionSpec& diff = *ou().diffusion;
  const ObservationDataset ds = generate_dataset(diff, *m.reward, n, kManufacturedK, kManufacturedDt,
                                                 mix64(opt_.seed + n), m.alpha);
  auto ctx = std::make_shared<FormContext>(assemble(ds, m.basis, diff, m.alpha));
  SolverConfig cfg;
  cfg.max_iters = 50000;
  cfg.stop_tol = 1e-13;
  cfg.record_trace = false;
  FitResult res = fit(*ctx, cfg);
  const double err = holdout_relative_error(manufactured_holdout(), res.model, m.fstar);
  man_fits_.push_back(ManufacturedFit{n, std::move(ctx), std::move(res), err});
  return man_fits_.back();
}

const Battery::PolicyStudy& Battery::policy_study() {
  if (study_) return *study_;
  const ExperimentConfig& cfg = ou_config();
  const Problem& p = ou();
  const DiffusionSpec& diff = *p.diffusion;
  const ObservationDataset ds = generate_dataset(diff, *p.reward, cfg.data.n, cfg.data.K,
                                                 cfg.data.dt, cfg.data.seed, p.alpha);
  FitResult res = fit(ds, cfg.make_basis(), diff, p.alpha, cfg.solver, p.scaling);
  const double floor = default_f_floor(diff.horizon(), p.alpha);
  auto model = std::make_shared<const ValueModel>(res.model);
  const std::size_t n = cfg.evaluation.n_eval;
  const double dt = cfg.evaluation.dt;
  const std::uint64_t seed = cfg.evaluation.seed;
  PolicyStudy s;
  s.zero = evaluate_policy(diff, *p.reward, p.alpha, PolicyHandle::zero(), n, dt, seed);
  s.exact = evaluate_policy(diff, *p.reward, p.alpha,
                            PolicyHandle::from_field(p.truth, floor, "closed_form"), n, dt, seed);
  s.fitted = evaluate_policy(diff, *p.reward, p.alpha,
                             PolicyHandle::from_field(model, floor, "value_model"), n, dt, seed);
  s.fit = std::move(res.report);
  study_ = std::move(s);
  return *study_;
}

// 1. Feynman–Kac Monte Carlo against the OU closed form
CriterionResult Battery::c1() {
  CriterionResult r = criterion(1, "oracle agreement", 0.02, "<=");
  const Problem& p = ou();
  OracleConfig cfg;
  cfg.n_paths = 200000;
  cfg.dt = 1e-3;
  cfg.seed = opt_.seed + 101;
  const auto start = Clock::now();
  json rows = json::array();
  double worst = 0.0;
  for (const auto& pp : ou_config().evaluation.probes) {
    const FkEstimate fk = fk_value(*p.diffusion, *p.reward, p.alpha, pp.t, pp.x, cfg);
    const double exact = p.truth->value(pp.t, pp.x);
    const double dev = std::abs(fk.value / exact - 1.0);
    worst = std::max(worst, dev);
    rows.push_back(json{{"t", pp.t}, {"x", pp.x(0)}, {"fk", fk.value}, {"stderr", fk.std_error},
                        {"exact", exact}, {"relative_deviation", dev}});
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  r.measured = worst;
  r.pass = worst <= r.threshold && secs <= 60.0;
  r.detail = {{"probes", rows}, {"n_paths", cfg.n_paths}, {"dt", cfg.dt},
              {"runtime_limit_seconds", 60.0}, {"runtime_within_limit", secs <= 60.0}};
  return r;
}

// 2. B[f, f] >= 0.45 min(alpha, lambda_min, 1) |f|^2 for random in-class f
CriterionResult Battery::c2() {
  const Problem& p = ou();
  const auto basis = ou_config().make_basis();
  const double floor = std::min({p.alpha, p.diffusion->lambda_bounds().first, 1.0});
  CriterionResult r = criterion(2, "bilinear positivity", 0.45 * floor, ">=");
  const CounterRng rng(opt_.seed, Stream::kModelSampling);
  const auto& mu = ou_measure();
  double worst = std::numeric_limits<double>::infinity();
  int violations = 0;
  for (int k = 0; k < 100; ++k) {
    ValueModel f(basis, random_normal(rng, static_cast<std::uint64_t>(k), basis->size()), 1e6);
    const double b = quadrature_bilinear(f, f, *p.diffusion, *p.reward, p.alpha, mu, p.scaling);
    const double e = quadrature_energy(f, f, mu);
    const double ratio = b / e;
    worst = std::min(worst, ratio);
    if (ratio < r.threshold) ++violations;
  }
  r.measured = worst;
  r.pass = violations == 0;
  r.detail = {{"models", 100}, {"violations", violations}, {"coercivity_floor", floor}};
  return r;
}

// 3. well-specified recovery and its n^{-1/2} trend
CriterionResult Battery::c3() {
  CriterionResult r = criterion(3, "well-specified recovery", 0.10, "<=");
  const auto& small = manufactured_fit(2000);
  const auto& large = manufactured_fit(8000);
  const double ratio = small.error / large.error;
  r.measured = small.error;
  const bool band = ratio >= 1.4 && ratio <= 3.0;
  r.pass = small.error <= r.threshold && band;
  const auto& m = manufactured();
  r.detail = {{"error_n2000", small.error},
              {"error_n8000", large.error},
              {"ratio", ratio},
              {"ratio_band", {1.4, 3.0}},
              {"ratio_in_band", band},
              {"converged", {small.result.report.converged, large.result.report.converged}},
              {"iterations", {small.result.report.iterations_run, large.result.report.iterations_run}},
              {"r_range", {m.info.r_min, m.info.r_max}},
              {"fstar_min", m.info.f_min}};
  return r;
}

// 4. contraction of the population iteration
CriterionResult Battery::c4() {
  const auto& m = manufactured();
  const DiffusionSpec& diff = *ou().diffusion;
  SolverConfig cfg;
  cfg.max_iters = 400;
  cfg.stop_tol = 0.0;
  const PopulationFit pf = fit_population(diff, *m.reward, m.alpha, m.basis, cfg, ou_measure(),
                                          m.fstar.get());
  const double gamma = pf.report.gamma;
  const double floor = pf.report.coercivity_floor;
  CriterionResult r = criterion(4, "population contraction", 1.0 - gamma * floor / 4.0 + 0.05, "<=");
  // ratios are only meaningful above round-off
  const double d0 = pf.distances.front();
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t k = 2; k + 1 < pf.distances.size(); ++k) {
    if (pf.distances[k] <= 1e-9 * d0) break;
    worst = std::max(worst, pf.distances[k + 1] / pf.distances[k]);
    ++checked;
  }
  r.measured = worst;
  r.pass = checked > 0 && worst <= r.threshold;
  r.detail = {{"gamma", gamma},
              {"coercivity_floor", floor},
              {"lipschitz_estimate", pf.report.lipschitz_estimate},
              {"ratios_checked", checked},
              {"floor_relative", 1e-9},
              {"first_distance", d0},
              {"last_distance", pf.distances.back()}};
  return r;
}

// 5. plug-in policy quality on the OU instance
CriterionResult Battery::c5() {
  const auto& s = policy_study();
  const double j0 = s.zero.objective.J, js = s.exact.objective.J, jf = s.fitted.objective.J;
  const double se = std::hypot(s.fitted.objective.std_error, s.exact.objective.std_error);
  const double gap = std::abs(jf - js);
  const double tol = 0.05 * std::abs(js) + 2.0 * se;
  CriterionResult r = criterion(5, "policy quality", tol, "<=");
  r.measured = gap;
  const double half = j0 + 0.5 * (js - j0);
  r.pass = jf >= half && gap <= tol;
  r.detail = {{"J_zero", j0},
              {"J_closed_form", js},
              {"J_fitted", jf},
              {"stderr_fitted", s.fitted.objective.std_error},
              {"stderr_closed_form", s.exact.objective.std_error},
              {"half_improvement_level", half},
              {"fitted_above_half", jf >= half},
              {"fit_converged", s.fit.converged},
              {"fit_iterations", s.fit.iterations_run},
              {"n_eval", ou_config().evaluation.n_eval},
              {"dt", ou_config().evaluation.dt}};
  return r;
}

// 6. the two KL estimators agree
CriterionResult Battery::c6() {
  const auto& s = policy_study();
  CriterionResult r = criterion(6, "girsanov identity", 4.0, "<=");
  json rows = json::object();
  double worst = 0.0;
  for (const auto& [name, ev] : {std::pair<const char*, const PolicyEvaluation*>{"zero", &s.zero},
                                 {"closed_form", &s.exact},
                                 {"fitted", &s.fitted}}) {
    const KlEstimate& kl = ev->kl;
    const double z = kl.combined_std_error > 0.0
                         ? std::abs(kl.kl_quadratic - kl.kl_logratio) / kl.combined_std_error
                         : (kl.kl_quadratic == kl.kl_logratio ? 0.0 : INFINITY);
    worst = std::max(worst, z);
    rows[name] = kl.to_json();
    rows[name]["standardized_gap"] = z;
  }
  r.measured = worst;
  r.pass = worst <= r.threshold;
  r.detail = rows;
  return r;
}

// 7. oracle policies of a raw problem and its rescaled version
CriterionResult Battery::c7() {
  CriterionResult r = criterion(7, "rescaling policy invariance", 0.05, "<=");
  const auto diff = ou().diffusion;
  RewardSpec raw;
  raw.dim = 1;
  raw.intermediate = TanhReward{0.0, 0.5, Vec::Ones(1)};
  raw.terminal = TanhTerminal{0.0, 0.8, Vec::Constant(1, 0.7)};
  raw.bound = 1.0;
  const double alpha = 1.0;
  const auto [scaled, alpha_scaled] = rescale_problem(raw, alpha);

  OracleConfig cfg;
  cfg.n_paths = 40000;
  cfg.dt = 2e-3;
  cfg.gradient_fd_step = 1e-2;
  cfg.scaling = PotentialScaling::kROverAlpha;
  OracleConfig cfg_raw = cfg, cfg_scaled = cfg;
  cfg_raw.seed = opt_.seed + 701;
  cfg_scaled.seed = opt_.seed + 702;

  json rows = json::array();
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const double t = 0.1 + 0.2 * (k % 5);
    const Vec x = Vec::Constant(1, k < 5 ? -0.8 : 1.0);
    const FkGradient a = fk_gradient(*diff, raw, alpha, t, x, cfg_raw);
    const FkGradient b = fk_gradient(*diff, scaled, alpha_scaled, t, x, cfg_scaled);
    const double dev = std::abs(a.policy(0) - b.policy(0));
    worst = std::max(worst, dev);
    rows.push_back(json{{"t", t}, {"x", x(0)}, {"policy_raw", a.policy(0)},
                        {"policy_raw_stderr", a.policy_std_error(0)},
                        {"policy_rescaled", b.policy(0)},
                        {"policy_rescaled_stderr", b.policy_std_error(0)}});
  }
  r.measured = worst;
  r.pass = worst <= r.threshold;
  r.detail = {{"probes", rows}, {"alpha_rescaled", alpha_scaled},
              {"potential_scaling", to_string(cfg.scaling)}, {"n_paths", cfg.n_paths},
              {"dt", cfg.dt}};
  return r;
}

// 8. |d_t f| / |f| for random models on the stationary OU cloud
CriterionResult Battery::c8() {
  const int m = 4;
  CriterionResult r = criterion(8, "time-bandwidth diagnostic", 1.2 * std::pow(m, 1.5), "<=");
  const DiffusionSpec& diff = *ou().diffusion;
  const PathBatch cloud = simulate_paths(diff, 2000, 1e-2, opt_.seed + 801);
  const MarginalMeasure mu = measure_from_cloud(cloud, 1);
  auto basis = std::make_shared<const Basis>(1, diff.horizon(), m, monomials_up_to(1, 3));
  const CounterRng rng(opt_.seed + 802, Stream::kModelSampling);
  double worst = 0.0, mean = 0.0;
  for (int k = 0; k < 200; ++k) {
    const ValueModel f(basis, random_normal(rng, static_cast<std::uint64_t>(k), basis->size()), 1e6);
    double num = 0.0, den = 0.0;
    for (std::size_t l = 0; l < mu.times.size(); ++l) {
      double a = 0.0, b = 0.0;
      for (Eigen::Index q = 0; q < mu.points[l].cols(); ++q) {
        const auto x = mu.points[l].col(q);
        const double w = mu.weights[l](q);
        a += w * std::pow(f.time_derivative(mu.times[l], x), 2);
        b += w * std::pow(f.value(mu.times[l], x), 2);
      }
      num += mu.time_weights[l] * a;
      den += mu.time_weights[l] * b;
    }
    const double ratio = std::sqrt(num / den);
    worst = std::max(worst, ratio);
    mean += ratio / 200.0;
  }
  r.measured = worst;
  r.pass = worst <= r.threshold;
  r.detail = {{"time_degree", m}, {"models", 200}, {"mean_ratio", mean}, {"cloud_paths", 2000}};
  return r;
}

// 9. empirical variational inequality at the fitted point
CriterionResult Battery::c9() {
  CriterionResult r = criterion(9, "VI residual", 1e-4, "<=");
  const auto& fitn = manufactured_fit(2000);
  const FormContext& ctx = *fitn.ctx;
  const Vec& theta = fitn.result.model.theta();
  const double rho = fitn.result.model.ball_radius();
  const int p = ctx.size();
  const CounterRng rng(opt_.seed + 901, Stream::kModelSampling);
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 100; ++k) {
    // uniform in the ball
    Vec g = random_normal(rng, static_cast<std::uint64_t>(k), p);
    const double u = rng.uniform_pair(static_cast<std::uint64_t>(k), 1, 0)[0];
    g *= rho * std::pow(u, 1.0 / p) / g.norm();
    const Vec eta = g - theta;
    const double b = empirical_bilinear(ctx, theta, eta);
    const double scale = empirical_bilinear_abs_scale(ctx, theta, eta);
    worst = std::max(worst, b / scale);
  }
  r.measured = worst;
  r.pass = worst <= r.threshold;
  r.detail = {{"directions", 100}, {"ball_radius", rho},
              {"converged", fitn.result.report.converged},
              {"iterations", fitn.result.report.iterations_run},
              {"theta_norm", theta.norm()}};
  return r;
}

// 10. two pipeline runs give identical bytes
CriterionResult Battery::c10() {
  CriterionResult r = criterion(10, "determinism", 0.0, "==");
  json base = opt_.pipeline_config ? opt_.pipeline_config->source : ou_instance_config(opt_.seed);
  // keep the check quick; sizes do not affect determinism
  auto cap = [&](const char* block, const char* key, long long limit) {
    if (!base.contains(block)) return;
    auto& b = base[block];
    if (!b.contains(key) || b[key].get<long long>() > limit) b[key] = limit;
  };
  cap("data", "n", 300);
  cap("evaluation", "n_eval", 2000);
  cap("evaluation", "holdout_n", 300);
  cap("oracle", "n_paths", 2000);
  const ExperimentConfig cfg = ExperimentConfig::from_json(base);
  const fs::path a = opt_.work_dir / "run_a", b = opt_.work_dir / "run_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const int threads = omp_get_max_threads();
  const auto files = run_pipeline(cfg, a);
  omp_set_num_threads(threads + 1);  // a different team size must not matter
  run_pipeline(cfg, b);
  omp_set_num_threads(threads);
  json mismatched = json::array();
  for (const auto& f : files) {
    if (read_text(a / f) != read_text(b / f)) mismatched.push_back(f);
  }
  r.measured = static_cast<double>(mismatched.size());
  r.pass = mismatched.empty();
  r.detail = {{"files", files}, {"mismatched", mismatched}, {"threads", {threads, threads + 1}}};
  return r;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(
    const AcceptanceOptions& options, const std::function<void(const CriterionResult&)>& on_result) {
  Battery battery(options);
  using Fn = CriterionResult (Battery::*)();
  const std::vector<std::pair<int, Fn>> all{
      {1, &Battery::c1}, {2, &Battery::c2}, {3, &Battery::c3}, {4, &Battery::c4},
      {5, &Battery::c5}, {6, &Battery::c6}, {7, &Battery::c7}, {8, &Battery::c8},
      {9, &Battery::c9}, {10, &Battery::c10}};
  std::vector<CriterionResult> out;
  for (const auto& [id, fn] : all) {
    if (!options.only.empty() &&
        std::find(options.only.begin(), options.only.end(), id) == options.only.end()) {
      continue;
    }
    const auto start = Clock::now();
    CriterionResult r;
    try {
      r = (battery.*fn)();
    } catch (const std::exception& e) {
      r.id = id;
      r.name = "error";
      r.pass = false;
      r.relation = "n/a";
      r.detail = {{"exception", e.what()}};
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hjbvi
