// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/experiment.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "hjbvi/acceptance.hpp"
#include "hjbvi/dataset.hpp"
#include "hjbvi/errors.hpp"
#include "hjbvi/forms.hpp"
#include "hjbvi/policy.hpp"

namespace fs = std::filesystem;

namespace hjbvi {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<ProbePoint> probes_or_default(const ExperimentConfig& cfg) {
  if (!cfg.evaluation.probes.empty()) return cfg.evaluation.probes;
  std::vector<ProbePoint> out;
  for (double s : {0.0, 0.5, 0.9}) {
    for (double x : {-1.0, 0.0, 1.0}) out.push_back({s * cfg.horizon, Vec::Constant(cfg.dim, x)});
  }
  return out;
}

ObservationDataset training_data(const ExperimentConfig& cfg, const Problem& p) {
  return generate_dataset(*p.diffusion, *p.reward, cfg.data.n, cfg.data.K, cfg.data.dt,
                          cfg.data.seed, p.alpha);
}

DatasetExpectations expectations(const Problem& p) {
  return {p.diffusion->digest(), p.reward->digest()};
}

ValueModel load_model(const fs::path& path, const Problem& p) {
  const json j = json::parse(read_text(path), nullptr, false);
  if (j.is_discarded()) throw DataError(fmt::format("model file '{}' is not valid JSON", path.string()));
  ValueModel m = ValueModel::from_json(j);
  if (m.dim() != p.diffusion->dim() || m.basis().horizon() != p.diffusion->horizon()) {
    throw DataError(fmt::format("model '{}' does not match the problem's dim or horizon", path.string()));
  }
  return m;
}

json probe_json(const ProbePoint& pp) { return json{{"t", pp.t}, {"x", vec_to_json(pp.x)}}; }

// Relative Sobolev error |f - g| / |g| on a dataset's sample points.
json sobolev_error(const ObservationDataset& holdout, std::shared_ptr<const ScalarField> f,
                   std::shared_ptr<const ScalarField> truth) {
  CombinedField diff({{1.0, f}, {-1.0, truth}});
  const double err2 = empirical_energy_fields(holdout, diff, diff);
  const double ref2 = empirical_energy_fields(holdout, *truth, *truth);
  return json{{"absolute", std::sqrt(std::max(err2, 0.0))},
              {"relative", std::sqrt(std::max(err2, 0.0) / ref2)}};
}

json policy_report(const PolicyEvaluation& ev) {
  json j = ev.objective.to_json();
  j["kl"] = ev.kl.to_json();
  return j;
}

}  // namespace

std::string content_hash(std::string_view bytes) {
  const std::string header = fmt::format("blob {}", bytes.size());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size() + 1) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw NumericalError("sha1 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string file_content_hash(const fs::path& path) { return content_hash(read_text(path)); }

void Timings::add(std::string label, double seconds) {
  entries_.emplace_back(std::move(label), seconds);
}

void Timings::write(const fs::path& path) const {
  json j = json::object();
  for (const auto& [k, v] : entries_) j[k] = v;
  write_text(path, j.dump(2) + "\n");
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError(fmt::format("write to '{}' failed", path.string()));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json report_header(const ExperimentConfig& cfg, const json& inputs) {
  return json{{"config_digest", cfg.digest()},
              {"inputs", inputs.is_null() ? json::object() : inputs},
              {"seeds",
               {{"data", cfg.data.seed},
                {"oracle", cfg.oracle.seed},
                {"evaluation", cfg.evaluation.seed}}},
              {"potential_scaling", to_string(cfg.scaling())}};
}

json cmd_generate(const ExperimentConfig& cfg, const fs::path& out) {
  Timings timings;
  auto start = Clock::now();
  const Problem p = build_problem(cfg);
  timings.add("build_problem", seconds_since(start));
  start = Clock::now();
  const ObservationDataset ds = training_data(cfg, p);
  const std::string text = serialize_dataset(ds);
  write_text(out / "dataset.jsonl", text);
  timings.add("generate", seconds_since(start));

  json report = report_header(cfg, json::object());
  report["verb"] = "generate";
  report["dataset"] = {{"file", "dataset.jsonl"},
                       {"content_hash", content_hash(text)},
                       {"n", ds.size()},
                       {"K", ds.K},
                       {"dt", cfg.data.dt},
                       {"diffusion_digest", ds.meta.diffusion_digest},
                       {"reward_digest", ds.meta.reward_digest}};
  report["problem"] = p.info;
  write_text(out / "generate_report.json", dump_canonical(report) + "\n");
  timings.write(out / "timings_generate.json");
  return report;
}

json cmd_fit(const ExperimentConfig& cfg, const fs::path& dataset, const fs::path& out) {
  Timings timings;
  auto start = Clock::now();
  const Problem p = build_problem(cfg);
  const std::string data_hash = file_content_hash(dataset);
  const ObservationDataset ds = load_dataset(dataset, expectations(p));
  timings.add("load", seconds_since(start));

  start = Clock::now();
  const FitResult res = fit(ds, cfg.make_basis(), *p.diffusion, p.alpha, cfg.solver, p.scaling);
  timings.add("fit", seconds_since(start));

  const std::string model_text = dump_canonical(res.model.to_json()) + "\n";
  write_text(out / "model.json", model_text);
  if (cfg.outputs.csv) write_text(out / "trace.csv", res.report.trace_csv());

  json report = report_header(cfg, json{{"dataset", data_hash}});
  report["verb"] = "fit";
  report["model"] = {{"file", "model.json"}, {"content_hash", content_hash(model_text)}};
  report["fit"] = res.report.to_json();
  write_text(out / "fit_report.json", dump_canonical(report) + "\n");
  timings.write(out / "timings_fit.json");
  return report;
}

json cmd_oracle(const ExperimentConfig& cfg, const fs::path& out) {
  Timings timings;
  const auto start = Clock::now();
  const Problem p = build_problem(cfg);
  const auto probes = probes_or_default(cfg);
  OracleConfig ocfg = cfg.oracle;
  ocfg.scaling = p.scaling;

  json rows = json::array();
  std::string csv = "t";
  for (int a = 0; a < cfg.dim; ++a) csv += fmt::format(",x{}", a);
  csv += ",f,stderr";
  for (int a = 0; a < cfg.dim; ++a) csv += fmt::format(",grad{},policy{}", a, a);
  if (p.truth) csv += ",f_exact";
  csv += "\n";
  for (const auto& pp : probes) {
    const FkGradient g = fk_gradient(*p.diffusion, *p.reward, p.alpha, pp.t, pp.x, ocfg);
    json row = probe_json(pp);
    row["f"] = g.value.value;
    row["stderr"] = g.value.std_error;
    row["grad"] = vec_to_json(g.grad);
    row["grad_stderr"] = vec_to_json(g.grad_std_error);
    row["policy"] = vec_to_json(g.policy);
    row["policy_stderr"] = vec_to_json(g.policy_std_error);
    row["weak_signal"] = g.weak_signal;
    csv += format_double(pp.t);
    for (int a = 0; a < cfg.dim; ++a) csv += "," + format_double(pp.x(a));
    csv += "," + format_double(g.value.value) + "," + format_double(g.value.std_error);
    for (int a = 0; a < cfg.dim; ++a) {
      csv += "," + format_double(g.grad(a)) + "," + format_double(g.policy(a));
    }
    if (p.truth) {
      const double exact = p.truth->value(pp.t, pp.x);
      row["f_exact"] = exact;
      csv += "," + format_double(exact);
    }
    csv += "\n";
    rows.push_back(std::move(row));
  }
  timings.add("oracle", seconds_since(start));

  json report = report_header(cfg, json::object());
  report["verb"] = "oracle";
  report["truth"] = p.truth_kind;
  report["oracle"] = ocfg.to_json();
  report["table"] = std::move(rows);
  write_text(out / "oracle_table.json", dump_canonical(report) + "\n");
  if (cfg.outputs.csv) write_text(out / "oracle_table.csv", csv);
  timings.write(out / "timings_oracle.json");
  return report;
}

json cmd_evaluate(const ExperimentConfig& cfg, const fs::path& model_path, const fs::path& out) {
  Timings timings;
  auto start = Clock::now();
  const Problem p = build_problem(cfg);
  const DiffusionSpec& diff = *p.diffusion;
  auto model = std::make_shared<const ValueModel>(load_model(model_path, p));
  const double floor = default_f_floor(diff.horizon(), p.alpha);

  json report = report_header(cfg, json{{"model", file_content_hash(model_path)}});
  report["verb"] = "evaluate";
  report["truth"] = p.truth_kind;

  std::shared_ptr<const ValueModel> baseline;
  if (cfg.evaluation.baseline) {
    const ObservationDataset train = training_data(cfg, p);
    baseline = std::make_shared<const ValueModel>(
        classifier_guidance_fit(train, model->basis_ptr(), p.alpha));
  }
  timings.add("setup", seconds_since(start));

  // Sobolev errors against the exact f on a held-out cloud
  if (p.truth) {
    start = Clock::now();
    const ObservationDataset holdout =
        generate_dataset(diff, *p.reward, cfg.evaluation.holdout_n, cfg.data.K, cfg.data.dt,
                         mix64(cfg.evaluation.seed), p.alpha);
    json sob{{"holdout_n", cfg.evaluation.holdout_n}, {"fitted", sobolev_error(holdout, model, p.truth)}};
    if (baseline) sob["classifier_guidance"] = sobolev_error(holdout, baseline, p.truth);
    report["sobolev_error"] = std::move(sob);
    timings.add("sobolev", seconds_since(start));
  }

  // model against the oracle (or exact f) at the probes
  start = Clock::now();
  OracleConfig ocfg = cfg.oracle;
  ocfg.scaling = p.scaling;
  const PolicyHandle fitted = PolicyHandle::from_field(model, floor, "value_model");
  json probe_rows = json::array();
  for (const auto& pp : probes_or_default(cfg)) {
    json row = probe_json(pp);
    row["f_model"] = model->value(pp.t, pp.x);
    row["policy_model"] = vec_to_json(policy_eval(fitted, diff, pp.t, pp.x));
    if (p.truth) {
      const PolicyHandle exact = PolicyHandle::from_field(p.truth, floor, p.truth_kind);
      row["f_reference"] = p.truth->value(pp.t, pp.x);
      row["policy_reference"] = vec_to_json(policy_eval(exact, diff, pp.t, pp.x));
      row["reference"] = p.truth_kind;
    } else {
      const FkGradient g = fk_gradient(diff, *p.reward, p.alpha, pp.t, pp.x, ocfg);
      row["f_reference"] = g.value.value;
      row["f_reference_stderr"] = g.value.std_error;
      row["policy_reference"] = vec_to_json(g.policy);
      row["policy_reference_stderr"] = vec_to_json(g.policy_std_error);
      row["reference"] = "oracle";
    }
    probe_rows.push_back(std::move(row));
  }
  report["probes"] = std::move(probe_rows);
  timings.add("probes", seconds_since(start));

  // objective and KL of every policy on common random numbers
  start = Clock::now();
  std::vector<std::pair<std::string, PolicyHandle>> policies{{"fitted", fitted},
                                                             {"zero", PolicyHandle::zero()}};
  if (p.truth) policies.emplace_back(p.truth_kind, PolicyHandle::from_field(p.truth, floor, p.truth_kind));
  if (baseline) {
    policies.emplace_back("classifier_guidance",
                          PolicyHandle::from_field(baseline, floor, "classifier_guidance"));
  }
  json pol = json::object();
  for (const auto& [name, ph] : policies) {
    const PolicyEvaluation ev = evaluate_policy(diff, *p.reward, p.alpha, ph, cfg.evaluation.n_eval,
                                                cfg.evaluation.dt, cfg.evaluation.seed);
    pol[name] = policy_report(ev);
  }
  report["policies"] = std::move(pol);
  report["evaluation"] = {{"n_eval", cfg.evaluation.n_eval},
                          {"dt", cfg.evaluation.dt},
                          {"f_floor", floor},
                          {"alpha", p.alpha}};
  timings.add("policies", seconds_since(start));

  write_text(out / "evaluation_report.json", dump_canonical(report) + "\n");
  timings.write(out / "timings_evaluate.json");
  return report;
}

json cmd_mirror_descent(const ExperimentConfig& cfg, const fs::path& out) {
  Timings timings;
  const Problem p = build_problem(cfg);
  const double gamma = cfg.mirror_descent.gamma;
  const double floor = default_f_floor(p.diffusion->horizon(), p.alpha);
  auto basis = cfg.make_basis();

  auto evaluate = [&](const PolicyHandle& ph) {
    return policy_report(evaluate_policy(*p.diffusion, *p.reward, p.alpha, ph,
                                         cfg.evaluation.n_eval, cfg.evaluation.dt,
                                         cfg.evaluation.seed));
  };

  json steps = json::array();
  PolicyHandle current = PolicyHandle::zero();
  steps.push_back(json{{"step", 0}, {"policy", evaluate(current)}});
  for (std::size_t k = 0; k < cfg.mirror_descent.steps; ++k) {
    const auto start = Clock::now();
    const MirrorDescentStep mds = mirror_descent_step(p.diffusion, *p.reward, p.alpha, gamma,
                                                      current, cfg.mirror_descent.policy_penalty);
    const std::uint64_t seed = mix64(cfg.data.seed + k + 1);
    const ObservationDataset ds =
        generate_dataset(*mds.diffusion, mds.reward, cfg.data.n, cfg.data.K, cfg.data.dt, seed, mds.alpha);
    const FitResult res = fit(ds, basis, *mds.diffusion, mds.alpha, cfg.solver, p.scaling);
    auto model = std::make_shared<const ValueModel>(res.model);
    const PolicyHandle step_policy = PolicyHandle::from_field(
        model, default_f_floor(p.diffusion->horizon(), mds.alpha), "value_model");
    current = PolicyHandle::composite({{1.0, mds.carried}, {1.0, step_policy}});
    json row{{"step", k + 1},
             {"alpha", mds.alpha},
             {"data_seed", seed},
             {"fit", {{"iterations_run", res.report.iterations_run},
                      {"converged", res.report.converged},
                      {"gamma", res.report.gamma}}},
             {"model", res.model.to_json()},
             {"policy", evaluate(current)}};
    steps.push_back(std::move(row));
    timings.add(fmt::format("step_{}", k + 1), seconds_since(start));
  }

  json report = report_header(cfg, json::object());
  report["verb"] = "mirror-descent";
  report["gamma"] = gamma;
  report["alpha0"] = p.alpha;
  report["f_floor"] = floor;
  report["policy_penalty"] = cfg.mirror_descent.policy_penalty;
  report["steps"] = std::move(steps);
  write_text(out / "mirror_descent_report.json", dump_canonical(report) + "\n");
  timings.write(out / "timings_mirror_descent.json");
  return report;
}

std::vector<std::string> run_pipeline(const ExperimentConfig& cfg, const fs::path& out) {
  cmd_generate(cfg, out);
  cmd_fit(cfg, out / "dataset.jsonl", out);
  cmd_oracle(cfg, out);
  cmd_evaluate(cfg, out / "model.json", out);
  std::vector<std::string> files{"dataset.jsonl",    "generate_report.json", "model.json",
                                 "fit_report.json",  "oracle_table.json",    "evaluation_report.json"};
  if (cfg.outputs.csv) {
    files.push_back("trace.csv");
    files.push_back("oracle_table.csv");
  }
  return files;
}

int cmd_suite(const ExperimentConfig& cfg, const fs::path& out) {
  AcceptanceOptions opt;
  opt.seed = cfg.acceptance_seed;
  opt.work_dir = out / "determinism";
  opt.pipeline_config = cfg;
  Timings timings;
  json results = json::array();
  bool all = true;
  run_acceptance(opt, [&](const CriterionResult& r) {
    fmt::print("{}\n", format_result_line(r));
    std::fflush(stdout);
    results.push_back(r.to_json());
    timings.add(fmt::format("C{}", r.id), r.seconds);
    all = all && r.pass;
  });
  json report = report_header(cfg, json::object());
  report["verb"] = "suite";
  report["acceptance_seed"] = cfg.acceptance_seed;
  report["all_pass"] = all;
  report["criteria"] = std::move(results);
  write_text(out / "acceptance_report.json", dump_canonical(report) + "\n");
  timings.write(out / "timings_suite.json");
  return all ? 0 : 4;
}

}  // namespace hjbvi
