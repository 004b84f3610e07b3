// SPDX-License-Identifier: Apache-2.0
// hjbvi: config-driven runner. Exit codes: 0 ok, 2 config error,
// 3 numerical failure, 4 acceptance failure (suite). Bad input files count
// as config errors.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"

#include "hjbvi/config.hpp"
#include "hjbvi/errors.hpp"
#include "hjbvi/experiment.hpp"

namespace fs = std::filesystem;
using namespace hjbvi;

int main(int argc, char** argv) {
  CLI::App app{"HJB fine-tuning via variational inequalities"};
  app.require_subcommand(1);

  std::string config_path, out_dir, dataset_path, model_path;
  std::vector<std::string> overrides;
  int threads = 0;
  std::optional<std::size_t> steps;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (default: outputs.directory)");
    sub->add_option("--threads", threads, "OpenMP threads (default: runtime default)");
    sub->add_option("--override", overrides, "KEY=VALUE, dotted key; repeatable");
  };
  auto* gen = app.add_subcommand("generate", "simulate and write the observation dataset");
  auto* fitc = app.add_subcommand("fit", "fit the value model to a dataset");
  auto* orc = app.add_subcommand("oracle", "Feynman-Kac oracle table at the probe points");
  auto* evl = app.add_subcommand("evaluate", "Sobolev errors, objective and KL of a model");
  auto* md = app.add_subcommand("mirror-descent", "run mirror-descent steps");
  auto* suite = app.add_subcommand("suite", "run the acceptance battery");
  for (auto* s : {gen, fitc, orc, evl, md, suite}) common(s);
  fitc->add_option("--dataset", dataset_path, "dataset file (default: OUT/dataset.jsonl)");
  evl->add_option("--model", model_path, "model file (default: OUT/model.json)");
  md->add_option("--steps", steps, "number of steps (default: mirror_descent.steps)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (threads < 0) throw ConfigError("--threads must be >= 0");
    if (threads > 0) omp_set_num_threads(threads);
    if (steps) overrides.push_back("mirror_descent.steps=" + std::to_string(*steps));
    const ExperimentConfig cfg = load_config(config_path, overrides);
    const fs::path out = out_dir.empty() ? fs::path(cfg.outputs.directory) : fs::path(out_dir);
    fs::create_directories(out);

    if (gen->parsed()) {
      cmd_generate(cfg, out);
    } else if (fitc->parsed()) {
      cmd_fit(cfg, dataset_path.empty() ? out / "dataset.jsonl" : fs::path(dataset_path), out);
    } else if (orc->parsed()) {
      cmd_oracle(cfg, out);
    } else if (evl->parsed()) {
      cmd_evaluate(cfg, model_path.empty() ? out / "model.json" : fs::path(model_path), out);
    } else if (md->parsed()) {
      cmd_mirror_descent(cfg, out);
    } else if (suite->parsed()) {
      return cmd_suite(cfg, out);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
