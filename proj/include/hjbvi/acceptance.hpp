// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hjbvi/config.hpp"

namespace hjbvi {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string relation;  // how measured is compared with threshold, e.g. "<="
  json detail;
  double seconds = 0.0;  // excluded from to_json
  json to_json() const;
};

struct AcceptanceOptions {
  std::uint64_t seed = 20240601;
  /// Scratch space for the determinism check.
  std::filesystem::path work_dir = "acceptance_work";
  /// Config for the determinism check; the bundled OU instance when empty.
  std::optional<ExperimentConfig> pipeline_config;
  /// Criterion ids to run; all when empty.
  std::vector<int> only;
};

std::vector<CriterionResult> run_acceptance(
    const AcceptanceOptions& options,
    const std::function<void(const CriterionResult&)>& on_result = {});

/// "[PASS] C1 oracle agreement: measured 0.0041 <= 0.02 (12.3 s)"
std::string format_result_line(const CriterionResult& r);

/// The OU instance shared by several criteria and the bundled config.
json ou_instance_config(std::uint64_t seed);

}  // namespace hjbvi
