// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hjbvi/config.hpp"

namespace hjbvi {

/// Git blob id: sha1("blob <size>\0" + bytes) in hex.
std::string content_hash(std::string_view bytes);
std::string file_content_hash(const std::filesystem::path& path);

/// Wall-clock timings, kept out of the deterministic reports.
class Timings {
 public:
  void add(std::string label, double seconds);
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

/// Writes `text` atomically enough for our purposes (truncate + write).
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

/// {config_digest, inputs, seeds, potential_scaling}
json report_header(const ExperimentConfig& cfg, const json& inputs);

// Verbs. Each writes its artifacts under `out` and returns the report JSON.
// Timings go to out/timings_<verb>.json.
json cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out);
json cmd_fit(const ExperimentConfig& cfg, const std::filesystem::path& dataset,
             const std::filesystem::path& out);
json cmd_oracle(const ExperimentConfig& cfg, const std::filesystem::path& out);
json cmd_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& model,
                  const std::filesystem::path& out);
json cmd_mirror_descent(const ExperimentConfig& cfg, const std::filesystem::path& out);
/// Returns the process exit code: 0 if every criterion passes, 4 otherwise.
int cmd_suite(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// generate -> fit -> oracle -> evaluate into `out`; returns the artifact file names.
std::vector<std::string> run_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& out);

}  // namespace hjbvi
