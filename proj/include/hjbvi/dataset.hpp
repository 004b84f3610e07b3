// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hjbvi/diffusion.hpp"
#include "hjbvi/rewards.hpp"

namespace hjbvi {

struct Observation {
  double t = 0.0;
  Vec x;
  double R = 0.0;
};

struct ObservationRecord {
  Vec x0;
  std::vector<Observation> obs;  // sorted by t
  Vec xT;
  double Y = 0.0;
};

struct DatasetMeta {
  int schema_version = 1;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::string diffusion_digest;
  std::string reward_digest;
};

struct ObservationDataset {
  std::vector<ObservationRecord> records;
  int dim = 1;
  double horizon = 0.0;
  std::size_t K = 0;
  double alpha = 1.0;  // provenance only
  DatasetMeta meta;

  std::size_t size() const { return records.size(); }
  std::size_t observation_count() const { return records.size() * K; }
};

/// One fine-grid path per record; K i.i.d. Unif[0,T] times snapped to the
/// nearest grid node; noisy rewards at the snapshots; Y = y(X_T).
ObservationDataset generate_dataset(const DiffusionSpec& diff, const RewardSpec& reward,
                                    std::size_t n, std::size_t K, double dt, std::uint64_t seed,
                                    double alpha = 1.0);

/// JSON lines: a header object, then one record per line.
std::string serialize_dataset(const ObservationDataset& ds);
void save_dataset(const ObservationDataset& ds, const std::filesystem::path& path);

struct DatasetExpectations {
  std::optional<std::string> diffusion_digest;
  std::optional<std::string> reward_digest;
};
ObservationDataset parse_dataset(const std::string& text, const DatasetExpectations& expect = {});
ObservationDataset load_dataset(const std::filesystem::path& path,
                                const DatasetExpectations& expect = {});

bool operator==(const ObservationDataset& a, const ObservationDataset& b);

}  // namespace hjbvi
