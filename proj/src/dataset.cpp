// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "hjbvi/errors.hpp"

namespace hjbvi {

namespace {

constexpr int kSchemaVersion = 1;

json record_to_json(const ObservationRecord& r) {
  json obs = json::array();
  for (const auto& o : r.obs) {
    json row = json::array();
    row.push_back(o.t);
    for (Eigen::Index i = 0; i < o.x.size(); ++i) row.push_back(o.x(i));
    row.push_back(o.R);
    obs.push_back(std::move(row));
  }
  json j;
  j["x0"] = vec_to_json(r.x0);
  j["obs"] = std::move(obs);
  j["xT"] = vec_to_json(r.xT);
  j["Y"] = r.Y;
  return j;
}

std::string records_text(const ObservationDataset& ds) {
  std::string out;
  for (const auto& r : ds.records) {
    out += dump_canonical(record_to_json(r));
    out += '\n';
  }
  return out;
}

ObservationRecord record_from_json(const json& j, int dim, std::size_t K) {
  require_known_keys(j, {"x0", "obs", "xT", "Y"}, "record");
  ObservationRecord r;
  r.x0 = vec_from_json(require_field(j, "x0", "record"), "record.x0", dim);
  r.xT = vec_from_json(require_field(j, "xT", "record"), "record.xT", dim);
  r.Y = get_double(j, "Y", "record");
  const json& obs = require_field(j, "obs", "record");
  if (!obs.is_array() || obs.size() != K) {
    throw DataError(fmt::format("record has {} observations, header says K = {}",
                                obs.is_array() ? obs.size() : 0, K));
  }
  r.obs.reserve(K);
  for (const auto& row : obs) {
    if (!row.is_array() || row.size() != static_cast<std::size_t>(dim) + 2) {
      throw DataError("observation row must be [t, x..., R]");
    }
    Observation o;
    o.t = row[0].get<double>();
    o.x.resize(dim);
    for (int i = 0; i < dim; ++i) o.x(i) = row[i + 1].get<double>();
    o.R = row[dim + 1].get<double>();
    r.obs.push_back(std::move(o));
  }
  return r;
}

}  // namespace

ObservationDataset generate_dataset(const DiffusionSpec& diff, const RewardSpec& reward,
                                    std::size_t n, std::size_t K, double dt, std::uint64_t seed,
                                    double alpha) {
  if (n < 1) throw ConfigError("generate_dataset: n must be >= 1");
  if (reward.dim != diff.dim()) throw ConfigError("generate_dataset: reward dim mismatch");
  if (!reward.normalized && !reward.manufactured) {
    throw ConfigError(
        "generate_dataset: reward must be normalized (or manufactured); set problem.rescale");
  }
  const TimeGrid grid(0.0, diff.horizon(), dt);
  const std::size_t L = grid.steps();
  const int d = diff.dim();

  ObservationDataset ds;
  ds.records.resize(n);
  ds.dim = d;
  ds.horizon = diff.horizon();
  ds.K = K;
  ds.alpha = alpha;
  ds.meta = {kSchemaVersion, grid.dt(), seed, diff.digest(), reward.digest()};

  const CounterRng noise(seed, Stream::kDiffusion);
  const CounterRng init_rng(seed, Stream::kInitialState);
  const CounterRng time_rng(seed, Stream::kObservationTimes);
  const CounterRng reward_rng(seed, Stream::kRewardNoise);
  std::vector<std::size_t> failed(n, 0);
  std::vector<std::exception_ptr> errors(n);

#pragma omp parallel
  {
    PathSimulator sim(diff, grid, noise, nullptr, 1e6);
    Vec x0(d);
    std::vector<std::size_t> nodes(K);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      try {
      for (std::size_t k = 0; k < K; ++k) {
        const auto u = time_rng.uniform_pair(i, static_cast<std::uint32_t>(k), 0)[0];
        nodes[k] = static_cast<std::size_t>(std::llround(u * static_cast<double>(L)));
      }
      std::sort(nodes.begin(), nodes.end());
      ObservationRecord& rec = ds.records[i];
      rec.obs.resize(K);
      diff.sample_initial(init_rng, i, x0);
      rec.x0 = x0;
      std::size_t next = 0;
      std::size_t abort_step = 0;
      const bool ok = sim.run(
          i, x0,
          [&](const StepView& s) {
            while (next < K && nodes[next] == s.l) {
              Observation& o = rec.obs[next];
              o.t = s.t;
              o.x = s.state;
              o.R = sample_intermediate(reward, s.t, s.state, reward_rng, i,
                                        static_cast<std::uint32_t>(next));
              ++next;
            }
            if (s.l == L) rec.xT = s.state;
          },
          &abort_step);
      if (!ok) {
        failed[i] = abort_step;
        continue;
      }
      rec.Y = terminal_eval(reward, rec.xT);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    if (failed[i]) {
      throw NumericalError(fmt::format("generate_dataset: path {} blew up at step {} (t = {})", i,
                                       failed[i], grid.time(failed[i])));
    }
  }
  return ds;
}

std::string serialize_dataset(const ObservationDataset& ds) {
  const std::string body = records_text(ds);
  json header;
  header["schema_version"] = ds.meta.schema_version;
  header["n"] = ds.records.size();
  header["K"] = ds.K;
  header["dim"] = ds.dim;
  header["T"] = ds.horizon;
  header["dt"] = ds.meta.dt;
  header["alpha"] = ds.alpha;
  header["seed"] = ds.meta.seed;
  header["diffusion_digest"] = ds.meta.diffusion_digest;
  header["reward_digest"] = ds.meta.reward_digest;
  header["records_digest"] = digest_hex(body);
  return dump_canonical(header) + "\n" + body;
}

void save_dataset(const ObservationDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write dataset to {}", path.string()));
  out << serialize_dataset(ds);
  if (!out) throw DataError(fmt::format("failed writing dataset to {}", path.string()));
}

ObservationDataset parse_dataset(const std::string& text, const DatasetExpectations& expect) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset: empty file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("dataset: header parse error: {}", e.what()));
  }
  const int version = static_cast<int>(get_int(header, "schema_version", "dataset header"));
  if (version != kSchemaVersion) {
    throw DataError(fmt::format("dataset: schema_version {} not supported (expected {})", version,
                                kSchemaVersion));
  }
  ObservationDataset ds;
  const auto n = static_cast<std::size_t>(get_int(header, "n", "dataset header"));
  ds.K = static_cast<std::size_t>(get_int(header, "K", "dataset header"));
  ds.dim = static_cast<int>(get_int(header, "dim", "dataset header"));
  ds.horizon = get_double(header, "T", "dataset header");
  ds.alpha = get_double(header, "alpha", "dataset header");
  ds.meta.schema_version = version;
  ds.meta.dt = get_double(header, "dt", "dataset header");
  ds.meta.seed = header.at("seed").get<std::uint64_t>();
  ds.meta.diffusion_digest = get_string(header, "diffusion_digest", "dataset header");
  ds.meta.reward_digest = get_string(header, "reward_digest", "dataset header");
  const std::string records_digest = get_string(header, "records_digest", "dataset header");

  if (expect.diffusion_digest && *expect.diffusion_digest != ds.meta.diffusion_digest) {
    throw DataError(fmt::format("dataset: diffusion digest {} does not match expected {}",
                                ds.meta.diffusion_digest, *expect.diffusion_digest));
  }
  if (expect.reward_digest && *expect.reward_digest != ds.meta.reward_digest) {
    throw DataError(fmt::format("dataset: reward digest {} does not match expected {}",
                                ds.meta.reward_digest, *expect.reward_digest));
  }

  std::string body;
  ds.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line) || line.empty()) {
      throw DataError(fmt::format("dataset: truncated, record {} of {} missing", i, n));
    }
    try {
      ds.records.push_back(record_from_json(json::parse(line), ds.dim, ds.K));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("dataset: parse error in record {}: {}", i, e.what()));
    } catch (const std::runtime_error& e) {
      throw DataError(fmt::format("dataset: invalid record {}: {}", i, e.what()));
    }
    body += line;
    body += '\n';
  }
  if (std::getline(in, line) && !line.empty()) {
    throw DataError(fmt::format("dataset: more records than the header's n = {}", n));
  }
  if (digest_hex(body) != records_digest) {
    throw DataError("dataset: records digest mismatch (file modified or corrupted)");
  }
  return ds;
}

ObservationDataset load_dataset(const std::filesystem::path& path,
                                const DatasetExpectations& expect) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open dataset {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), expect);
}

bool operator==(const ObservationDataset& a, const ObservationDataset& b) {
  if (a.dim != b.dim || a.horizon != b.horizon || a.K != b.K || a.alpha != b.alpha ||
      a.meta.dt != b.meta.dt || a.meta.seed != b.meta.seed ||
      a.meta.diffusion_digest != b.meta.diffusion_digest ||
      a.meta.reward_digest != b.meta.reward_digest || a.records.size() != b.records.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& ra = a.records[i];
    const auto& rb = b.records[i];
    if (ra.x0 != rb.x0 || ra.xT != rb.xT || ra.Y != rb.Y || ra.obs.size() != rb.obs.size()) {
      return false;
    }
    for (std::size_t k = 0; k < ra.obs.size(); ++k) {
      if (ra.obs[k].t != rb.obs[k].t || ra.obs[k].x != rb.obs[k].x || ra.obs[k].R != rb.obs[k].R) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace hjbvi
