// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

#include "hjbvi/dataset.hpp"
#include "hjbvi/errors.hpp"

using namespace hjbvi;

namespace {

// observations stay inside [-2, -1]
RewardSpec noisy_constant() {
  auto r = testutil::linear_reward(0.5, -1.5);
  r.noise = UniformNoise{0.5};
  return r;
}

}  // namespace

TEST_CASE("no snapshots") {
  const auto ds = generate_dataset(testutil::ou1d(), noisy_constant(), 20, 0, 1e-2, 3);
  CHECK(ds.size() == 20);
  CHECK(ds.K == 0);
  for (const auto& rec : ds.records) {
    CHECK(rec.obs.empty());
    CHECK(rec.Y == doctest::Approx(0.5 * rec.xT(0)));
  }
}

TEST_CASE("same seed, same bytes") {
  const auto diff = testutil::ou1d();
  const auto a = generate_dataset(diff, noisy_constant(), 50, 5, 1e-2, 42);
  const auto b = generate_dataset(diff, noisy_constant(), 50, 5, 1e-2, 42);
  const auto c = generate_dataset(diff, noisy_constant(), 50, 5, 1e-2, 43);
  CHECK(serialize_dataset(a) == serialize_dataset(b));
  CHECK(serialize_dataset(a) != serialize_dataset(c));
}

TEST_CASE("snapshots are sorted, snapped and unbiased") {
  const double dt = 1e-3;
  const auto ds = generate_dataset(testutil::ou1d(), noisy_constant(), 5000, 10, dt, 9);
  std::vector<double> rs, ts;
  for (const auto& rec : ds.records) {
    REQUIRE(rec.obs.size() == 10);
    for (std::size_t k = 0; k < rec.obs.size(); ++k) {
      const auto& o = rec.obs[k];
      if (k) CHECK(o.t >= rec.obs[k - 1].t);
      CHECK(std::abs(o.t / dt - std::round(o.t / dt)) < 1e-6);
      rs.push_back(o.R);
      ts.push_back(o.t);
    }
  }
  const auto ms = mean_stderr(rs);
  CHECK(std::abs(ms.mean + 1.5) <= 3.0 * ms.std_error);
  CHECK(ms.std_error > 0.0);
  CHECK(*std::max_element(rs.begin(), rs.end()) <= -1.0);
  CHECK(*std::min_element(rs.begin(), rs.end()) >= -2.0);

  const auto exact = generate_dataset(testutil::ou1d(), testutil::linear_reward(0.5), 200, 5, dt, 9);
  for (const auto& rec : exact.records) {
    for (const auto& o : rec.obs) CHECK(o.R == -1.0);
  }

  // Kolmogorov-Smirnov against Unif[0, 1], widened by the snapping error
  std::sort(ts.begin(), ts.end());
  const double m = static_cast<double>(ts.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    dmax = std::max({dmax, (i + 1) / m - ts[i], ts[i] - i / m});
  }
  CHECK(dmax <= 1.95 / std::sqrt(m) + dt);
}

TEST_CASE("snapshot times do not depend on the state") {
  const auto ds = generate_dataset(testutil::ou1d(), noisy_constant(), 4000, 5, 1e-2, 21);
  std::vector<double> t, ax;
  for (const auto& rec : ds.records) {
    for (const auto& o : rec.obs) {
      t.push_back(o.t);
      ax.push_back(std::abs(o.x(0)));
    }
  }
  // correlation of t with |x| under a symmetric process
  const double n = static_cast<double>(t.size());
  double mt = 0, mx = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i] / n;
    mx += ax[i] / n;
  }
  double stt = 0, sxx = 0, stx = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    sxx += (ax[i] - mx) * (ax[i] - mx);
    stx += (t[i] - mt) * (ax[i] - mx);
  }
  const double corr = stx / std::sqrt(stt * sxx);
  // the OU started from N(0, 1) with theta = 1, Lambda = 2 is stationary
  CHECK(std::abs(corr) <= 4.0 / std::sqrt(n));
}

TEST_CASE("save and load") {
  const auto diff = testutil::ou1d();
  const auto reward = noisy_constant();
  const auto ds = generate_dataset(diff, reward, 30, 4, 1e-2, 5);
  const auto dir = std::filesystem::temp_directory_path() / "hjbvi_dataset_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "ds.jsonl";
  save_dataset(ds, path);
  const auto back = load_dataset(path);
  CHECK(back == ds);
  CHECK(back.meta.dt == 1e-2);
  CHECK(serialize_dataset(back) == serialize_dataset(ds));

  DatasetExpectations ok{diff.digest(), reward.digest()};
  CHECK_NOTHROW(load_dataset(path, ok));
  DatasetExpectations wrong{testutil::ou1d(2.0).digest(), std::nullopt};
  CHECK_THROWS_AS(load_dataset(path, wrong), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("truncated and corrupted files") {
  const auto ds = generate_dataset(testutil::ou1d(), noisy_constant(), 6, 2, 1e-2, 5);
  const std::string text = serialize_dataset(ds);
  std::vector<std::size_t> breaks;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n') breaks.push_back(i);
  }
  // header + 4 records
  const std::string cut = text.substr(0, breaks[4] + 1);
  try {
    parse_dataset(cut);
    FAIL("truncated dataset parsed");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("record 4") != std::string::npos);
  }
  // half a record line
  const std::string half = text.substr(0, breaks[2] + 10);
  CHECK_THROWS_AS(parse_dataset(half), DataError);
  CHECK_THROWS_AS(parse_dataset(""), DataError);

  std::string edited = text;
  const auto pos = edited.find("\"Y\":") + 5;
  edited[pos] = edited[pos] == '1' ? '2' : '1';
  CHECK_THROWS_AS(parse_dataset(edited), DataError);
}

TEST_CASE("generation preconditions") {
  CHECK_THROWS_AS(generate_dataset(testutil::ou1d(), noisy_constant(), 0, 2, 1e-2, 1), ConfigError);
  auto raw = noisy_constant();
  raw.normalized = false;
  CHECK_THROWS_AS(generate_dataset(testutil::ou1d(), raw, 5, 2, 1e-2, 1), ConfigError);
}
