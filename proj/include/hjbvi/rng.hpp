// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>

namespace hjbvi {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Independent random streams derived from one user seed.
enum class Stream : std::uint32_t {
  kDiffusion = 1,
  kInitialState = 2,
  kObservationTimes = 3,
  kRewardNoise = 4,
  kOracle = 5,
  kEvaluation = 6,
  kModelSampling = 7,
  kBootstrap = 8,
};

/// Stateless random source: every draw is a pure function of
/// (seed, stream, index, step, block), so results do not depend on the
/// order in which paths are processed.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, Stream stream);

  std::array<double, 2> uniform_pair(std::uint64_t index, std::uint32_t step,
                                     std::uint32_t block) const;
  std::array<double, 2> normal_pair(std::uint64_t index, std::uint32_t step,
                                    std::uint32_t block) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint32_t, 2> key_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace hjbvi
