// SPDX-License-Identifier: Apache-2.0
#include "hjbvi/numerics.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "hjbvi/errors.hpp"

namespace hjbvi {

double potential_coefficient(double alpha, PotentialScaling scaling) {
  return scaling == PotentialScaling::kAlphaR ? alpha : 1.0 / alpha;
}

std::string to_string(PotentialScaling scaling) {
  return scaling == PotentialScaling::kAlphaR ? "alpha_r" : "r_over_alpha";
}

PotentialScaling parse_potential_scaling(std::string_view name) {
  if (name == "alpha_r") return PotentialScaling::kAlphaR;
  if (name == "r_over_alpha") return PotentialScaling::kROverAlpha;
  throw ConfigError(fmt::format("unknown potential_scaling '{}'", name));
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 32;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MeanStderr mean_stderr(std::span<const double> values) {
  MeanStderr out;
  const std::size_t n = values.size();
  if (n == 0) return out;
  out.mean = pairwise_sum(values) / static_cast<double>(n);
  if (n < 2) return out;
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = values[i] - out.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
  out.std_error = std::sqrt(var / static_cast<double>(n));
  return out;
}

std::string format_double(double value) {
  if (!std::isfinite(value)) {
    throw NumericalError(fmt::format("cannot serialize non-finite value {}", value));
  }
  return fmt::format("{:.17g}", value);
}

std::string digest_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return fmt::format("{:016x}", h);
}

QuadratureRule gauss_hermite(int order) {
  if (order < 1) throw ConfigError("Gauss-Hermite order must be >= 1");
  Mat jacobi = Mat::Zero(order, order);
  for (int i = 1; i < order; ++i) {
    const double b = std::sqrt(i / 2.0);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const double mu0 = std::sqrt(std::numbers::pi);
  for (int i = 0; i < order; ++i) {
    rule.nodes[i] = eig.eigenvalues()(i);
    const double v0 = eig.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

Mat psd_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  Vec s = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * s.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace hjbvi
