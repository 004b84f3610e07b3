// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hjbvi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// How the reward enters the linear PDE for f = exp(V / alpha).
///   kAlphaR:      d_t f + A f + alpha * r * f = 0   (the form the solver uses)
///   kROverAlpha:  d_t f + A f + (r / alpha) * f = 0 (value-function consistent)
/// The two coincide when alpha == 1.
enum class PotentialScaling { kAlphaR, kROverAlpha };

double potential_coefficient(double alpha, PotentialScaling scaling);
std::string to_string(PotentialScaling scaling);
PotentialScaling parse_potential_scaling(std::string_view name);

/// Pairwise (tree) summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> values);

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean and standard error of the mean (n - 1 denominator).
MeanStderr mean_stderr(std::span<const double> values);

/// Decimal with 17 significant digits (round-trip exact for binary64).
std::string format_double(double value);

/// 64-bit FNV-1a digest rendered as 16 hex digits.
std::string digest_hex(std::string_view bytes);

/// Gauss–Hermite rule for the weight exp(-z^2): nodes and weights (Golub–Welsch).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadratureRule gauss_hermite(int order);

/// Symmetric PSD square root via eigendecomposition (negative eigenvalues clipped to 0).
Mat psd_sqrt(const Mat& m);

}  // namespace hjbvi
