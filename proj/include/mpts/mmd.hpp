#pragma once

#include <vector>

#include "mpts/matrix.hpp"

namespace mpts {

/// Gaussian RBF kernel exp(-|x-y|^2 / (2 sigma^2)), averaged over one or
/// more bandwidths.
class KernelSpec {
 public:
  explicit KernelSpec(double sigma);
  explicit KernelSpec(std::vector<double> bandwidths);

  /// {sigma/2, sigma, 2 sigma}.
  static KernelSpec multi_scale(double sigma);

  const std::vector<double>& bandwidths() const noexcept { return bandwidths_; }

  /// Kernel value for a precomputed squared distance.
  double operator()(double sq_dist) const noexcept;

 private:
  std::vector<double> bandwidths_;
};

Matrix rbf_kernel(const Matrix& a, const Matrix& b, const KernelSpec& spec);

/// Biased (V-statistic) MMD^2: mean(K_aa) - 2 mean(K_ab) + mean(K_bb),
/// diagonals included.
double mmd2_biased(const Matrix& za, const Matrix& zb, const KernelSpec& spec);

struct MmdGrads {
  Matrix dza;
  Matrix dzb;
};

/// Partial derivatives of mmd2_biased with respect to every entry of both batches.
MmdGrads mmd2_grad(const Matrix& za, const Matrix& zb, const KernelSpec& spec);

/// Median pairwise Euclidean distance. Falls back to 1 for fewer than two
/// points or a zero median.
double median_heuristic(const Matrix& z);

}  // namespace mpts
