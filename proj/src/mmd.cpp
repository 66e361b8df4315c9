#include "mpts/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mpts/error.hpp"

namespace mpts {

KernelSpec::KernelSpec(double sigma) : KernelSpec(std::vector<double>{sigma}) {}

KernelSpec::KernelSpec(std::vector<double> bandwidths) : bandwidths_(std::move(bandwidths)) {
  if (bandwidths_.empty()) throw ParameterError("kernel needs at least one bandwidth");
  for (double s : bandwidths_) {
    if (!(std::isfinite(s) && s > 0.0)) {
      throw ParameterError("kernel bandwidth must be positive and finite, got " +
                           std::to_string(s));
    }
  }
}

KernelSpec KernelSpec::multi_scale(double sigma) {
  return KernelSpec({0.5 * sigma, sigma, 2.0 * sigma});
}

double KernelSpec::operator()(double sq_dist) const noexcept {
  double k = 0.0;
  for (double s : bandwidths_) k += std::exp(-sq_dist / (2.0 * s * s));
  return k / static_cast<double>(bandwidths_.size());
}

namespace {

void check_pair(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() == 0 || b.rows() == 0) {
    throw ParameterError(std::string(op) + ": empty batch (" + a.shape_str() + ", " +
                         b.shape_str() + ")");
  }
  if (a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": feature dims differ (" + a.shape_str() + ", " +
                         b.shape_str() + ")");
  }
}

double kernel_mean(const Matrix& a, const Matrix& b, const KernelSpec& spec) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) s += spec(squared_distance(a.row(i), b.row(j)));
  }
  return s / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

// d/dx of k(x, y) is -w(x, y) * (x - y) with w = mean over sigma of k_sigma / sigma^2.
double kernel_slope(double sq_dist, const KernelSpec& spec) {
  double w = 0.0;
  for (double s : spec.bandwidths()) {
    const double s2 = s * s;
    w += std::exp(-sq_dist / (2.0 * s2)) / s2;
  }
  return w / static_cast<double>(spec.bandwidths().size());
}

// grad[i] += coef * sum_j w(x_i, y_j) * -(x_i - y_j)
void accumulate_grad(Matrix& grad, const Matrix& x, const Matrix& y, double coef,
                     const KernelSpec& spec) {
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    auto gi = grad.row(i);
    for (std::size_t j = 0; j < y.rows(); ++j) {
      const auto yj = y.row(j);
      const double w = coef * kernel_slope(squared_distance(xi, yj), spec);
      for (std::size_t k = 0; k < d; ++k) gi[k] -= w * (xi[k] - yj[k]);
    }
  }
}

}  // namespace

Matrix rbf_kernel(const Matrix& a, const Matrix& b, const KernelSpec& spec) {
  if (a.cols() != b.cols()) {
    throw DimensionError("rbf_kernel: feature dims differ (" + a.shape_str() + ", " +
                         b.shape_str() + ")");
  }
  Matrix k(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) k(i, j) = spec(squared_distance(a.row(i), b.row(j)));
  }
  return k;
}

double mmd2_biased(const Matrix& za, const Matrix& zb, const KernelSpec& spec) {
  check_pair(za, zb, "mmd2_biased");
  return kernel_mean(za, za, spec) - 2.0 * kernel_mean(za, zb, spec) +
         kernel_mean(zb, zb, spec);
}

MmdGrads mmd2_grad(const Matrix& za, const Matrix& zb, const KernelSpec& spec) {
  check_pair(za, zb, "mmd2_grad");
  const double a = static_cast<double>(za.rows());
  const double b = static_cast<double>(zb.rows());
  MmdGrads g{Matrix(za.rows(), za.cols()), Matrix(zb.rows(), zb.cols())};
  // Each K_aa pair appears twice (i,j) and (j,i), hence the factor 2.
  accumulate_grad(g.dza, za, za, 2.0 / (a * a), spec);
  accumulate_grad(g.dza, za, zb, -2.0 / (a * b), spec);
  accumulate_grad(g.dzb, zb, zb, 2.0 / (b * b), spec);
  accumulate_grad(g.dzb, zb, za, -2.0 / (a * b), spec);
  return g;
}

double median_heuristic(const Matrix& z) {
  const std::size_t n = z.rows();
  if (n < 2) return 1.0;
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dist.push_back(std::sqrt(squared_distance(z.row(i), z.row(j))));
    }
  }
  const std::size_t m = dist.size();
  std::nth_element(dist.begin(), dist.begin() + m / 2, dist.end());
  double med = dist[m / 2];
  if (m % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + m / 2);
    med = 0.5 * (lower + med);
  }
  return med > 0.0 ? med : 1.0;
}

}  // namespace mpts
