#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mpts {

/// Default step for central differences.
inline constexpr double kFiniteDifferenceStep = 1e-6;
/// Largest relative error a suite may report and still pass.
inline constexpr double kGradcheckTolerance = 1e-5;

struct GradcheckSuite {
  std::string name;
  std::size_t instances = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// |a - b|_2 / max(|a|_2, |b|_2, 1e-7).
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// Finite-difference checks of every hand-derived gradient: layer primitives,
/// the MMD estimator (two bandwidth sets) and the end-to-end CE + lambda*MMD
/// objective through a small network. At least 20 seeded instances per suite.
/// `inject` is added to one analytic gradient entry per instance (negative
/// control for the harness).
std::vector<GradcheckSuite> run_gradcheck(std::uint64_t seed, double inject = 0.0);

}  // namespace mpts
