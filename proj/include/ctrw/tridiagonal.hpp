#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ctrw/error.hpp"

namespace ctrw {

/// Solves a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i, i = 0..n-1, by the
/// Thomas sweep. a_0 and c_{n-1} are ignored. No pivoting: callers pass
/// (weakly) diagonally dominant systems.
inline std::vector<double> solve_tridiagonal(std::span<const double> a, std::span<const double> b,
                                             std::span<const double> c, std::span<const double> d) {
  const std::size_t n = b.size();
  if (a.size() != n || c.size() != n || d.size() != n) {
    throw ArgumentError("tridiagonal bands must have equal length");
  }
  if (n == 0) return {};
  std::vector<double> cp(n);
  std::vector<double> dp(n);
  double denom = b[0];
  if (denom == 0.0 || !std::isfinite(denom)) throw NumericError("singular tridiagonal system at row 0");
  cp[0] = c[0] / denom;
  dp[0] = d[0] / denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = b[i] - a[i] * cp[i - 1];
    if (denom == 0.0 || !std::isfinite(denom)) {
      throw NumericError("singular tridiagonal system at row " + std::to_string(i));
    }
    cp[i] = (i + 1 < n) ? c[i] / denom : 0.0;
    dp[i] = (d[i] - a[i] * dp[i - 1]) / denom;
  }
  std::vector<double> x(n);
  x[n - 1] = dp[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
  return x;
}

}  // namespace ctrw
