#pragma once

#include <cmath>
#include <vector>

#include "ctrw/ctrw.hpp"

namespace ctrw::test {

inline WaitingSpec markov(double beta, double coef = 1.0, double lambda = 1.0) {
  return WaitingSpec::symmetric(DistModel::exponential(ScaleRule::power_law(beta, coef)), lambda);
}

inline WaitingSpec markov_const(double a, double lambda = 1.0) {
  return WaitingSpec::symmetric(DistModel::exponential(ScaleRule::constant(a)), lambda);
}

inline WaitingSpec stable(double alpha, double beta, double c = 1.0, double lambda = 1.0) {
  return WaitingSpec::symmetric(DistModel::stable(alpha, c, ScaleRule::power_law(beta)), lambda);
}

inline double rel_err(double got, double want) {
  if (got == want) return 0.0;
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

// Gaussian elimination with partial pivoting on a dense copy.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> m, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    std::swap(m[col], m[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = m[r][col] / m[col][col];
      for (std::size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= m[r][c] * x[c];
    x[r] = s / m[r][r];
  }
  return x;
}

}  // namespace ctrw::test
