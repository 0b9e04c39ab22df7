#pragma once

// Finite linear systems for hitting-time transforms and expected profits.
//
//   f_i^n = E_i exp(-lambda sigma_n):
//     f_0 = phi_0^+ f_1,  f_i = p_i phi_i^+ f_{i+1} + q_i phi_i^- f_{i-1},  f_n = 1
//   y_i = expected profit sum A_{X_k} collected before the chain reaches n:
//     y_0 = A_0 + y_1,    y_i = A_i + p_i y_{i+1} + q_i y_{i-1},             y_n = 0
//
// The transform system is eliminated in the form f_i = c_i f_{i+1}; its
// complement d_i = 1 - c_i obeys a recursion with only positive terms,
//   d_0 = Phi_0^+,
//   d_i = (p Phi^+ + q Phi^- + q phi^- d_{i-1}) / (p + q Phi^- + q phi^- d_{i-1}),
// so log f is accurate even when f_i^n is within 1e-15 of 1 or far below
// the smallest double.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctrw/chain.hpp"
#include "ctrw/criteria.hpp"
#include "ctrw/error.hpp"
#include "ctrw/log_math.hpp"
#include "ctrw/tridiagonal.hpp"
#include "ctrw/waiting.hpp"

namespace ctrw {

struct SolveResult {
  std::vector<double> values;      // indexed by state (offset by `first_state`)
  std::vector<double> log_values;  // filled for transform solves
  double residual = 0.0;           // max |row residual| / max(1, |values|, |rhs|)
  StateIndex first_state = 0;
};

namespace detail {

inline void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + " produced a non-finite value");
  }
}

inline double scale_of(std::span<const double> a, std::span<const double> b) {
  double s = 1.0;
  for (double x : a) s = std::max(s, std::abs(x));
  for (double x : b) s = std::max(s, std::abs(x));
  return s;
}

/// log c_j for j = 0 .. n-1, where f_j^n = c_j f_{j+1}^n.
inline std::vector<double> transform_log_factors(const ChainSpec& chain, const WaitingSpec& waiting, std::size_t n,
                                                 double lambda) {
  std::vector<double> log_c(n);
  double d = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const PhiValue v = phi(chain, waiting, j, lambda);
    if (j == 0) {
      d = v.big_phi_plus;
    } else {
      const Transition t = chain.at(j);
      const double carry = t.q * v.phi_minus * d;
      d = (t.p * v.big_phi_plus + t.q * v.big_phi_minus + carry) / (t.p + t.q * v.big_phi_minus + carry);
    }
    if (!(d > 0.0) || !(d <= 1.0)) throw NumericError("transform elimination left (0, 1] at row " + std::to_string(j));
    log_c[j] = std::log1p(-d);
  }
  return log_c;
}

}  // namespace detail

/// f_i^n for 0 <= i <= n.
inline SolveResult solve_hitting_transform(const ChainSpec& chain, const WaitingSpec& waiting, std::size_t n,
                                           std::optional<double> lambda_override = std::nullopt) {
  if (n < 1) throw ArgumentError("hitting transform needs n >= 1");
  const double lambda = lambda_override.value_or(waiting.lambda);
  const std::vector<double> log_c = detail::transform_log_factors(chain, waiting, n, lambda);

  SolveResult out;
  out.log_values.assign(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) out.log_values[i] = out.log_values[i + 1] + log_c[i];
  out.values.resize(n + 1);
  std::transform(out.log_values.begin(), out.log_values.end(), out.values.begin(),
                 [](double lv) { return std::exp(lv); });

  double residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const PhiValue v = phi(chain, waiting, i, lambda);
    double rhs = v.phi_plus * out.values[i + 1];
    if (i > 0) {
      const Transition t = chain.at(i);
      rhs = t.p * v.phi_plus * out.values[i + 1] + t.q * v.phi_minus * out.values[i - 1];
    }
    residual = std::max(residual, std::abs(out.values[i] - rhs));
  }
  out.residual = residual;
  return out;
}

/// log f_0^n for n = 1 .. n_max (entry n - 1), in O(n_max).
inline std::vector<double> log_f0_sweep(const ChainSpec& chain, const WaitingSpec& waiting, std::size_t n_max,
                                        std::optional<double> lambda_override = std::nullopt) {
  const double lambda = lambda_override.value_or(waiting.lambda);
  const std::vector<double> log_c = detail::transform_log_factors(chain, waiting, n_max, lambda);
  std::vector<double> out(n_max);
  double acc = 0.0;
  for (std::size_t j = 0; j < n_max; ++j) {
    acc += log_c[j];
    out[j] = acc;
  }
  return out;
}

/// y_i for 0 <= i <= n. `a` holds A_0 .. A_{n-1} (an extra A_n is ignored).
inline SolveResult solve_profit(const ChainSpec& chain, std::span<const double> a, std::size_t n) {
  if (n < 1) throw ArgumentError("profit system needs n >= 1");
  if (a.size() != n && a.size() != n + 1) {
    throw ArgumentError("profit vector must have n or n+1 entries (got " + std::to_string(a.size()) + ")");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(a[i])) throw NumericError("profit A_" + std::to_string(i) + " is not finite");
    if (a[i] < 0.0) throw ArgumentError("profit A_" + std::to_string(i) + " is negative");
  }
  // Rows sum to zero, so elimination reduces to d_i = y_i - y_{i+1} = (A_i + q_i d_{i-1}) / p_i.
  std::vector<double> rhs(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<double> p(n), q(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition t = chain.at(i);
    p[i] = t.p;
    q[i] = t.q;
    d[i] = (rhs[i] + (i > 0 ? t.q * d[i - 1] : 0.0)) / t.p;
  }
  SolveResult out;
  out.values.assign(n, 0.0);
  CompensatedSum tail;
  for (std::size_t i = n; i-- > 0;) {
    tail.add(d[i]);
    out.values[i] = tail.value();
  }
  out.values.push_back(0.0);
  detail::check_finite(out.values, "profit solve");

  const double scale = detail::scale_of(out.values, rhs);
  double residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double left = (i > 0) ? q[i] * out.values[i - 1] : 0.0;
    residual = std::max(residual, std::abs(out.values[i] - p[i] * out.values[i + 1] - left - rhs[i]));
  }
  out.residual = residual / scale;
  return out;
}

namespace detail {

/// inner_k = sum_{i=0..k} A_i (q_{i+1} ... q_k) / (p_i ... p_k), as a direct
/// double sum over log-space products.
inline std::vector<double> dy_inner_terms(const ChainSpec& chain, std::span<const double> a, std::size_t n) {
  std::vector<double> log_prefix_p(n + 1, 0.0);  // sum_{j<m} log p_j
  std::vector<double> log_prefix_q(n + 1, 0.0);  // sum_{1<=j<m} log q_j
  for (std::size_t m = 0; m < n; ++m) {
    const Transition t = chain.at(m);
    log_prefix_p[m + 1] = log_prefix_p[m] + std::log(t.p);
    log_prefix_q[m + 1] = log_prefix_q[m] + (m == 0 ? 0.0 : std::log(t.q));
  }
  std::vector<double> inner(n);
  for (std::size_t k = 0; k < n; ++k) {
    LogSum s;
    for (std::size_t i = 0; i <= k; ++i) {
      if (a[i] == 0.0) continue;
      const double log_num = log_prefix_q[k + 1] - log_prefix_q[i + 1];
      const double log_den = log_prefix_p[k + 1] - log_prefix_p[i];
      s.add(std::log(a[i]) + log_num - log_den);
    }
    inner[k] = s.value();
  }
  return inner;
}

}  // namespace detail

/// y_j = S_n(A) - S_j(A) = sum_{k=j..n-1} sum_{i=0..k} A_i (q_{i+1}...q_k) / (p_i...p_k).
inline double dy_closed_form(const ChainSpec& chain, std::span<const double> a, std::size_t j, std::size_t n) {
  if (j > n) throw ArgumentError("dy_closed_form needs j <= n");
  if (a.size() < n) throw ArgumentError("profit vector shorter than n");
  if (j == n) return 0.0;
  const std::vector<double> inner = detail::dy_inner_terms(chain, a, n);
  CompensatedSum y;
  for (std::size_t k = j; k < n; ++k) y.add(inner[k]);
  return y.value();
}

/// dy_closed_form for every j = 0 .. n.
inline std::vector<double> dy_closed_form_all(const ChainSpec& chain, std::span<const double> a, std::size_t n) {
  if (a.size() < n) throw ArgumentError("profit vector shorter than n");
  const std::vector<double> inner = detail::dy_inner_terms(chain, a, n);
  std::vector<double> y(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    CompensatedSum s;
    for (std::size_t k = j; k < n; ++k) s.add(inner[k]);
    y[j] = s.value();
  }
  return y;
}

/// F_i = 1 - E_i exp(-lambda (sigma_l ^ sigma_r)) on l <= i <= r:
///   F_i - p phi^+ F_{i+1} - q phi^- F_{i-1} = Phi_i,   F_l = F_r = 0.
inline SolveResult solve_two_sided_transform(const ChainSpec& chain, const WaitingSpec& waiting, StateIndex l,
                                             StateIndex r, std::optional<double> lambda_override = std::nullopt) {
  if (!(l < r)) throw ArgumentError("two-sided system needs l < r");
  const double lambda = lambda_override.value_or(waiting.lambda);
  const std::size_t m = r - l - 1;  // interior unknowns
  SolveResult out;
  out.first_state = l;
  out.values.assign(r - l + 1, 0.0);
  if (m == 0) return out;
  std::vector<double> sub(m), diag(m, 1.0), sup(m), rhs(m);
  for (std::size_t k = 0; k < m; ++k) {
    const StateIndex i = l + 1 + k;
    const PhiValue v = phi(chain, waiting, i, lambda);
    const Transition t = chain.at(i);
    sub[k] = -t.q * v.phi_minus;
    sup[k] = -t.p * v.phi_plus;
    rhs[k] = v.big_phi;
  }
  const std::vector<double> x = solve_tridiagonal(sub, diag, sup, rhs);
  std::copy(x.begin(), x.end(), out.values.begin() + 1);
  detail::check_finite(out.values, "two-sided transform solve");
  double residual = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double row = out.values[k + 1] + sup[k] * out.values[k + 2] + sub[k] * out.values[k] - rhs[k];
    residual = std::max(residual, std::abs(row));
  }
  out.residual = residual;
  return out;
}

/// G_i - p G_{i+1} - q G_{i-1} = A_i on l < i < r with G_l = G_r = 0.
/// `a` is indexed by state and must cover index r - 1.
inline SolveResult solve_two_sided_profit(const ChainSpec& chain, std::span<const double> a, StateIndex l,
                                          StateIndex r) {
  if (!(l < r)) throw ArgumentError("two-sided system needs l < r");
  if (a.size() < r) throw ArgumentError("profit vector must cover states below r");
  const std::size_t m = r - l - 1;
  SolveResult out;
  out.first_state = l;
  out.values.assign(r - l + 1, 0.0);
  if (m == 0) return out;
  std::vector<double> sub(m), diag(m, 1.0), sup(m), rhs(m);
  for (std::size_t k = 0; k < m; ++k) {
    const StateIndex i = l + 1 + k;
    if (a[i] < 0.0) throw ArgumentError("profit A_" + std::to_string(i) + " is negative");
    const Transition t = chain.at(i);
    sub[k] = -t.q;
    sup[k] = -t.p;
    rhs[k] = a[i];
  }
  const std::vector<double> x = solve_tridiagonal(sub, diag, sup, rhs);
  std::copy(x.begin(), x.end(), out.values.begin() + 1);
  detail::check_finite(out.values, "two-sided profit solve");
  double residual = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double row = out.values[k + 1] + sup[k] * out.values[k + 2] + sub[k] * out.values[k] - rhs[k];
    residual = std::max(residual, std::abs(row));
  }
  out.residual = residual / detail::scale_of(out.values, rhs);
  return out;
}

/// Big Phi_i for i = 0 .. n-1.
inline std::vector<double> big_phi_vector(const ChainSpec& chain, const WaitingSpec& waiting, std::size_t n,
                                          std::optional<double> lambda = std::nullopt) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = phi(chain, waiting, i, lambda).big_phi;
  return out;
}

namespace detail {

/// log y_i of the profit system, for profits beyond the double range.
inline std::vector<double> log_profit(const ChainSpec& chain, std::span<const double> a, std::size_t n) {
  std::vector<double> log_d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition t = chain.at(i);
    const double carry = (i > 0) ? std::log(t.q) + log_d[i - 1] : kNegInf;
    log_d[i] = log_add_exp(a[i] > 0.0 ? std::log(a[i]) : kNegInf, carry) - std::log(t.p);
  }
  std::vector<double> log_y(n + 1, kNegInf);
  for (std::size_t i = n; i-- > 0;) log_y[i] = log_add_exp(log_y[i + 1], log_d[i]);
  return log_y;
}

}  // namespace detail

struct ComparisonBounds {
  std::vector<double> f;  // f_i^n
  std::vector<double> F;  // 1 - f_i^n
  std::vector<double> G;  // profit with A_i = Phi_i; may be +inf past the double range
  std::vector<double> H;  // c G
  std::vector<double> log_G;
  double c = 0.0;  // min_i f_i^n = f_0^n
  double log_c = kNegInf;
  std::size_t violations = 0;
  double worst_excess = 0.0;
};

inline constexpr double kComparisonTolerance = 1e-12;

/// H_i <= F_i <= G_i for 0 <= i <= n. Throws InvariantViolation on failure
/// when `enforce` is set; the counts are reported either way.
inline ComparisonBounds comparison_bounds(const ChainSpec& chain, const WaitingSpec& waiting, std::size_t n,
                                          std::optional<double> lambda = std::nullopt, bool enforce = true) {
  ComparisonBounds out;
  const SolveResult f = solve_hitting_transform(chain, waiting, n, lambda);
  out.f = f.values;
  out.F.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) out.F[i] = -std::expm1(f.log_values[i]);
  const std::vector<double> a = big_phi_vector(chain, waiting, n, lambda);
  out.log_G = detail::log_profit(chain, a, n);
  out.log_c = *std::min_element(f.log_values.begin(), f.log_values.end());
  out.c = std::exp(out.log_c);
  out.G.resize(n + 1);
  out.H.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    out.G[i] = std::exp(out.log_G[i]);
    out.H[i] = std::exp(out.log_c + out.log_G[i]);
  }

  for (std::size_t i = 0; i <= n; ++i) {
    const double tol_upper = kComparisonTolerance * std::max(1.0, std::abs(out.G[i]));
    const double tol_lower = kComparisonTolerance * std::max(1.0, std::abs(out.F[i]));
    const double over = out.F[i] - out.G[i];
    const double under = out.H[i] - out.F[i];
    if (over > tol_upper || under > tol_lower) {
      ++out.violations;
      out.worst_excess = std::max({out.worst_excess, over, under});
    }
  }
  if (enforce && out.violations > 0) {
    throw InvariantViolation("comparison bounds violated at " + std::to_string(out.violations) +
                             " states (worst excess " + std::to_string(out.worst_excess) + ")");
  }
  return out;
}

/// Per-state profits y_j = nu_j (delta_l + ... + delta_{j-1}) for the tail
/// problem started from infinity with absorption at l.
struct TailProfit {
  StateIndex l = 0;
  std::vector<double> y;             // y[j - l - 1] for j = l+1 .. i_max
  std::vector<double> partial_sums;  // partial sums of G^l = sum_j y_j
  std::vector<double> log_span;      // log(u_j - u_l) for j = l+1 .. i_max
  RecurrenceClass recurrence = RecurrenceClass::Undetermined;
};

inline TailProfit implosion_tail_profit(const ChainSpec& chain, const WaitingSpec& waiting, StateIndex l,
                                        StateIndex i_max, std::optional<double> lambda = std::nullopt,
                                        const SeriesPolicy& policy = {}) {
  if (!(i_max > l)) throw ArgumentError("tail profit needs i_max > l");
  TailProfit out;
  out.l = l;
  out.recurrence = recurrence_class(chain, policy.max_terms, policy).cls;
  if (out.recurrence == RecurrenceClass::Transient) {
    throw NotApplicable("tail profit needs a recurrent chain; this chain is transient");
  }
  const ScaleTable& table = chain.scale_table();
  table.ensure(i_max);
  LogSum span;
  CompensatedSum total;
  for (StateIndex j = l + 1; j <= i_max; ++j) {
    span.add(table.log_delta(j - 1));
    const double log_y = log_speed_measure(chain, waiting, j, lambda) + span.log_value();
    const double y = std::exp(log_y);
    out.y.push_back(y);
    out.log_span.push_back(span.log_value());
    total.add(y);
    out.partial_sums.push_back(total.value());
  }
  return out;
}

/// G_i^l approximated by the computed profits:
///   sum_j y_j min(1, (u_i - u_l) / (u_j - u_l)).
inline double profit_from_state(const ChainSpec& chain, const TailProfit& tail, StateIndex i) {
  if (i <= tail.l) return 0.0;
  const double log_ui = log_scale_span(chain, tail.l, i);
  CompensatedSum g;
  for (std::size_t k = 0; k < tail.y.size(); ++k) {
    const double factor = std::min(1.0, std::exp(log_ui - tail.log_span[k]));
    g.add(tail.y[k] * factor);
  }
  return g.value();
}

}  // namespace ctrw
