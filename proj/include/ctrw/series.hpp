#pragma once

// Convergence decisions for positive series.
//
// A verdict comes either from a declared asymptotic law of the terms
// (ClosedForm) or from a conservative scan of finitely many terms. The scan
// only says "converges" when the ratio of consecutive terms stays below
// 1 - epsilon for a full window and the geometric tail bound is negligible,
// and only says "diverges" when the partial sum passes a cap or the terms
// have stopped decaying. Anything else is Undetermined.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctrw/log_math.hpp"

namespace ctrw {

enum class SeriesStatus { Holds, Fails, Undetermined };

enum class SeriesMethod {
  ClosedForm,          // decided from a declared asymptotic law
  RatioPolicy,         // geometric ratio window with negligible tail
  Cap,                 // partial sum exceeded the cap
  LowerBound,          // terms bounded below by a constant
  NecessaryCondition,  // Phi_i did not vanish (necessary condition failed)
  ScaleDivergence,     // inner scale sums diverge
  Truncated            // ran out of terms without a decision
};

inline std::string_view to_string(SeriesStatus s) {
  switch (s) {
    case SeriesStatus::Holds: return "Holds";
    case SeriesStatus::Fails: return "Fails";
    case SeriesStatus::Undetermined: return "Undetermined";
  }
  return "?";
}

inline std::string_view to_string(SeriesMethod m) {
  switch (m) {
    case SeriesMethod::ClosedForm: return "ClosedForm";
    case SeriesMethod::RatioPolicy: return "RatioPolicy";
    case SeriesMethod::Cap: return "Cap";
    case SeriesMethod::LowerBound: return "LowerBound";
    case SeriesMethod::NecessaryCondition: return "NecessaryCondition";
    case SeriesMethod::ScaleDivergence: return "ScaleDivergence";
    case SeriesMethod::Truncated: return "Truncated";
  }
  return "?";
}

/// Thresholds of the numeric series policy.
struct SeriesPolicy {
  double epsilon = 1e-3;           // ratio must stay below 1 - epsilon
  std::size_t window = 256;        // confirmation window length
  double tail_relative = 1e-12;    // tail bound relative to the partial sum
  double cap = 1e12;               // partial sums beyond this diverge
  std::size_t max_terms = std::size_t{1} << 20;
  std::size_t phi_check_index = 100000;  // Phi_i -> 0 filter index
  double phi_threshold = 1e-6;
  bool use_closed_forms = true;
  std::size_t diagnostic_terms = 1024;  // partial sums reported with closed forms
};

/// Outcome of a convergence question about a positive series.
struct SeriesVerdict {
  SeriesStatus status = SeriesStatus::Undetermined;
  SeriesMethod method = SeriesMethod::Truncated;
  double partial_sum = 0.0;
  double log_partial_sum = kNegInf;
  std::size_t terms_used = 0;
  std::optional<double> tail_bound;
  std::string note;
};

/// Asymptotic behaviour of t_{k+1}/t_k = L (1 - s/k + O(k^-2)).
///
/// Geometric terms have L = ratio; power-law terms C k^-s have L = 1 and
/// exponent s. `exact_boundary` says the O(k^-2) remainder is genuine, so
/// Gauss's test also settles s = 1 (divergence). Slowly varying factors
/// leave the boundary undecided.
struct TailLaw {
  double limit_ratio = 1.0;
  double exponent = 0.0;
  bool exact_boundary = true;

  static TailLaw geometric(double ratio) { return {ratio, 0.0, true}; }
  static TailLaw power(double s, bool exact = true) { return {1.0, s, exact}; }
};

inline constexpr double kBoundaryTolerance = 1e-12;

/// Convergence of a series whose terms follow `law`.
inline SeriesStatus decide_tail(const TailLaw& law) {
  if (law.limit_ratio < 1.0 - kBoundaryTolerance) return SeriesStatus::Holds;
  if (law.limit_ratio > 1.0 + kBoundaryTolerance) return SeriesStatus::Fails;
  if (law.exponent > 1.0 + kBoundaryTolerance) return SeriesStatus::Holds;
  if (law.exponent < 1.0 - kBoundaryTolerance) return SeriesStatus::Fails;
  return law.exact_boundary ? SeriesStatus::Fails : SeriesStatus::Undetermined;
}

/// Flips Holds and Fails (e.g. "sum converges" into "sum diverges").
inline SeriesVerdict negate(SeriesVerdict v) {
  if (v.status == SeriesStatus::Holds) {
    v.status = SeriesStatus::Fails;
  } else if (v.status == SeriesStatus::Fails) {
    v.status = SeriesStatus::Holds;
  }
  return v;
}

/// Runs the numeric policy over the given log-terms.
///
/// The scan stops at the first decisive observation. If the terms run out
/// the verdict is Undetermined with method Truncated.
inline SeriesVerdict scan_series(std::span<const double> log_terms, const SeriesPolicy& policy) {
  SeriesVerdict v;
  LogSum sum;
  const double log_cap = std::log(policy.cap);
  const double ratio_limit = 1.0 - policy.epsilon;
  const std::size_t window = std::max<std::size_t>(policy.window, 1);
  std::size_t run = 0;  // consecutive ratios below the limit

  for (std::size_t k = 0; k < log_terms.size(); ++k) {
    const double lt = log_terms[k];
    sum.add(lt);
    v.terms_used = k + 1;
    v.log_partial_sum = sum.log_value();

    if (v.log_partial_sum > log_cap) {
      v.status = SeriesStatus::Fails;
      v.method = SeriesMethod::Cap;
      break;
    }

    if (k > 0) {
      const double prev = log_terms[k - 1];
      const double ratio = (lt == kNegInf) ? 0.0 : std::exp(lt - prev);
      run = (ratio < ratio_limit) ? run + 1 : 0;
      if (run >= window) {
        double rho = 0.0;
        for (std::size_t j = k + 1 - window; j <= k; ++j) {
          const double r = (log_terms[j] == kNegInf) ? 0.0 : std::exp(log_terms[j] - log_terms[j - 1]);
          rho = std::max(rho, r);
        }
        const double log_tail = lt + std::log(rho) - std::log1p(-rho);
        if (!(log_tail > v.log_partial_sum + std::log(policy.tail_relative))) {
          v.status = SeriesStatus::Holds;
          v.method = SeriesMethod::RatioPolicy;
          v.tail_bound = std::exp(log_tail);
          break;
        }
      }
    }

    // Terms bounded below: the latest window has not decayed relative to the
    // window around half the current index.
    const std::size_t n = k + 1;
    if (n >= 4 * window && (n & (n - 1)) == 0) {
      double last_min = kInf;
      for (std::size_t j = n - window; j < n; ++j) last_min = std::min(last_min, log_terms[j]);
      double mid_max = kNegInf;
      const std::size_t mid = n / 2 - window / 2;
      for (std::size_t j = mid; j < mid + window; ++j) mid_max = std::max(mid_max, log_terms[j]);
      if (last_min != kNegInf && last_min >= mid_max + std::log1p(-policy.epsilon)) {
        v.status = SeriesStatus::Fails;
        v.method = SeriesMethod::LowerBound;
        break;
      }
    }
  }
  v.partial_sum = std::exp(v.log_partial_sum);
  if (v.status == SeriesStatus::Undetermined) v.method = SeriesMethod::Truncated;
  return v;
}

/// Closed-form verdict with a finite partial sum attached for diagnostics.
inline SeriesVerdict closed_form_verdict(SeriesStatus status, std::span<const double> log_terms,
                                         std::string note = {}) {
  SeriesVerdict v;
  v.status = status;
  v.method = SeriesMethod::ClosedForm;
  LogSum sum;
  for (double lt : log_terms) sum.add(lt);
  v.log_partial_sum = sum.log_value();
  v.partial_sum = std::exp(v.log_partial_sum);
  v.terms_used = log_terms.size();
  v.note = std::move(note);
  return v;
}

}  // namespace ctrw
