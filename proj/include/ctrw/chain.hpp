#pragma once

// Embedded birth-and-death chain on {0, 1, 2, ...}.
//
// State 0 always steps right (p_0 = 1, q_0 = 0); every state i >= 1 steps
// right with probability p_i and left with q_i = 1 - p_i. The scale
//   delta_k = (q_1 ... q_k) / (p_1 ... p_k)
// and the canonical scale u_i = delta_0 + ... + delta_{i-1} are memoized in
// log space, since delta_k spans hundreds of orders of magnitude.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ctrw/error.hpp"
#include "ctrw/expression.hpp"
#include "ctrw/log_math.hpp"
#include "ctrw/series.hpp"

namespace ctrw {

using StateIndex = std::uint64_t;

struct Transition {
  double p = 1.0;  // probability of stepping to i + 1
  double q = 0.0;  // probability of stepping to i - 1
};

inline constexpr double kProbabilityTolerance = 1e-12;

/// u_i above this value is reported as +infinity ("effectively infinite").
inline constexpr double kScaleSaturation = 1e300;

enum class ChainFamily { Homogeneous, Table, Rational, Expression, Custom };

inline std::string_view to_string(ChainFamily f) {
  switch (f) {
    case ChainFamily::Homogeneous: return "homogeneous";
    case ChainFamily::Table: return "table";
    case ChainFamily::Rational: return "rational";
    case ChainFamily::Expression: return "expression";
    case ChainFamily::Custom: return "custom";
  }
  return "?";
}

/// Polynomial with coefficients in ascending powers.
struct Polynomial {
  std::vector<double> coefficients;

  double operator()(double x) const {
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  /// Degree after dropping exact-zero leading coefficients; -1 for zero.
  int degree() const {
    for (int d = static_cast<int>(coefficients.size()) - 1; d >= 0; --d) {
      if (coefficients[static_cast<std::size_t>(d)] != 0.0) return d;
    }
    return -1;
  }

  double coefficient(int d) const {
    return (d >= 0 && static_cast<std::size_t>(d) < coefficients.size())
               ? coefficients[static_cast<std::size_t>(d)]
               : 0.0;
  }
};

/// Checks p_i, q_i against the chain invariants; throws ValidationError.
inline Transition validate_transition(StateIndex i, Transition t) {
  const bool finite = std::isfinite(t.p) && std::isfinite(t.q);
  if (!finite || t.p <= 0.0 || t.q <= 0.0 || t.p > 1.0 || t.q > 1.0 ||
      std::abs(t.p + t.q - 1.0) > kProbabilityTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "invalid transition at state " << i << ": p=" << t.p << " q=" << t.q;
    throw ValidationError(os.str());
  }
  return t;
}

/// Memoized log delta_k and canonical scale u_i. Append-only and internally
/// synchronized, so one table can be shared by concurrent readers.
class ScaleTable {
 public:
  using Accessor = std::function<Transition(StateIndex)>;

  explicit ScaleTable(Accessor at) : at_(std::move(at)) {
    log_delta_.push_back(0.0);
    u_.push_back(0.0);
    u_.push_back(1.0);
    u_sum_.add(1.0);
  }

  double log_delta(StateIndex k) const {
    ensure(k);
    std::shared_lock lock(mutex_);
    return log_delta_[k];
  }

  /// u_i; +infinity once the sum passes the saturation threshold.
  double canonical_scale(StateIndex i) const {
    ensure(i);
    std::shared_lock lock(mutex_);
    return u_[i];
  }

  /// First index whose u_i saturated, if any has so far.
  std::optional<StateIndex> saturated_at() const {
    std::shared_lock lock(mutex_);
    return saturated_at_;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return log_delta_.size();
  }

  /// Makes log_delta[0..k] and u[0..k] available.
  void ensure(StateIndex k) const {
    {
      std::shared_lock lock(mutex_);
      if (k < log_delta_.size() && k < u_.size()) return;
    }
    std::unique_lock lock(mutex_);
    log_delta_.reserve(k + 1);
    while (log_delta_.size() <= k) {
      const StateIndex j = log_delta_.size();
      const Transition t = at_(j);
      log_delta_.push_back(log_delta_.back() + std::log(t.q) - std::log(t.p));
    }
    while (u_.size() <= k) {
      const StateIndex i = u_.size();
      if (saturated_at_) {
        u_.push_back(kInf);
        continue;
      }
      u_sum_.add(std::exp(log_delta_[i - 1]));
      double value = u_sum_.value();
      if (!(value <= kScaleSaturation)) {
        saturated_at_ = i;
        value = kInf;
      }
      u_.push_back(value);
    }
  }

 private:
  Accessor at_;
  mutable std::shared_mutex mutex_;
  mutable std::vector<double> log_delta_;
  mutable std::vector<double> u_;
  mutable CompensatedSum u_sum_;
  mutable std::optional<StateIndex> saturated_at_;
};

/// Transition rule of the embedded chain plus its declared asymptotic family.
class ChainSpec {
 public:
  using Rule = std::function<Transition(StateIndex)>;

  /// p_i = p for all i >= 1.
  static ChainSpec homogeneous(double p) {
    validate_transition(1, {p, 1.0 - p});
    ChainSpec c(ChainFamily::Homogeneous, [p](StateIndex) { return Transition{p, 1.0 - p}; });
    c.homogeneous_p_ = p;
    c.scale_tail_ = TailLaw::geometric((1.0 - p) / p);
    std::ostringstream os;
    os << "homogeneous(p=" << p << ")";
    c.description_ = os.str();
    return c;
  }

  /// Explicit p_1, p_2, ..., p_m; the last value extends to all i > m.
  static ChainSpec table(std::vector<double> p_values) {
    if (p_values.empty()) throw ValidationError("table chain needs at least one probability");
    for (std::size_t k = 0; k < p_values.size(); ++k) {
      validate_transition(k + 1, {p_values[k], 1.0 - p_values[k]});
    }
    const double last = p_values.back();
    auto values = std::make_shared<const std::vector<double>>(std::move(p_values));
    ChainSpec c(ChainFamily::Table, [values](StateIndex i) {
      const double p = (i - 1 < values->size()) ? (*values)[i - 1] : values->back();
      return Transition{p, 1.0 - p};
    });
    c.scale_tail_ = TailLaw::geometric((1.0 - last) / last);
    c.description_ = "table(" + std::to_string(values->size()) + " entries)";
    return c;
  }

  /// p_i = P(i) / Q(i). Values are range-checked as states are visited; the
  /// asymptotic ratio of the scale is derived from leading coefficients.
  static ChainSpec rational(Polynomial numerator, Polynomial denominator) {
    if (numerator.degree() < 0 || denominator.degree() < 0) {
      throw ValidationError("rational chain needs nonzero numerator and denominator");
    }
    ChainSpec c(ChainFamily::Rational, [numerator, denominator](StateIndex i) {
      const double x = static_cast<double>(i);
      const double p = numerator(x) / denominator(x);
      return Transition{p, 1.0 - p};
    });
    c.scale_tail_ = rational_scale_tail(numerator, denominator);
    c.description_ = "rational";
    return c;
  }

  /// p_i given by an expression in i; q_i = 1 - p_i. `declared_scale_tail`
  /// optionally states the asymptotics of delta_{k+1} / delta_k.
  static ChainSpec expression(Expression p_rule, std::optional<TailLaw> declared_scale_tail = std::nullopt) {
    auto rule = std::make_shared<const Expression>(std::move(p_rule));
    ChainSpec c(ChainFamily::Expression, [rule](StateIndex i) {
      const double p = (*rule)(static_cast<double>(i));
      return Transition{p, 1.0 - p};
    });
    c.scale_tail_ = declared_scale_tail;
    c.description_ = "expression(" + rule->source() + ")";
    return c;
  }

  /// Arbitrary rule; `declared_scale_tail` optionally states the asymptotics
  /// of delta_{k+1} / delta_k.
  static ChainSpec custom(Rule rule, std::optional<TailLaw> declared_scale_tail = std::nullopt) {
    ChainSpec c(ChainFamily::Custom, std::move(rule));
    c.scale_tail_ = declared_scale_tail;
    c.description_ = "custom";
    return c;
  }

  /// Validated (p_i, q_i); state 0 is always (1, 0).
  Transition at(StateIndex i) const {
    if (i == 0) return {1.0, 0.0};
    return validate_transition(i, rule_(i));
  }

  double p(StateIndex i) const { return at(i).p; }
  double q(StateIndex i) const { return at(i).q; }

  ChainFamily family() const { return family_; }
  std::optional<double> homogeneous_p() const { return homogeneous_p_; }
  const std::optional<TailLaw>& scale_tail() const { return scale_tail_; }
  const std::string& description() const { return description_; }

  const ScaleTable& scale_table() const { return *table_; }

 private:
  ChainSpec(ChainFamily family, Rule rule) : family_(family), rule_(std::move(rule)) {
    table_ = std::make_shared<ScaleTable>([rule = rule_](StateIndex i) {
      if (i == 0) return Transition{1.0, 0.0};
      return validate_transition(i, rule(i));
    });
  }

  static TailLaw rational_scale_tail(const Polynomial& num, const Polynomial& den) {
    // delta_{k+1} / delta_k = q_{k+1} / p_{k+1} = (Q - P) / P.
    Polynomial a;
    const std::size_t n = std::max(num.coefficients.size(), den.coefficients.size());
    a.coefficients.resize(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      a.coefficients[k] = den.coefficient(static_cast<int>(k)) - num.coefficient(static_cast<int>(k));
    }
    const int da = a.degree();
    const int db = num.degree();
    if (da < db) return TailLaw::geometric(0.0);
    if (da > db) return TailLaw::geometric(kInf);
    const double lead_a = a.coefficient(da);
    const double lead_b = num.coefficient(db);
    const double limit = lead_a / lead_b;
    if (std::abs(limit - 1.0) > kBoundaryTolerance) return TailLaw::geometric(limit);
    // ratio = 1 + (a_{d-1} - b_{d-1}) / (b_d k) + O(k^-2)
    const double s = (num.coefficient(db - 1) - a.coefficient(da - 1)) / lead_b;
    return TailLaw::power(s, true);
  }

  ChainFamily family_;
  Rule rule_;
  std::shared_ptr<ScaleTable> table_;
  std::optional<double> homogeneous_p_;
  std::optional<TailLaw> scale_tail_;
  std::string description_;
};

/// log delta_k = sum_{j=1..k} (log q_j - log p_j).
inline double log_delta(const ChainSpec& chain, StateIndex k) {
  return chain.scale_table().log_delta(k);
}

inline double delta(const ChainSpec& chain, StateIndex k) { return std::exp(log_delta(chain, k)); }

/// u_0 = 0, u_1 = 1, u_i = 1 + delta_1 + ... + delta_{i-1}; +inf when saturated.
inline double canonical_scale(const ChainSpec& chain, StateIndex i) {
  return chain.scale_table().canonical_scale(i);
}

/// log(u_hi - u_lo) = log sum_{k=lo..hi-1} delta_k, computed without
/// cancellation. Returns -inf for an empty range.
inline double log_scale_span(const ChainSpec& chain, StateIndex lo, StateIndex hi) {
  if (hi <= lo) return kNegInf;
  const ScaleTable& table = chain.scale_table();
  table.ensure(hi - 1);
  LogSum sum;
  for (StateIndex k = lo; k < hi; ++k) sum.add(table.log_delta(k));
  return sum.log_value();
}

struct ExitProbabilities {
  double right = 0.0;  // P_i{sigma_l > sigma_r}
  double left = 0.0;   // P_i{sigma_l < sigma_r}
};

/// Probabilities of leaving (l, r) through r or through l, starting at i.
inline ExitProbabilities exit_probabilities(const ChainSpec& chain, StateIndex l, StateIndex i,
                                            StateIndex r) {
  if (!(l < i && i < r)) {
    throw ArgumentError("exit_probabilities needs l < i < r (got l=" + std::to_string(l) +
                        ", i=" + std::to_string(i) + ", r=" + std::to_string(r) + ")");
  }
  const double total = log_scale_span(chain, l, r);
  return {std::exp(log_scale_span(chain, l, i) - total), std::exp(log_scale_span(chain, i, r) - total)};
}

enum class RecurrenceClass { Transient, Recurrent, Undetermined };

inline std::string_view to_string(RecurrenceClass c) {
  switch (c) {
    case RecurrenceClass::Transient: return "Transient";
    case RecurrenceClass::Recurrent: return "Recurrent";
    case RecurrenceClass::Undetermined: return "Undetermined";
  }
  return "?";
}

struct RecurrenceResult {
  RecurrenceClass cls = RecurrenceClass::Undetermined;
  std::optional<double> r;  // lim u_i when transient
  SeriesVerdict scale_sum;  // verdict on "sum delta_k converges"
};

/// Convergence of sum_k delta_k: closed form when a tail law is declared
/// (explicitly or by the chain family), otherwise the numeric policy over
/// `horizon` terms.
inline SeriesVerdict scale_series(const ChainSpec& chain, std::size_t horizon,
                                  const SeriesPolicy& policy = {},
                                  std::optional<TailLaw> declared = std::nullopt) {
  if (horizon < 2) throw ArgumentError("scale series horizon must be at least 2");
  const std::optional<TailLaw> tail = declared ? declared : chain.scale_tail();
  const ScaleTable& table = chain.scale_table();
  if (tail && policy.use_closed_forms) {
    const std::size_t n = std::min(horizon, policy.diagnostic_terms);
    table.ensure(n - 1);
    std::vector<double> terms(n);
    for (std::size_t k = 0; k < n; ++k) terms[k] = table.log_delta(k);
    return closed_form_verdict(decide_tail(*tail), terms);
  }
  table.ensure(horizon - 1);
  std::vector<double> terms(horizon);
  for (std::size_t k = 0; k < horizon; ++k) terms[k] = table.log_delta(k);
  return scan_series(terms, policy);
}

inline RecurrenceResult recurrence_class(const ChainSpec& chain, std::size_t horizon,
                                         const SeriesPolicy& policy = {},
                                         std::optional<TailLaw> declared = std::nullopt) {
  RecurrenceResult result;
  result.scale_sum = scale_series(chain, horizon, policy, declared);
  switch (result.scale_sum.status) {
    case SeriesStatus::Holds: {
      result.cls = RecurrenceClass::Transient;
      if (const auto p = chain.homogeneous_p(); p && result.scale_sum.method == SeriesMethod::ClosedForm) {
        result.r = *p / (2.0 * *p - 1.0);
      } else if (result.scale_sum.method == SeriesMethod::RatioPolicy) {
        result.r = result.scale_sum.partial_sum + result.scale_sum.tail_bound.value_or(0.0);
      } else {
        result.r = result.scale_sum.partial_sum;
        result.scale_sum.note = "r is a truncated partial sum";
      }
      break;
    }
    case SeriesStatus::Fails: result.cls = RecurrenceClass::Recurrent; break;
    case SeriesStatus::Undetermined: result.cls = RecurrenceClass::Undetermined; break;
  }
  return result;
}

}  // namespace ctrw
