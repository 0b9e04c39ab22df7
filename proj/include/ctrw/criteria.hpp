#pragma once

// Explosion and implosion criteria for birth-and-death random walks.
//
// With the scale delta_k and the speed measure
//   nu_0 = Phi_0,   nu_i = Phi_i (p_1 ... p_{i-1}) / (q_1 ... q_i),
// the walk explodes iff  sum_k (nu_0 + ... + nu_k) delta_k < inf, and
// implodes iff  sum_k (nu_{k+1} + nu_{k+2} + ...) delta_k < inf  together
// with  sum_k delta_k = inf.  Both series are evaluated with the order of
// summation swapped, which turns the inner sums into one-step recursions:
//
//   explosion:  sum_i Phi_i R_i / p_i,  R_i = 1 + (q_{i+1}/p_{i+1}) R_{i+1}
//   implosion:  sum_i Phi_i V_i / q_i,  V_1 = 1,  V_{i+1} = 1 + (p_i/q_i) V_i

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctrw/chain.hpp"
#include "ctrw/error.hpp"
#include "ctrw/log_math.hpp"
#include "ctrw/series.hpp"
#include "ctrw/waiting.hpp"

namespace ctrw {

/// log nu_i; nu_0 = Phi_0 and nu_i = Phi_i / (q_i delta_{i-1}).
inline double log_speed_measure(const ChainSpec& chain, const WaitingSpec& waiting, StateIndex i,
                                std::optional<double> lambda = std::nullopt) {
  const PhiValue v = phi(chain, waiting, i, lambda);
  if (i == 0) return std::log(v.big_phi);
  return std::log(v.big_phi) - std::log(chain.q(i)) - log_delta(chain, i - 1);
}

inline double speed_measure(const ChainSpec& chain, const WaitingSpec& waiting, StateIndex i,
                            std::optional<double> lambda = std::nullopt) {
  return std::exp(log_speed_measure(chain, waiting, i, lambda));
}

enum class ExplosionVerdict { Explodes, NonExplosive, Undetermined };
enum class ImplosionVerdict { Implodes, NonImploding, Undetermined };

inline std::string_view to_string(ExplosionVerdict v) {
  switch (v) {
    case ExplosionVerdict::Explodes: return "Explodes";
    case ExplosionVerdict::NonExplosive: return "NonExplosive";
    case ExplosionVerdict::Undetermined: return "Undetermined";
  }
  return "?";
}

inline std::string_view to_string(ImplosionVerdict v) {
  switch (v) {
    case ImplosionVerdict::Implodes: return "Implodes";
    case ImplosionVerdict::NonImploding: return "NonImploding";
    case ImplosionVerdict::Undetermined: return "Undetermined";
  }
  return "?";
}

namespace detail {

enum class Drift { Right, Balanced, Left };

/// Closed-form data: eventually geometric scale plus power-law Phi decay.
struct ClosedFormShape {
  Drift drift = Drift::Balanced;
  double limit_ratio = 1.0;  // lim delta_{k+1} / delta_k
  double decay = 0.0;        // Phi_i ~ C i^-decay
  bool exact = true;
};

inline std::optional<ClosedFormShape> closed_form_shape(const ChainSpec& chain, const WaitingSpec& waiting) {
  const auto& tail = chain.scale_tail();
  if (!tail) return std::nullopt;
  const bool balanced = std::abs(tail->limit_ratio - 1.0) <= kBoundaryTolerance;
  if (balanced && std::abs(tail->exponent) > kBoundaryTolerance) return std::nullopt;
  const auto sp = waiting.plus.decay_exponent();
  const auto sm = waiting.minus.decay_exponent();
  if (!sp || !sm) return std::nullopt;

  ClosedFormShape shape;
  shape.limit_ratio = tail->limit_ratio;
  shape.drift = balanced ? Drift::Balanced : (tail->limit_ratio < 1.0 ? Drift::Right : Drift::Left);
  shape.decay = std::min(*sp, *sm);
  const bool plus_dominates = *sp <= *sm + kBoundaryTolerance;
  const bool minus_dominates = *sm <= *sp + kBoundaryTolerance;
  shape.exact = (!plus_dominates || waiting.plus.exact_power_decay()) &&
                (!minus_dominates || waiting.minus.exact_power_decay());
  return shape;
}

inline double log_big_phi(const ChainSpec& chain, const WaitingSpec& waiting, StateIndex i, double lambda) {
  return std::log(phi(chain, waiting, i, lambda).big_phi);
}

/// Extends `cache` with log Phi_i up to index n - 1.
inline void extend_log_phi(std::vector<double>& cache, const ChainSpec& chain, const WaitingSpec& waiting,
                           std::size_t n, double lambda) {
  cache.reserve(n);
  for (std::size_t i = cache.size(); i < n; ++i) cache.push_back(log_big_phi(chain, waiting, i, lambda));
}

/// log of Phi_i R_i / p_i for i < n, where R is run backward from index m
/// with log R_m = log_tail.
inline std::vector<double> explosion_log_terms(const ChainSpec& chain, const std::vector<double>& log_phi,
                                               std::size_t n, std::size_t m, double log_tail) {
  std::vector<double> out(n);
  double log_r = log_tail;
  for (std::size_t i = m; i-- > 0;) {
    const Transition t = chain.at(i + 1);
    log_r = log_add_exp(0.0, std::log(t.q) - std::log(t.p) + log_r);
    if (i < n) out[i] = log_phi[i] + log_r - std::log(chain.p(i));
  }
  return out;
}

/// log of Phi_i V_i / q_i for i = 1 .. n (stored at index i - 1).
inline std::vector<double> implosion_log_terms(const ChainSpec& chain, const std::vector<double>& log_phi,
                                               std::size_t n) {
  std::vector<double> out(n);
  double log_v = 0.0;  // V_1 = 1
  for (std::size_t i = 1; i <= n; ++i) {
    const Transition t = chain.at(i);
    out[i - 1] = log_phi[i] + log_v - std::log(t.q);
    log_v = log_add_exp(0.0, log_v + std::log(t.p) - std::log(t.q));
  }
  return out;
}

inline bool phi_filter_fails(const ChainSpec& chain, const WaitingSpec& waiting, const SeriesPolicy& policy,
                             double lambda, double* value) {
  const double big_phi = phi(chain, waiting, policy.phi_check_index, lambda).big_phi;
  *value = big_phi;
  return big_phi > policy.phi_threshold;
}

inline SeriesVerdict necessary_condition_failure(double big_phi, const SeriesPolicy& policy) {
  SeriesVerdict v;
  v.status = SeriesStatus::Fails;
  v.method = SeriesMethod::NecessaryCondition;
  v.note = "Phi_" + std::to_string(policy.phi_check_index) + " = " + std::to_string(big_phi) +
           " exceeds " + std::to_string(policy.phi_threshold);
  return v;
}

inline constexpr std::size_t kInitialTerms = 4096;

}  // namespace detail

/// Convergence of the explosion series; Holds means the walk explodes.
inline SeriesVerdict explosion_series(const ChainSpec& chain, const WaitingSpec& waiting,
                                      const SeriesPolicy& policy = {},
                                      std::optional<double> lambda_override = std::nullopt) {
  const double lambda = lambda_override.value_or(waiting.lambda);
  std::vector<double> log_phi;

  if (policy.use_closed_forms) {
    if (const auto shape = detail::closed_form_shape(chain, waiting)) {
      const std::size_t n = std::max<std::size_t>(policy.diagnostic_terms, 1);
      detail::extend_log_phi(log_phi, chain, waiting, n, lambda);
      if (shape->drift != detail::Drift::Right) {
        auto v = closed_form_verdict(SeriesStatus::Fails, detail::explosion_log_terms(chain, log_phi, n, n, 0.0),
                                     "sum of delta_k diverges; partial sum uses truncated inner sums");
        v.method = SeriesMethod::ScaleDivergence;
        return v;
      }
      const double log_tail = -std::log1p(-shape->limit_ratio);
      const auto terms = detail::explosion_log_terms(chain, log_phi, n, 2 * n, log_tail);
      return closed_form_verdict(decide_tail(TailLaw::power(shape->decay, shape->exact)), terms,
                                 "terms ~ C i^-" + std::to_string(shape->decay));
    }
  }

  const SeriesVerdict scale = scale_series(chain, policy.max_terms, policy);
  if (scale.status != SeriesStatus::Holds) {
    SeriesVerdict v = scale;
    v.method = scale.status == SeriesStatus::Fails ? SeriesMethod::ScaleDivergence : SeriesMethod::Truncated;
    v.note = scale.status == SeriesStatus::Fails ? "sum of delta_k diverges" : "sum of delta_k undetermined";
    return v;
  }
  double phi_at_check = 0.0;
  if (detail::phi_filter_fails(chain, waiting, policy, lambda, &phi_at_check)) {
    return detail::necessary_condition_failure(phi_at_check, policy);
  }

  SeriesVerdict v;
  const std::size_t limit = std::max<std::size_t>(policy.max_terms, 2);
  for (std::size_t n = std::min(detail::kInitialTerms, limit);; n = std::min(2 * n, limit)) {
    const std::size_t m = 2 * n;
    double log_tail = 0.0;
    if (const auto& tail = chain.scale_tail(); tail && tail->limit_ratio < 1.0 - kBoundaryTolerance) {
      log_tail = -std::log1p(-tail->limit_ratio);
    } else {
      const double rho = std::exp(log_delta(chain, m + 1) - log_delta(chain, m));
      if (rho < 1.0) log_tail = -std::log1p(-rho);
    }
    detail::extend_log_phi(log_phi, chain, waiting, n, lambda);
    v = scan_series(detail::explosion_log_terms(chain, log_phi, n, m, log_tail), policy);
    if (v.status != SeriesStatus::Undetermined || n >= limit) break;
  }
  return v;
}

/// Convergence of the implosion series (without the recurrence clause).
inline SeriesVerdict implosion_series(const ChainSpec& chain, const WaitingSpec& waiting,
                                      const SeriesPolicy& policy = {},
                                      std::optional<double> lambda_override = std::nullopt) {
  const double lambda = lambda_override.value_or(waiting.lambda);
  std::vector<double> log_phi;

  if (policy.use_closed_forms) {
    if (const auto shape = detail::closed_form_shape(chain, waiting)) {
      const std::size_t n = std::max<std::size_t>(policy.diagnostic_terms, 1);
      detail::extend_log_phi(log_phi, chain, waiting, n + 1, lambda);
      const auto terms = detail::implosion_log_terms(chain, log_phi, n);
      switch (shape->drift) {
        case detail::Drift::Right:
          return closed_form_verdict(SeriesStatus::Fails, terms, "inner sums grow geometrically");
        case detail::Drift::Left:
          return closed_form_verdict(decide_tail(TailLaw::power(shape->decay, shape->exact)), terms,
                                     "terms ~ C i^-" + std::to_string(shape->decay));
        case detail::Drift::Balanced:
          return closed_form_verdict(decide_tail(TailLaw::power(shape->decay - 1.0, shape->exact)), terms,
                                     "terms ~ C i^-" + std::to_string(shape->decay - 1.0));
      }
    }
  }

  double phi_at_check = 0.0;
  if (detail::phi_filter_fails(chain, waiting, policy, lambda, &phi_at_check)) {
    return detail::necessary_condition_failure(phi_at_check, policy);
  }

  SeriesVerdict v;
  const std::size_t limit = std::max<std::size_t>(policy.max_terms, 2);
  for (std::size_t n = std::min(detail::kInitialTerms, limit);; n = std::min(2 * n, limit)) {
    detail::extend_log_phi(log_phi, chain, waiting, n + 1, lambda);
    v = scan_series(detail::implosion_log_terms(chain, log_phi, n), policy);
    if (v.status != SeriesStatus::Undetermined || n >= limit) break;
  }
  return v;
}

/// Combined verdicts for both questions.
struct Classification {
  SeriesVerdict explosion;
  SeriesVerdict implosion_series;
  SeriesVerdict scale_divergence;  // Holds when sum delta_k = inf
  ExplosionVerdict explosion_verdict = ExplosionVerdict::Undetermined;
  ImplosionVerdict implosion_verdict = ImplosionVerdict::Undetermined;
  double lambda = 1.0;

  bool determinate() const {
    return explosion_verdict != ExplosionVerdict::Undetermined &&
           implosion_verdict != ImplosionVerdict::Undetermined;
  }
};

inline Classification classify(const ChainSpec& chain, const WaitingSpec& waiting, const SeriesPolicy& policy = {},
                               std::optional<double> lambda_override = std::nullopt) {
  Classification c;
  c.lambda = lambda_override.value_or(waiting.lambda);
  c.explosion = explosion_series(chain, waiting, policy, c.lambda);
  c.implosion_series = implosion_series(chain, waiting, policy, c.lambda);
  c.scale_divergence = negate(scale_series(chain, policy.max_terms, policy));

  switch (c.explosion.status) {
    case SeriesStatus::Holds: c.explosion_verdict = ExplosionVerdict::Explodes; break;
    case SeriesStatus::Fails: c.explosion_verdict = ExplosionVerdict::NonExplosive; break;
    case SeriesStatus::Undetermined: c.explosion_verdict = ExplosionVerdict::Undetermined; break;
  }
  if (c.implosion_series.status == SeriesStatus::Holds && c.scale_divergence.status == SeriesStatus::Holds) {
    c.implosion_verdict = ImplosionVerdict::Implodes;
  } else if (c.implosion_series.status == SeriesStatus::Fails ||
             c.scale_divergence.status == SeriesStatus::Fails) {
    c.implosion_verdict = ImplosionVerdict::NonImploding;
  }
  if (c.explosion_verdict == ExplosionVerdict::Explodes && c.implosion_verdict == ImplosionVerdict::Implodes) {
    throw InvariantViolation("classification reports both explosion and implosion");
  }
  return c;
}

/// Exact verdicts for a homogeneous chain with exponential waits of rate
/// a_i = coef (i+1)^beta on both sides.
struct MarkovClosedForm {
  ExplosionVerdict explosion = ExplosionVerdict::Undetermined;
  ImplosionVerdict implosion = ImplosionVerdict::Undetermined;
  double beta = 0.0;
};

/// Returns nullopt (not applicable) unless the chain is homogeneous and the
/// rate rule is a declared power law.
inline std::optional<MarkovClosedForm> closed_form_markov(const ChainSpec& chain, const ScaleRule& rates) {
  const auto p = chain.homogeneous_p();
  const auto beta = rates.power();
  if (!p || !beta) return std::nullopt;
  MarkovClosedForm out;
  out.beta = *beta;
  const double q = 1.0 - *p;
  const bool right = *p > q + kBoundaryTolerance;
  const bool balanced = std::abs(*p - q) <= kBoundaryTolerance;
  // sum 1/a_i < inf iff beta > 1; sum i/a_i < inf iff beta > 2.
  const bool rates_summable = *beta > 1.0 + kBoundaryTolerance;
  const bool weighted_summable = *beta > 2.0 + kBoundaryTolerance;
  out.explosion = (right && rates_summable) ? ExplosionVerdict::Explodes : ExplosionVerdict::NonExplosive;
  if (right) {
    out.implosion = ImplosionVerdict::NonImploding;
  } else if (balanced) {
    out.implosion = weighted_summable ? ImplosionVerdict::Implodes : ImplosionVerdict::NonImploding;
  } else {
    out.implosion = rates_summable ? ImplosionVerdict::Implodes : ImplosionVerdict::NonImploding;
  }
  return out;
}

/// Finite truncations of both series, summed in the original (double-sum)
/// order and in the swapped order over the same triangular index set.
struct TruncatedSums {
  double original = 0.0;
  double reordered = 0.0;
  double log_original = kNegInf;  // the sums can exceed the double range
  double log_reordered = kNegInf;
};

/// sum_{k=0..n} (sum_{i=0..k} nu_i) delta_k  versus
/// sum_{i=0..n} Phi_i sum_{k=i..n} (q_{i+1}...q_k) / (p_i...p_k).
inline TruncatedSums explosion_truncated_sums(const ChainSpec& chain, const WaitingSpec& waiting, std::size_t n,
                                              std::optional<double> lambda = std::nullopt) {
  const double lam = lambda.value_or(waiting.lambda);
  TruncatedSums out;
  LogSum original;
  double log_nu_prefix = kNegInf;
  for (std::size_t k = 0; k <= n; ++k) {
    log_nu_prefix = log_add_exp(log_nu_prefix, log_speed_measure(chain, waiting, k, lam));
    original.add(log_nu_prefix + log_delta(chain, k));
  }
  out.log_original = original.log_value();
  out.original = std::exp(out.log_original);

  LogSum reordered;
  double log_inner = 0.0;  // log sum_{k=i..n} prod_{j=i+1..k} q_j/p_j
  for (std::size_t i = n + 1; i-- > 0;) {
    if (i < n) {
      const Transition t = chain.at(i + 1);
      log_inner = log_add_exp(0.0, std::log(t.q / t.p) + log_inner);
    }
    reordered.add(std::log(phi(chain, waiting, i, lam).big_phi) + log_inner - std::log(chain.p(i)));
  }
  out.log_reordered = reordered.log_value();
  out.reordered = std::exp(out.log_reordered);
  return out;
}

/// sum_{k=0..n-1} (sum_{i=k+1..n} nu_i) delta_k  versus
/// sum_{i=1..n} Phi_i sum_{k=0..i-1} (p_{k+1}...p_{i-1}) / (q_{k+1}...q_i).
inline TruncatedSums implosion_truncated_sums(const ChainSpec& chain, const WaitingSpec& waiting, std::size_t n,
                                              std::optional<double> lambda = std::nullopt) {
  const double lam = lambda.value_or(waiting.lambda);
  TruncatedSums out;
  LogSum original;
  double log_nu_suffix = kNegInf;  // log sum_{i=k+1..n} nu_i
  for (std::size_t k = n; k-- > 0;) {
    log_nu_suffix = log_add_exp(log_nu_suffix, log_speed_measure(chain, waiting, k + 1, lam));
    original.add(log_nu_suffix + log_delta(chain, k));
  }
  out.log_original = original.log_value();
  out.original = std::exp(out.log_original);

  LogSum reordered;
  double log_v = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const Transition t = chain.at(i);
    reordered.add(std::log(phi(chain, waiting, i, lam).big_phi) + log_v - std::log(t.q));
    log_v = log_add_exp(0.0, log_v + std::log(t.p / t.q));
  }
  out.log_reordered = reordered.log_value();
  out.reordered = std::exp(out.log_reordered);
  return out;
}

}  // namespace ctrw
