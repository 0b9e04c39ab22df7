#pragma once

// Monte Carlo simulation of the continuous-time random walk.
//
// From state i the embedded chain moves right with probability p_i; the time
// spent at i before that move is drawn from tau_i^+ (or tau_i^- for a left
// move). Replicas run on independent counter-based streams keyed by
// (seed, replica, role), and results are collected by replica index, so
// output does not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ctrw/chain.hpp"
#include "ctrw/error.hpp"
#include "ctrw/rng.hpp"
#include "ctrw/waiting.hpp"

namespace ctrw {

enum class CensorCause { None, LevelCap, TimeCap, StepCap };

inline std::string_view to_string(CensorCause c) {
  switch (c) {
    case CensorCause::None: return "none";
    case CensorCause::LevelCap: return "level_cap";
    case CensorCause::TimeCap: return "time_cap";
    case CensorCause::StepCap: return "step_cap";
  }
  return "?";
}

enum class StopMode { AllTargets, AnyTarget };

inline constexpr std::uint64_t kDefaultStepCap = 100000000;

struct StopRule {
  std::vector<StateIndex> targets;
  std::optional<StateIndex> level_cap;  // states above this censor the run
  std::optional<double> time_cap;
  std::uint64_t step_cap = kDefaultStepCap;
  StopMode mode = StopMode::AllTargets;
  bool record_path = false;
};

struct Trajectory {
  std::vector<StateIndex> states;
  std::vector<double> jump_times;
  CensorCause censored = CensorCause::None;
};

/// First-passage record of one replica. sigma[k] is the hitting time of
/// targets[k], or nullopt when the run was censored first.
struct HittingSample {
  std::vector<std::optional<double>> sigma;
  std::optional<std::size_t> first_target;  // index of the first target reached
  CensorCause censor = CensorCause::None;
  std::uint64_t steps = 0;
  double final_time = 0.0;
  StateIndex final_state = 0;
};

struct SimulationResult {
  Trajectory path;  // populated only with StopRule::record_path
  HittingSample hits;
};

/// Per-worker memo of transition probabilities and waiting-time scales.
/// States past kLimit are evaluated on demand so runaway transient paths do
/// not grow the memo without bound.
class WalkCache {
 public:
  static constexpr StateIndex kLimit = StateIndex{1} << 20;

  WalkCache(const ChainSpec& chain, const WaitingSpec& waiting) : chain_(&chain), waiting_(&waiting) {}

  Transition transition(StateIndex i) {
    if (i >= kLimit) return chain_->at(i);
    grow(i);
    return trans_[i];
  }
  double scale_plus(StateIndex i) {
    if (i >= kLimit) return waiting_->plus.scale_at(i);
    grow(i);
    return plus_[i];
  }
  double scale_minus(StateIndex i) {
    if (i >= kLimit) return waiting_->minus.scale_at(i);
    grow(i);
    return minus_[i];
  }

  const ChainSpec& chain() const { return *chain_; }
  const WaitingSpec& waiting() const { return *waiting_; }

 private:
  void grow(StateIndex i) {
    while (trans_.size() <= i) {
      const StateIndex k = trans_.size();
      trans_.push_back(chain_->at(k));
      plus_.push_back(waiting_->plus.scale_at(k));
      minus_.push_back(k == 0 ? plus_.back() : waiting_->minus.scale_at(k));
    }
  }

  const ChainSpec* chain_;
  const WaitingSpec* waiting_;
  std::vector<Transition> trans_;
  std::vector<double> plus_;
  std::vector<double> minus_;
};

inline SimulationResult simulate(WalkCache& cache, StateIndex start, const StopRule& stop, RandomStream& rng) {
  if (stop.targets.empty() && !stop.level_cap && !stop.time_cap) {
    throw ArgumentError("simulation needs a target, a level cap or a time cap");
  }
  SimulationResult out;
  HittingSample& h = out.hits;
  h.sigma.assign(stop.targets.size(), std::nullopt);
  std::size_t pending = stop.targets.size();
  const WaitingSpec& waiting = cache.waiting();

  StateIndex x = start;
  double t = 0.0;
  auto mark = [&](StateIndex state, double time) {
    for (std::size_t k = 0; k < stop.targets.size(); ++k) {
      if (stop.targets[k] == state && !h.sigma[k]) {
        h.sigma[k] = time;
        --pending;
        if (!h.first_target) h.first_target = k;
      }
    }
  };
  auto done = [&] {
    if (stop.targets.empty()) return false;
    return stop.mode == StopMode::AnyTarget ? h.first_target.has_value() : pending == 0;
  };

  if (stop.record_path) {
    out.path.states.push_back(x);
    out.path.jump_times.push_back(0.0);
  }
  mark(x, 0.0);

  while (!done()) {
    if (h.steps >= stop.step_cap) {
      h.censor = CensorCause::StepCap;
      break;
    }
    const Transition tr = cache.transition(x);
    const bool right = rng.uniform() < tr.p;
    const double tau = right ? waiting.plus.sample_at_scale(cache.scale_plus(x), rng)
                             : waiting.minus.sample_at_scale(cache.scale_minus(x), rng);
    if (!(tau > 0.0) || !std::isfinite(tau)) {
      throw SamplingError("waiting-time sampler returned " + std::to_string(tau) + " at state " + std::to_string(x));
    }
    const double t_next = t + tau;
    if (stop.time_cap && t_next > *stop.time_cap) {
      h.censor = CensorCause::TimeCap;
      t = *stop.time_cap;
      break;
    }
    const StateIndex y = right ? x + 1 : x - 1;
    if (stop.level_cap && y > *stop.level_cap) {
      h.censor = CensorCause::LevelCap;
      t = t_next;
      ++h.steps;
      break;
    }
    t = t_next;
    x = y;
    ++h.steps;
    if (stop.record_path) {
      out.path.states.push_back(x);
      out.path.jump_times.push_back(t);
    }
    mark(x, t);
  }
  h.final_time = t;
  h.final_state = x;
  out.path.censored = h.censor;
  return out;
}

inline SimulationResult simulate(const ChainSpec& chain, const WaitingSpec& waiting, StateIndex start,
                                 const StopRule& stop, RandomStream& rng) {
  WalkCache cache(chain, waiting);
  return simulate(cache, start, stop, rng);
}

/// Runs fn(index, worker) for index in [0, count) on `threads` workers. The
/// first exception thrown by any task is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::atomic<bool> failed{false};
  auto worker = [&](unsigned id) {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count || failed.load()) return;
      try {
        fn(k, id);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned id = 0; id < threads; ++id) pool.emplace_back(worker, id);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

inline unsigned resolve_threads(unsigned threads) {
  return threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
}

// ---------------------------------------------------------------------------
// Statistics helpers

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

inline MeanEstimate mean_estimate(std::span<const double> xs) {
  MeanEstimate e;
  double m = 0.0;
  double s = 0.0;
  for (double x : xs) {
    ++e.count;
    const double d = x - m;
    m += d / static_cast<double>(e.count);
    s += d * (x - m);
  }
  e.mean = m;
  if (e.count > 1) e.std_error = std::sqrt(s / static_cast<double>(e.count - 1) / static_cast<double>(e.count));
  return e;
}

/// Median (mean of the two middle values for even sizes); NaN when empty.
inline double median(std::vector<double> xs) {
  if (xs.empty()) return std::nan("");
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
  const double hi = xs[mid];
  if (xs.size() % 2 == 1) return hi;
  const double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

/// Two-sided p-value of the Mann-Whitney rank-sum test (normal approximation
/// with tie correction).
inline double mann_whitney_p_value(std::span<const double> a, std::span<const double> b) {
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  if (n1 == 0 || n2 == 0) throw ArgumentError("rank test needs two non-empty samples");
  std::vector<std::pair<double, int>> all;
  all.reserve(n1 + n2);
  for (double x : a) all.emplace_back(x, 0);
  for (double x : b) all.emplace_back(x, 1);
  std::sort(all.begin(), all.end(), [](const auto& u, const auto& v) { return u.first < v.first; });
  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second == 0) rank_sum_a += avg_rank;
    }
    i = j;
  }
  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  const double n = dn1 + dn2;
  const double u = rank_sum_a - dn1 * (dn1 + 1.0) / 2.0;
  const double mu = dn1 * dn2 / 2.0;
  const double var = dn1 * dn2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) return 1.0;
  const double z = (u - mu) / std::sqrt(var);
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

// ---------------------------------------------------------------------------
// Probes

struct ProbeOptions {
  std::size_t replicas = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
  std::uint64_t step_cap = kDefaultStepCap;
  std::optional<double> time_cap;
  std::optional<StateIndex> level_cap;
};

/// Per-replica stream roles.
inline constexpr std::uint32_t kRoleHitting = 0;
inline constexpr std::uint32_t kRoleExplosion = 1;
inline constexpr std::uint32_t kRoleExit = 2;
inline constexpr std::uint32_t kRolePassageBase = 16;  // theta_k uses kRolePassageBase + k

struct HittingEstimate {
  StateIndex start = 0;
  StateIndex target = 0;
  double lambda = 1.0;
  MeanEstimate transform;  // mean of exp(-lambda sigma) over uncensored replicas
  std::size_t replicas = 0;
  std::size_t censored = 0;
  std::vector<std::optional<double>> sigma;  // per replica
};

/// Estimates E_start exp(-lambda sigma_target).
inline HittingEstimate hitting_probe(const ChainSpec& chain, const WaitingSpec& waiting, StateIndex start,
                                     StateIndex target, const ProbeOptions& opt,
                                     std::optional<double> lambda_override = std::nullopt) {
  HittingEstimate out;
  out.start = start;
  out.target = target;
  out.lambda = lambda_override.value_or(waiting.lambda);
  out.replicas = opt.replicas;
  out.sigma.assign(opt.replicas, std::nullopt);
  StopRule stop;
  stop.targets = {target};
  stop.step_cap = opt.step_cap;
  stop.time_cap = opt.time_cap;
  stop.level_cap = opt.level_cap;
  const unsigned threads = resolve_threads(opt.threads);
  std::vector<WalkCache> caches(threads, WalkCache(chain, waiting));
  parallel_for(opt.replicas, threads, [&](std::size_t r, unsigned worker) {
    RandomStream rng(opt.seed, r, kRoleHitting);
    out.sigma[r] = simulate(caches[worker], start, stop, rng).hits.sigma[0];
  });
  std::vector<double> values;
  values.reserve(opt.replicas);
  for (const auto& s : out.sigma) {
    if (s) {
      values.push_back(std::exp(-out.lambda * *s));
    } else {
      ++out.censored;
    }
  }
  out.transform = mean_estimate(values);
  return out;
}

struct LevelSummary {
  StateIndex level = 0;
  std::size_t reached = 0;
  double median_sigma = std::nan("");  // over replicas that reached the level
};

struct ExplosionProbe {
  std::vector<LevelSummary> levels;
  std::vector<double> median_increments;  // sigma_{N_{k+1}} - sigma_{N_k}, replicas reaching both
  double fraction_top = 0.0;
  bool stabilizing = false;  // median increments strictly shrinking
  std::size_t replicas = 0;
  std::size_t censored = 0;
  std::vector<std::vector<std::optional<double>>> sigma;  // [replica][level]
};

/// Hitting times of an increasing level grid; requires a time cap or a
/// level cap on top of the grid.
inline ExplosionProbe explosion_probe(const ChainSpec& chain, const WaitingSpec& waiting, StateIndex start,
                                      std::vector<StateIndex> grid, const ProbeOptions& opt) {
  if (grid.empty()) throw ArgumentError("explosion probe needs a non-empty level grid");
  if (!std::is_sorted(grid.begin(), grid.end()) || std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
    throw ArgumentError("explosion probe level grid must be strictly increasing");
  }
  if (!opt.time_cap) throw ArgumentError("explosion probe needs a time cap");
  ExplosionProbe out;
  out.replicas = opt.replicas;
  out.sigma.assign(opt.replicas, {});
  StopRule stop;
  stop.targets = grid;
  stop.step_cap = opt.step_cap;
  stop.time_cap = opt.time_cap;
  stop.level_cap = opt.level_cap;
  const unsigned threads = resolve_threads(opt.threads);
  std::vector<WalkCache> caches(threads, WalkCache(chain, waiting));
  std::vector<CensorCause> causes(opt.replicas);
  parallel_for(opt.replicas, threads, [&](std::size_t r, unsigned worker) {
    RandomStream rng(opt.seed, r, kRoleExplosion);
    auto res = simulate(caches[worker], start, stop, rng);
    out.sigma[r] = std::move(res.hits.sigma);
    causes[r] = res.hits.censor;
  });
  for (CensorCause c : causes) out.censored += (c != CensorCause::None);

  for (std::size_t k = 0; k < grid.size(); ++k) {
    LevelSummary s;
    s.level = grid[k];
    std::vector<double> xs;
    for (const auto& row : out.sigma) {
      if (row[k]) xs.push_back(*row[k]);
    }
    s.reached = xs.size();
    s.median_sigma = median(std::move(xs));
    out.levels.push_back(s);
  }
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    std::vector<double> inc;
    for (const auto& row : out.sigma) {
      if (row[k] && row[k + 1]) inc.push_back(*row[k + 1] - *row[k]);
    }
    out.median_increments.push_back(median(std::move(inc)));
  }
  out.fraction_top = opt.replicas ? static_cast<double>(out.levels.back().reached) / static_cast<double>(opt.replicas)
                                  : 0.0;
  out.stabilizing = out.median_increments.size() >= 2;
  for (std::size_t k = 0; k + 1 < out.median_increments.size(); ++k) {
    if (!(out.median_increments[k + 1] < out.median_increments[k])) out.stabilizing = false;
  }
  return out;
}

struct RhoSummary {
  StateIndex m = 0;
  double median_lower = std::nan("");  // censored passages counted at their elapsed time
  double median_upper = std::nan("");  // censored replicas counted as +infinity
  std::size_t censored = 0;            // replicas with a censored passage among theta_1..theta_m
};

struct ImplosionProbe {
  std::vector<RhoSummary> grid;
  std::size_t replicas = 0;
  std::size_t censored_passages = 0;
  std::optional<std::string> warning;
  std::vector<std::vector<double>> theta;          // [replica][k - 1], lower bound when censored
  std::vector<std::vector<bool>> theta_censored;  // [replica][k - 1]
};

/// Downward passage time theta_k: start at k, stop at k - 1.
inline HittingSample downward_passage(WalkCache& cache, StateIndex k, const ProbeOptions& opt, RandomStream& rng) {
  StopRule stop;
  stop.targets = {k - 1};
  stop.step_cap = opt.step_cap;
  stop.time_cap = opt.time_cap;
  stop.level_cap = opt.level_cap;
  return simulate(cache, k, stop, rng).hits;
}

/// Upward passage time eta_k: start at k - 1, stop at k.
inline HittingSample upward_passage(WalkCache& cache, StateIndex k, const ProbeOptions& opt, RandomStream& rng) {
  StopRule stop;
  stop.targets = {k};
  stop.step_cap = opt.step_cap;
  stop.time_cap = opt.time_cap;
  stop.level_cap = opt.level_cap;
  return simulate(cache, k - 1, stop, rng).hits;
}

/// Independent downward passages theta_1 .. theta_m per replica, combined
/// into rho^(g) = theta_1 + ... + theta_g for each g in `grid` (default
/// {m/4, m/2, m}). theta_k uses stream role kRolePassageBase + k.
inline ImplosionProbe implosion_probe(const ChainSpec& chain, const WaitingSpec& waiting, StateIndex m,
                                      const ProbeOptions& opt, std::vector<StateIndex> grid = {},
                                      const SeriesPolicy& policy = {}) {
  if (m < 1) throw ArgumentError("implosion probe needs m >= 1");
  if (grid.empty()) {
    for (StateIndex g : {m / 4, m / 2, m}) {
      if (g >= 1 && (grid.empty() || grid.back() < g)) grid.push_back(g);
    }
  }
  if (!std::is_sorted(grid.begin(), grid.end()) || grid.back() > m || grid.front() < 1) {
    throw ArgumentError("implosion grid must be increasing within [1, m]");
  }
  ImplosionProbe out;
  out.replicas = opt.replicas;
  if (recurrence_class(chain, policy.max_terms, policy).cls == RecurrenceClass::Transient) {
    out.warning = "chain is transient: downward passages may never finish; results are diagnostic only";
  }
  out.theta.assign(opt.replicas, std::vector<double>(m));
  out.theta_censored.assign(opt.replicas, std::vector<bool>(m, false));
  const unsigned threads = resolve_threads(opt.threads);
  std::vector<WalkCache> caches(threads, WalkCache(chain, waiting));
  parallel_for(opt.replicas, threads, [&](std::size_t r, unsigned worker) {
    for (StateIndex k = 1; k <= m; ++k) {
      RandomStream rng(opt.seed, r, kRolePassageBase + static_cast<std::uint32_t>(k));
      const HittingSample h = downward_passage(caches[worker], k, opt, rng);
      out.theta[r][k - 1] = h.sigma[0] ? *h.sigma[0] : h.final_time;
      out.theta_censored[r][k - 1] = !h.sigma[0];
    }
  });
  for (const auto& row : out.theta_censored) {
    out.censored_passages += static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
  }
  for (StateIndex g : grid) {
    RhoSummary s;
    s.m = g;
    std::vector<double> lower;
    std::vector<double> upper;
    for (std::size_t r = 0; r < opt.replicas; ++r) {
      double rho = 0.0;
      bool censored = false;
      for (StateIndex k = 1; k <= g; ++k) {
        rho += out.theta[r][k - 1];
        censored = censored || out.theta_censored[r][k - 1];
      }
      lower.push_back(rho);
      upper.push_back(censored ? kInf : rho);
      s.censored += censored;
    }
    s.median_lower = median(std::move(lower));
    s.median_upper = median(std::move(upper));
    out.grid.push_back(s);
  }
  if (out.censored_passages > 0 && !out.warning) {
    out.warning = std::to_string(out.censored_passages) + " passages censored; medians are bracketed";
  }
  return out;
}

struct ExitEstimate {
  double right = 0.0;  // frequency of leaving through r
  double left = 0.0;
  double std_error = 0.0;
  std::size_t replicas = 0;
  std::size_t censored = 0;
};

/// Embedded-chain exit frequencies from (l, r) started at i; no clocks.
/// `sides_out`, when given, receives +1 (right), -1 (left) or 0 (censored) per replica.
inline ExitEstimate embedded_exit_mc(const ChainSpec& chain, StateIndex l, StateIndex i, StateIndex r,
                                     const ProbeOptions& opt, std::vector<signed char>* sides_out = nullptr) {
  if (!(l < i && i < r)) throw ArgumentError("embedded_exit_mc needs l < i < r");
  const unsigned threads = resolve_threads(opt.threads);
  std::vector<signed char> side(opt.replicas, 0);
  std::vector<double> p(r + 1);
  for (StateIndex k = l; k <= r; ++k) p[k] = chain.at(k).p;
  parallel_for(opt.replicas, threads, [&](std::size_t rep, unsigned) {
    RandomStream rng(opt.seed, rep, kRoleExit);
    StateIndex x = i;
    for (std::uint64_t step = 0; step < opt.step_cap; ++step) {
      x = (rng.uniform() < p[x]) ? x + 1 : x - 1;
      if (x == r) {
        side[rep] = 1;
        return;
      }
      if (x == l) {
        side[rep] = -1;
        return;
      }
    }
  });
  ExitEstimate out;
  out.replicas = opt.replicas;
  std::size_t right = 0;
  std::size_t left = 0;
  for (signed char s : side) {
    right += (s == 1);
    left += (s == -1);
  }
  out.censored = opt.replicas - right - left;
  const double n = static_cast<double>(right + left);
  if (n > 0) {
    out.right = static_cast<double>(right) / n;
    out.left = static_cast<double>(left) / n;
    out.std_error = std::sqrt(out.right * (1.0 - out.right) / n);
  }
  if (sides_out) *sides_out = std::move(side);
  return out;
}

}  // namespace ctrw
