#pragma once

// Per-state waiting-time laws tau_i^+ (before a right jump) and tau_i^-
// (before a left jump). Every law is written as tau_i = tau / a_i with a base
// variable tau and a scale rule a_i, and exposes both its Laplace transform
// phi(lambda) = E exp(-lambda tau_i) and the complement 1 - phi, the latter
// evaluated directly so that small values keep their relative precision.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "ctrw/chain.hpp"
#include "ctrw/error.hpp"
#include "ctrw/expression.hpp"
#include "ctrw/rng.hpp"

namespace ctrw {

/// Absolute tolerance of the quadrature fallback for transforms.
inline constexpr double kQuadratureTolerance = 1e-10;

/// Scale a_i as a function of the state index. A declared power law
/// a_i = coef * (i + 1)^beta enables closed-form criteria.
class ScaleRule {
 public:
  ScaleRule() = default;

  static ScaleRule constant(double a) { return power_law(0.0, a); }

  static ScaleRule power_law(double beta, double coef = 1.0) {
    if (!(coef > 0.0) || !std::isfinite(beta)) {
      throw ValidationError("power-law scale needs coef > 0 and finite exponent");
    }
    ScaleRule r;
    r.power_ = beta;
    r.fn_ = [beta, coef](StateIndex i) { return coef * std::pow(static_cast<double>(i) + 1.0, beta); };
    std::ostringstream os;
    os << coef << "*(i+1)^" << beta;
    r.source_ = os.str();
    return r;
  }

  static ScaleRule expression(Expression e) {
    ScaleRule r;
    auto expr = std::make_shared<const Expression>(std::move(e));
    r.fn_ = [expr](StateIndex i) { return (*expr)(static_cast<double>(i)); };
    r.power_.reset();
    r.source_ = expr->source();
    return r;
  }

  static ScaleRule function(std::function<double(StateIndex)> fn, std::string source = "custom") {
    ScaleRule r;
    r.fn_ = std::move(fn);
    r.power_.reset();
    r.source_ = std::move(source);
    return r;
  }

  double operator()(StateIndex i) const {
    const double a = fn_(i);
    if (!(a > 0.0) || !std::isfinite(a)) {
      std::ostringstream os;
      os << "scale rule '" << source_ << "' gives invalid a_" << i << " = " << a;
      throw ValidationError(os.str());
    }
    return a;
  }

  /// Exponent beta when declared as coef * (i+1)^beta.
  std::optional<double> power() const { return power_; }
  const std::string& source() const { return source_; }

 private:
  std::function<double(StateIndex)> fn_ = [](StateIndex) { return 1.0; };
  std::optional<double> power_ = 0.0;
  std::string source_ = "1";
};

/// Base variable of a ScaledBase law (finite mean).
class BaseLaw {
 public:
  enum class Kind { Exponential, Gamma, Uniform, LogNormal, Weibull };

  static BaseLaw exponential(double mean) {
    require(mean > 0.0, "exponential base needs mean > 0");
    return BaseLaw(Kind::Exponential, mean, 0.0);
  }
  static BaseLaw gamma(double shape, double scale) {
    require(shape > 0.0 && scale > 0.0, "gamma base needs shape > 0 and scale > 0");
    return BaseLaw(Kind::Gamma, shape, scale);
  }
  static BaseLaw uniform(double low, double high) {
    require(low >= 0.0 && high > low, "uniform base needs 0 <= low < high");
    return BaseLaw(Kind::Uniform, low, high);
  }
  static BaseLaw lognormal(double mu, double sigma) {
    require(sigma > 0.0 && std::isfinite(mu), "lognormal base needs sigma > 0");
    return BaseLaw(Kind::LogNormal, mu, sigma);
  }
  static BaseLaw weibull(double shape, double scale) {
    require(shape > 0.0 && scale > 0.0, "weibull base needs shape > 0 and scale > 0");
    return BaseLaw(Kind::Weibull, shape, scale);
  }

  Kind kind() const { return kind_; }

  double mean() const {
    switch (kind_) {
      case Kind::Exponential: return a_;
      case Kind::Gamma: return a_ * b_;
      case Kind::Uniform: return 0.5 * (a_ + b_);
      case Kind::LogNormal: return std::exp(a_ + 0.5 * b_ * b_);
      case Kind::Weibull: return b_ * std::tgamma(1.0 + 1.0 / a_);
    }
    return 0.0;
  }

  /// P(tau > x).
  double survival(double x) const {
    if (x <= 0.0) return 1.0;
    switch (kind_) {
      case Kind::Exponential: return std::exp(-x / a_);
      case Kind::Gamma: return boost::math::gamma_q(a_, x / b_);
      case Kind::Uniform: return x <= a_ ? 1.0 : (x >= b_ ? 0.0 : (b_ - x) / (b_ - a_));
      case Kind::LogNormal: return 0.5 * std::erfc((std::log(x) - a_) / (b_ * std::sqrt(2.0)));
      case Kind::Weibull: return std::exp(-std::pow(x / b_, a_));
    }
    return 0.0;
  }

  /// Points where the survival function is not smooth.
  std::vector<double> kinks() const {
    if (kind_ != Kind::Uniform) return {};
    if (a_ > 0.0) return {a_, b_};
    return {b_};
  }

  /// 1 - E exp(-s tau); nullopt when no closed form is available.
  std::optional<double> closed_complement(double s) const {
    switch (kind_) {
      case Kind::Exponential: return s * a_ / (1.0 + s * a_);
      case Kind::Gamma: return -std::expm1(-a_ * std::log1p(b_ * s));
      case Kind::Uniform: {
        const double w = b_ - a_;
        const double x = s * w;
        // phi = exp(-s low) (1 - exp(-s w)) / (s w)
        const double shape = (x < 1e-8) ? 1.0 - 0.5 * x : -std::expm1(-x) / x;
        return -std::expm1(-s * a_ + std::log(shape));
      }
      case Kind::LogNormal:
      case Kind::Weibull: return std::nullopt;
    }
    return std::nullopt;
  }

  /// log E exp(-s tau); nullopt when no closed form is available.
  std::optional<double> closed_log_transform(double s) const {
    switch (kind_) {
      case Kind::Exponential: return -std::log1p(s * a_);
      case Kind::Gamma: return -a_ * std::log1p(b_ * s);
      case Kind::Uniform: {
        const double x = s * (b_ - a_);
        const double shape = (x < 1e-8) ? 1.0 - 0.5 * x : -std::expm1(-x) / x;
        return -s * a_ + std::log(shape);
      }
      case Kind::LogNormal:
      case Kind::Weibull: return std::nullopt;
    }
    return std::nullopt;
  }

  template <class Urbg>
  double sample(Urbg& rng) const {
    switch (kind_) {
      case Kind::Exponential: return a_ * rng.exponential();
      case Kind::Gamma: return std::gamma_distribution<double>(a_, b_)(rng);
      case Kind::Uniform: return a_ + (b_ - a_) * rng.uniform_open();
      case Kind::LogNormal: return std::lognormal_distribution<double>(a_, b_)(rng);
      case Kind::Weibull: return b_ * std::pow(rng.exponential(), 1.0 / a_);
    }
    return 0.0;
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind_) {
      case Kind::Exponential: os << "exponential(mean=" << a_ << ")"; break;
      case Kind::Gamma: os << "gamma(shape=" << a_ << ",scale=" << b_ << ")"; break;
      case Kind::Uniform: os << "uniform(" << a_ << "," << b_ << ")"; break;
      case Kind::LogNormal: os << "lognormal(mu=" << a_ << ",sigma=" << b_ << ")"; break;
      case Kind::Weibull: os << "weibull(shape=" << a_ << ",scale=" << b_ << ")"; break;
    }
    return os.str();
  }

 private:
  BaseLaw(Kind k, double a, double b) : kind_(k), a_(a), b_(b) {}

  static void require(bool ok, const char* what) {
    if (!ok) throw ValidationError(what);
  }

  Kind kind_;
  double a_;
  double b_;
};

/// 1 - E exp(-s tau) = int_0^inf exp(-y) P(tau > y / s) dy.
///
/// With y = exp(v) the integrand exp(v - e^v) P(tau > e^v / s) is smooth on
/// the real line; it is integrated piecewise with breakpoints around log s,
/// where the survival factor changes, around 0, where exp(-y) does, and at
/// log(s x) for each kink x of the survival function.
/// The range below min(log s, 0) - 45 contributes less than 1e-19.
inline double complement_by_quadrature(const std::function<double(double)>& survival, double s,
                                       const std::vector<double>& kinks = {}) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  auto integrand = [&](double v) {
    const double y = std::exp(v);
    const double w = std::exp(v - y);
    return w == 0.0 ? 0.0 : w * survival(y / s);
  };
  const double c = std::log(s);
  const double lo = std::min(c, 0.0) - 45.0;
  const double hi = 4.0;  // exp(-e^4) < 1e-23
  std::vector<double> cuts{lo, hi, 0.0};
  for (double d : {-20.0, -8.0, -2.0, 0.0, 2.0, 8.0}) cuts.push_back(c + d);
  for (double x : kinks) cuts.push_back(c + std::log(x));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [&](double x) { return x < lo || x > hi; }), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double value = 0.0;
  double error = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    double e = 0.0;
    value += Rule::integrate(integrand, cuts[k], cuts[k + 1], 12, 1e-13, &e);
    error += e;
  }
  if (!(error <= kQuadratureTolerance) || !std::isfinite(value)) {
    std::ostringstream os;
    os << "Laplace quadrature did not converge at s=" << s << " (error estimate " << error << ")";
    throw NumericError(os.str());
  }
  return std::clamp(value, 0.0, 1.0);
}

/// Waiting-time law for one side (plus or minus) across all states.
class DistModel {
 public:
  enum class Kind { Exponential, ScaledBase, RegVarTail, OneSidedStable, Deterministic };

  using RealFunction = std::function<double(double)>;

  /// tau_i ~ Exp(rate a_i).
  static DistModel exponential(ScaleRule rate) {
    DistModel m(Kind::Exponential, std::move(rate));
    return m;
  }

  /// tau_i = tau / a_i with a finite-mean base variable tau.
  static DistModel scaled(BaseLaw base, ScaleRule scale) {
    DistModel m(Kind::ScaledBase, std::move(scale));
    m.base_ = base;
    return m;
  }

  /// One-sided alpha-stable: E exp(-lambda tau_i) = exp(-c (lambda / a_i)^alpha).
  static DistModel stable(double alpha, double c, ScaleRule scale) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("stable law needs 0 < alpha < 1");
    if (!(c > 0.0)) throw ValidationError("stable law needs c > 0");
    DistModel m(Kind::OneSidedStable, std::move(scale));
    m.alpha_ = alpha;
    m.c_ = c;
    return m;
  }

  /// Regularly varying tail P(tau > x) = x^-alpha l(x). `survival` is the full
  /// survival function of tau. Sampling uses `inverse_survival` when given,
  /// otherwise rejection from the Pareto envelope alpha (1 + x)^(-1-alpha)
  /// scaled by `envelope`, which requires `density`.
  struct RegVarSpec {
    double alpha = 0.5;
    RealFunction survival;
    RealFunction inverse_survival;
    RealFunction density;
    std::optional<double> envelope;
  };

  static DistModel regvar(RegVarSpec spec, ScaleRule scale) {
    if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) {
      throw ValidationError("regularly varying law needs 0 < alpha < 1");
    }
    if (!spec.survival) throw ValidationError("regularly varying law needs a survival function");
    if (!spec.inverse_survival && !(spec.envelope && spec.density)) {
      throw ValidationError("regularly varying law needs an inverse survival or an envelope with density");
    }
    if (spec.envelope && !(*spec.envelope > 0.0)) throw ValidationError("envelope constant must be positive");
    DistModel m(Kind::RegVarTail, std::move(scale));
    m.alpha_ = spec.alpha;
    m.regvar_ = std::make_shared<const RegVarSpec>(std::move(spec));
    return m;
  }

  /// tau_i = value / a_i with probability one.
  static DistModel deterministic(double value, ScaleRule scale = ScaleRule::constant(1.0)) {
    if (!(value > 0.0) || !std::isfinite(value)) throw ValidationError("deterministic wait needs value > 0");
    DistModel m(Kind::Deterministic, std::move(scale));
    m.value_ = value;
    return m;
  }

  Kind kind() const { return kind_; }
  const ScaleRule& scale() const { return scale_; }
  double alpha() const { return alpha_; }
  double c() const { return c_; }
  double value() const { return value_; }
  const std::optional<BaseLaw>& base() const { return base_; }

  double scale_at(StateIndex i) const { return scale_(i); }

  /// 1 - E exp(-lambda tau) for scale a.
  double complement_at_scale(double a, double lambda) const {
    if (!(lambda > 0.0)) throw ArgumentError("Laplace point must be positive");
    const double s = lambda / a;
    switch (kind_) {
      case Kind::Exponential: return lambda / (lambda + a);
      case Kind::OneSidedStable: return -std::expm1(-c_ * std::pow(s, alpha_));
      case Kind::Deterministic: return -std::expm1(-s * value_);
      case Kind::ScaledBase: {
        if (auto v = base_->closed_complement(s)) return *v;
        const BaseLaw base = *base_;
        return complement_by_quadrature([base](double x) { return base.survival(x); }, s, base.kinks());
      }
      case Kind::RegVarTail: return complement_by_quadrature(regvar_->survival, s);
    }
    return 0.0;
  }

  /// Phi_i = 1 - E exp(-lambda tau_i).
  double laplace_complement(StateIndex i, double lambda) const {
    return complement_at_scale(scale_at(i), lambda);
  }

  /// log E exp(-lambda tau / a), exact where a closed form exists.
  double log_laplace_at_scale(double a, double lambda) const {
    if (!(lambda > 0.0)) throw ArgumentError("Laplace point must be positive");
    const double s = lambda / a;
    switch (kind_) {
      case Kind::Exponential: return -std::log1p(s);
      case Kind::OneSidedStable: return -c_ * std::pow(s, alpha_);
      case Kind::Deterministic: return -s * value_;
      case Kind::ScaledBase:
        if (auto v = base_->closed_log_transform(s)) return *v;
        break;
      case Kind::RegVarTail: break;
    }
    return std::log1p(-complement_at_scale(a, lambda));
  }

  /// phi_i(lambda) = E exp(-lambda tau_i).
  double laplace(StateIndex i, double lambda) const { return std::exp(log_laplace_at_scale(scale_at(i), lambda)); }

  /// One draw of tau / a.
  template <class Urbg>
  double sample_at_scale(double a, Urbg& rng) const {
    switch (kind_) {
      case Kind::Exponential: return rng.exponential() / a;
      case Kind::Deterministic: return value_ / a;
      case Kind::ScaledBase: return base_->sample(rng) / a;
      case Kind::OneSidedStable: return stable_unit(rng) * std::pow(c_, 1.0 / alpha_) / a;
      case Kind::RegVarTail: return regvar_sample(rng) / a;
    }
    return 0.0;
  }

  template <class Urbg>
  double sample(StateIndex i, Urbg& rng) const {
    return sample_at_scale(scale_at(i), rng);
  }

  /// kappa with Phi(a) ~ C a^-kappa as a -> infinity.
  double kappa() const {
    return (kind_ == Kind::OneSidedStable || kind_ == Kind::RegVarTail) ? alpha_ : 1.0;
  }

  /// Decay exponent s with Phi_i ~ C i^-s, when the scale is a declared power law.
  std::optional<double> decay_exponent() const {
    if (auto beta = scale_.power()) return kappa() * *beta;
    return std::nullopt;
  }

  /// Whether Phi_i ~ C i^-s holds with an exact constant (no slowly varying factor).
  bool exact_power_decay() const { return kind_ != Kind::RegVarTail; }

  std::string describe() const {
    std::ostringstream os;
    switch (kind_) {
      case Kind::Exponential: os << "exponential"; break;
      case Kind::ScaledBase: os << "scaled " << base_->describe(); break;
      case Kind::RegVarTail: os << "regvar(alpha=" << alpha_ << ")"; break;
      case Kind::OneSidedStable: os << "stable(alpha=" << alpha_ << ",c=" << c_ << ")"; break;
      case Kind::Deterministic: os << "deterministic(" << value_ << ")"; break;
    }
    os << " scale " << scale_.source();
    return os.str();
  }

 private:
  DistModel(Kind k, ScaleRule scale) : kind_(k), scale_(std::move(scale)) {}

  // Kanter's representation: with U ~ Uniform(0, pi) and E ~ Exp(1),
  // (A(U) / E)^((1 - alpha) / alpha) has Laplace transform exp(-lambda^alpha),
  // where A(u) = sin(alpha u)^(alpha/(1-alpha)) sin((1-alpha) u) / sin(u)^(1/(1-alpha)).
  template <class Urbg>
  double stable_unit(Urbg& rng) const {
    constexpr double kPi = 3.14159265358979323846;
    const double u = kPi * rng.uniform_open();
    const double e = rng.exponential();
    const double a = alpha_;
    const double log_a = (a / (1.0 - a)) * std::log(std::sin(a * u)) + std::log(std::sin((1.0 - a) * u)) -
                         (1.0 / (1.0 - a)) * std::log(std::sin(u));
    return std::exp(((1.0 - a) / a) * (log_a - std::log(e)));
  }

  template <class Urbg>
  double regvar_sample(Urbg& rng) const {
    const RegVarSpec& spec = *regvar_;
    if (spec.inverse_survival) {
      const double x = spec.inverse_survival(rng.uniform_open());
      if (!(x > 0.0) || !std::isfinite(x)) throw SamplingError("inverse survival returned a non-positive value");
      return x;
    }
    constexpr int kMaxAttempts = 1000000;
    const double m = *spec.envelope;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const double x = std::pow(rng.uniform_open(), -1.0 / alpha_) - 1.0;
      if (!(x > 0.0)) continue;
      const double g = alpha_ * std::pow(1.0 + x, -1.0 - alpha_);
      if (rng.uniform_open() * m * g <= spec.density(x)) return x;
    }
    throw SamplingError("Pareto envelope rejection exceeded 10^6 attempts");
  }

  Kind kind_;
  ScaleRule scale_;
  double alpha_ = 1.0;
  double c_ = 1.0;
  double value_ = 1.0;
  std::optional<BaseLaw> base_;
  std::shared_ptr<const RegVarSpec> regvar_;
};

/// Right and left waiting-time laws plus the Laplace evaluation point.
struct WaitingSpec {
  DistModel plus;
  DistModel minus;
  double lambda = 1.0;

  static WaitingSpec symmetric(DistModel both, double lambda = 1.0) { return {both, both, lambda}; }
};

struct PhiValue {
  double phi_plus = 0.0;   // E exp(-lambda tau_i^+)
  double phi_minus = 0.0;  // E exp(-lambda tau_i^-)
  double phi_mix = 0.0;    // p_i phi_plus + q_i phi_minus
  double big_phi = 0.0;    // 1 - phi_mix
  double big_phi_plus = 0.0;
  double big_phi_minus = 0.0;
};

/// Transforms at state i mixed with (p_i, q_i); state 0 uses only tau_0^+.
inline PhiValue phi(const ChainSpec& chain, const WaitingSpec& waiting, StateIndex i,
                    std::optional<double> lambda = std::nullopt) {
  const double lam = lambda.value_or(waiting.lambda);
  const Transition t = chain.at(i);
  PhiValue v;
  v.big_phi_plus = waiting.plus.laplace_complement(i, lam);
  v.big_phi_minus = (i == 0) ? v.big_phi_plus : waiting.minus.laplace_complement(i, lam);
  v.phi_plus = 1.0 - v.big_phi_plus;
  v.phi_minus = 1.0 - v.big_phi_minus;
  v.big_phi = (i == 0) ? v.big_phi_plus : t.p * v.big_phi_plus + t.q * v.big_phi_minus;
  v.phi_mix = 1.0 - v.big_phi;
  return v;
}

}  // namespace ctrw
