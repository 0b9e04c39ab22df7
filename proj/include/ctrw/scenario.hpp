#pragma once

// Scenario documents: one JSON object describing a chain, its waiting
// times, the Laplace point, series-policy overrides, a seed and optional
// per-command parameters. The schema is described in README.md.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ctrw/chain.hpp"
#include "ctrw/error.hpp"
#include "ctrw/expression.hpp"
#include "ctrw/series.hpp"
#include "ctrw/waiting.hpp"

namespace ctrw {

using Json = nlohmann::json;

struct SolveParams {
  std::optional<std::size_t> n;
  std::optional<StateIndex> l;
  std::optional<StateIndex> r;
};

struct SimulateParams {
  std::string probe = "hitting";  // hitting | explosion | implosion | exit
  std::size_t replicas = 10000;
  StateIndex start = 0;
  std::optional<StateIndex> target;
  std::vector<StateIndex> levels;  // explosion grid
  std::optional<StateIndex> m;      // implosion top level
  std::vector<StateIndex> grid;     // implosion nested levels
  std::optional<StateIndex> l;      // exit interval
  std::optional<StateIndex> i;
  std::optional<StateIndex> r;
  std::optional<double> time_cap;
  std::optional<StateIndex> level_cap;
  std::uint64_t step_cap = 100000000;
  unsigned threads = 0;
};

struct SweepParams {
  std::string kind = "exponential";  // exponential | stable | deterministic
  std::vector<double> p;
  std::vector<double> beta;
  std::vector<double> alpha;
  double coef = 1.0;
  double c = 1.0;
  double value = 1.0;
};

struct Scenario {
  std::string name;
  ChainSpec chain = ChainSpec::homogeneous(0.5);
  WaitingSpec waiting{DistModel::exponential(ScaleRule::constant(1.0)),
                      DistModel::exponential(ScaleRule::constant(1.0)), 1.0};
  SeriesPolicy policy;
  std::uint64_t seed = 0;
  SolveParams solve;
  SimulateParams simulate;
  std::optional<SweepParams> sweep;
  Json document;  // effective document, used for hashing
};

namespace scenario_detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw ValidationError("scenario " + path + ": " + what);
}

inline void allow_keys(const Json& obj, const std::string& path, std::initializer_list<std::string_view> keys) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (std::string_view k : keys) known = known || item.key() == k;
    if (!known) fail(path, "unknown key '" + item.key() + "'");
  }
}

inline const Json& require(const Json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) fail(path, std::string("missing key '") + key + "'");
  return obj.at(key);
}

inline double number(const Json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

inline double number_or(const Json& obj, const std::string& path, const char* key, double fallback) {
  return obj.contains(key) ? number(obj.at(key), path + "." + key) : fallback;
}

inline std::uint64_t unsigned_integer(const Json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  fail(path, "expected a non-negative integer");
}

inline std::optional<StateIndex> optional_index(const Json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) return std::nullopt;
  return unsigned_integer(obj.at(key), path + "." + key);
}

inline std::vector<double> number_list(const Json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

inline std::vector<StateIndex> index_list(const Json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of state indices");
  std::vector<StateIndex> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out.push_back(unsigned_integer(v[k], path + "[" + std::to_string(k) + "]"));
  }
  return out;
}

inline Expression expression(const Json& v, const std::string& path, std::initializer_list<std::string_view> vars) {
  if (!v.is_string()) fail(path, "expected an expression string");
  try {
    return Expression(v.get<std::string>(), vars);
  } catch (const ValidationError& e) {
    fail(path, e.what());
  }
}

inline ScaleRule scale_rule(const Json& v, const std::string& path) {
  if (v.is_number()) return ScaleRule::constant(v.get<double>());
  if (v.is_string()) return ScaleRule::expression(expression(v, path, {"i"}));
  if (v.is_object()) {
    allow_keys(v, path, {"power", "coef"});
    return ScaleRule::power_law(number(require(v, path, "power"), path + ".power"),
                                number_or(v, path, "coef", 1.0));
  }
  fail(path, "expected a number, an expression in i, or {\"power\": beta, \"coef\": c}");
}

inline BaseLaw base_law(const Json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  const std::string law = require(v, path, "law").get<std::string>();
  if (law == "exponential") {
    allow_keys(v, path, {"law", "mean"});
    return BaseLaw::exponential(number_or(v, path, "mean", 1.0));
  }
  if (law == "gamma") {
    allow_keys(v, path, {"law", "shape", "scale"});
    return BaseLaw::gamma(number(require(v, path, "shape"), path + ".shape"), number_or(v, path, "scale", 1.0));
  }
  if (law == "uniform") {
    allow_keys(v, path, {"law", "low", "high"});
    return BaseLaw::uniform(number(require(v, path, "low"), path + ".low"),
                            number(require(v, path, "high"), path + ".high"));
  }
  if (law == "lognormal") {
    allow_keys(v, path, {"law", "mu", "sigma"});
    return BaseLaw::lognormal(number_or(v, path, "mu", 0.0), number(require(v, path, "sigma"), path + ".sigma"));
  }
  if (law == "weibull") {
    allow_keys(v, path, {"law", "shape", "scale"});
    return BaseLaw::weibull(number(require(v, path, "shape"), path + ".shape"), number_or(v, path, "scale", 1.0));
  }
  fail(path + ".law", "unknown base law '" + law + "'");
}

inline DistModel dist_model(const Json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  const Json& kind_json = require(v, path, "kind");
  if (!kind_json.is_string()) fail(path + ".kind", "expected a string");
  const std::string kind = kind_json.get<std::string>();
  auto scale = [&](const char* key) {
    return v.contains(key) ? scale_rule(v.at(key), path + "." + key) : ScaleRule::constant(1.0);
  };
  if (kind == "exponential") {
    allow_keys(v, path, {"kind", "rate"});
    return DistModel::exponential(scale("rate"));
  }
  if (kind == "scaled") {
    allow_keys(v, path, {"kind", "base", "scale"});
    return DistModel::scaled(base_law(require(v, path, "base"), path + ".base"), scale("scale"));
  }
  if (kind == "stable") {
    allow_keys(v, path, {"kind", "alpha", "c", "scale"});
    return DistModel::stable(number(require(v, path, "alpha"), path + ".alpha"), number_or(v, path, "c", 1.0),
                             scale("scale"));
  }
  if (kind == "deterministic") {
    allow_keys(v, path, {"kind", "value", "scale"});
    return DistModel::deterministic(number_or(v, path, "value", 1.0), scale("scale"));
  }
  if (kind == "regvar") {
    allow_keys(v, path, {"kind", "alpha", "survival", "inverse_survival", "density", "envelope", "scale"});
    DistModel::RegVarSpec spec;
    spec.alpha = number(require(v, path, "alpha"), path + ".alpha");
    auto fn = [&](const char* key, const char* var) -> DistModel::RealFunction {
      if (!v.contains(key)) return {};
      auto e = std::make_shared<const Expression>(expression(v.at(key), path + "." + key, {var}));
      return [e](double x) { return (*e)(x); };
    };
    spec.survival = fn("survival", "x");
    spec.inverse_survival = fn("inverse_survival", "u");
    spec.density = fn("density", "x");
    if (v.contains("envelope")) spec.envelope = number(v.at("envelope"), path + ".envelope");
    return DistModel::regvar(std::move(spec), scale("scale"));
  }
  fail(path + ".kind", "unknown distribution kind '" + kind + "'");
}

inline std::optional<TailLaw> tail_law(const Json& obj, const std::string& path) {
  if (!obj.contains("tail")) return std::nullopt;
  const Json& t = obj.at("tail");
  const std::string p = path + ".tail";
  allow_keys(t, p, {"ratio", "exponent", "exact"});
  TailLaw law;
  law.limit_ratio = number_or(t, p, "ratio", 1.0);
  law.exponent = number_or(t, p, "exponent", 0.0);
  law.exact_boundary = t.contains("exact") ? t.at("exact").get<bool>() : true;
  return law;
}

inline ChainSpec chain_spec(const Json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  const std::string family = require(v, path, "family").get<std::string>();
  if (family == "homogeneous") {
    allow_keys(v, path, {"family", "p"});
    return ChainSpec::homogeneous(number(require(v, path, "p"), path + ".p"));
  }
  if (family == "table") {
    allow_keys(v, path, {"family", "p"});
    return ChainSpec::table(number_list(require(v, path, "p"), path + ".p"));
  }
  if (family == "rational") {
    allow_keys(v, path, {"family", "numerator", "denominator"});
    return ChainSpec::rational(Polynomial{number_list(require(v, path, "numerator"), path + ".numerator")},
                               Polynomial{number_list(require(v, path, "denominator"), path + ".denominator")});
  }
  if (family == "expression") {
    allow_keys(v, path, {"family", "p", "tail"});
    return ChainSpec::expression(expression(require(v, path, "p"), path + ".p", {"i"}), tail_law(v, path));
  }
  fail(path + ".family", "unknown chain family '" + family + "'");
}

inline SeriesPolicy series_policy(const Json& v, const std::string& path) {
  allow_keys(v, path,
             {"epsilon", "window", "tail_relative", "cap", "max_terms", "phi_check_index", "phi_threshold",
              "closed_forms", "diagnostic_terms"});
  SeriesPolicy p;
  p.epsilon = number_or(v, path, "epsilon", p.epsilon);
  if (v.contains("window")) p.window = unsigned_integer(v.at("window"), path + ".window");
  p.tail_relative = number_or(v, path, "tail_relative", p.tail_relative);
  p.cap = number_or(v, path, "cap", p.cap);
  if (v.contains("max_terms")) p.max_terms = unsigned_integer(v.at("max_terms"), path + ".max_terms");
  if (v.contains("phi_check_index")) {
    p.phi_check_index = unsigned_integer(v.at("phi_check_index"), path + ".phi_check_index");
  }
  p.phi_threshold = number_or(v, path, "phi_threshold", p.phi_threshold);
  if (v.contains("closed_forms")) p.use_closed_forms = v.at("closed_forms").get<bool>();
  if (v.contains("diagnostic_terms")) {
    p.diagnostic_terms = unsigned_integer(v.at("diagnostic_terms"), path + ".diagnostic_terms");
  }
  if (!(p.epsilon > 0.0 && p.epsilon < 1.0)) fail(path + ".epsilon", "must lie in (0, 1)");
  if (p.window < 1) fail(path + ".window", "must be positive");
  if (p.max_terms < 2) fail(path + ".max_terms", "must be at least 2");
  return p;
}

inline SimulateParams simulate_params(const Json& v, const std::string& path) {
  allow_keys(v, path,
             {"probe", "replicas", "start", "target", "levels", "m", "grid", "l", "i", "r", "time_cap", "level_cap",
              "step_cap", "threads"});
  SimulateParams s;
  if (v.contains("probe")) s.probe = v.at("probe").get<std::string>();
  if (v.contains("replicas")) s.replicas = unsigned_integer(v.at("replicas"), path + ".replicas");
  if (v.contains("start")) s.start = unsigned_integer(v.at("start"), path + ".start");
  s.target = optional_index(v, path, "target");
  if (v.contains("levels")) s.levels = index_list(v.at("levels"), path + ".levels");
  s.m = optional_index(v, path, "m");
  if (v.contains("grid")) s.grid = index_list(v.at("grid"), path + ".grid");
  s.l = optional_index(v, path, "l");
  s.i = optional_index(v, path, "i");
  s.r = optional_index(v, path, "r");
  if (v.contains("time_cap")) s.time_cap = number(v.at("time_cap"), path + ".time_cap");
  s.level_cap = optional_index(v, path, "level_cap");
  if (v.contains("step_cap")) s.step_cap = unsigned_integer(v.at("step_cap"), path + ".step_cap");
  if (v.contains("threads")) s.threads = static_cast<unsigned>(unsigned_integer(v.at("threads"), path + ".threads"));
  return s;
}

inline SweepParams sweep_params(const Json& v, const std::string& path) {
  allow_keys(v, path, {"kind", "p", "beta", "alpha", "coef", "c", "value"});
  SweepParams s;
  if (v.contains("kind")) s.kind = v.at("kind").get<std::string>();
  if (s.kind != "exponential" && s.kind != "stable" && s.kind != "deterministic") {
    fail(path + ".kind", "sweep kind must be exponential, stable or deterministic");
  }
  if (v.contains("p")) s.p = number_list(v.at("p"), path + ".p");
  if (v.contains("beta")) s.beta = number_list(v.at("beta"), path + ".beta");
  if (v.contains("alpha")) s.alpha = number_list(v.at("alpha"), path + ".alpha");
  s.coef = number_or(v, path, "coef", 1.0);
  s.c = number_or(v, path, "c", 1.0);
  s.value = number_or(v, path, "value", 1.0);
  if (s.kind == "stable" && s.alpha.empty() && !s.p.empty() && !s.beta.empty()) {
    fail(path + ".alpha", "stable sweeps need at least one alpha");
  }
  return s;
}

}  // namespace scenario_detail

namespace scenario_detail {

inline Scenario parse_unchecked(const Json& doc);

}  // namespace scenario_detail

/// Builds a scenario from a parsed document; throws ValidationError.
inline Scenario parse_scenario(const Json& doc) {
  try {
    return scenario_detail::parse_unchecked(doc);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("scenario has a value of the wrong type: ") + e.what());
  }
}

inline Scenario scenario_detail::parse_unchecked(const Json& doc) {
  allow_keys(doc, "root", {"name", "chain", "waiting", "lambda", "policy", "seed", "solve", "simulate", "sweep"});
  Scenario s;
  s.document = doc;
  if (doc.contains("name")) s.name = doc.at("name").get<std::string>();
  if (doc.contains("chain")) {
    s.chain = chain_spec(doc.at("chain"), "chain");
  } else if (!doc.contains("sweep")) {
    fail("root", "missing key 'chain'");
  }
  if (doc.contains("waiting")) {
    const Json& w = doc.at("waiting");
    allow_keys(w, "waiting", {"plus", "minus", "both"});
    if (w.contains("both")) {
      if (w.contains("plus") || w.contains("minus")) fail("waiting", "use either 'both' or 'plus'/'minus'");
      const DistModel d = dist_model(w.at("both"), "waiting.both");
      s.waiting.plus = d;
      s.waiting.minus = d;
    } else {
      s.waiting.plus = dist_model(require(w, "waiting", "plus"), "waiting.plus");
      s.waiting.minus = dist_model(require(w, "waiting", "minus"), "waiting.minus");
    }
  } else if (!doc.contains("sweep")) {
    fail("root", "missing key 'waiting'");
  }
  s.waiting.lambda = number_or(doc, "root", "lambda", 1.0);
  if (!(s.waiting.lambda > 0.0) || !std::isfinite(s.waiting.lambda)) fail("lambda", "must be positive");
  if (doc.contains("policy")) s.policy = series_policy(doc.at("policy"), "policy");
  if (doc.contains("seed")) s.seed = unsigned_integer(doc.at("seed"), "seed");
  if (doc.contains("solve")) {
    const Json& v = doc.at("solve");
    allow_keys(v, "solve", {"n", "l", "r"});
    if (v.contains("n")) s.solve.n = unsigned_integer(v.at("n"), "solve.n");
    s.solve.l = optional_index(v, "solve", "l");
    s.solve.r = optional_index(v, "solve", "r");
  }
  if (doc.contains("simulate")) s.simulate = simulate_params(doc.at("simulate"), "simulate");
  if (doc.contains("sweep")) s.sweep = sweep_params(doc.at("sweep"), "sweep");
  return s;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError("scenario file '" + path + "' is not valid JSON: " + e.what());
  }
}

/// FNV-1a 64 of the canonical dump (object keys sorted).
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const Json& doc) {
  const std::uint64_t h = fnv1a64(doc.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ctrw
