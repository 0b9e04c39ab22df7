#pragma once

// Batch commands behind the `ctrw` executable. Each command reads a
// scenario, writes its result files into an output directory and returns a
// process exit code.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ctrw/chain.hpp"
#include "ctrw/criteria.hpp"
#include "ctrw/error.hpp"
#include "ctrw/scenario.hpp"
#include "ctrw/simulator.hpp"
#include "ctrw/solver.hpp"

namespace ctrw {

inline constexpr std::string_view kToolName = "ctrw";
inline constexpr std::string_view kToolVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitUndetermined = 3,
  kExitRuntimeError = 4,
};

/// Command-line overrides, applied to the scenario document before hashing.
struct CommandOptions {
  std::string scenario_path;
  std::string out_dir = ".";
  std::string format = "json";  // json | csv
  std::optional<std::size_t> replicas;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<std::size_t> n;
  std::optional<StateIndex> l;
  std::optional<StateIndex> r;
  std::optional<std::string> probe;
  unsigned threads = 0;  // not part of the scenario: results do not depend on it
};

namespace report {

inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// JSON number, or null when not finite.
inline Json jnum(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json verdict_json(std::string_view question, const SeriesVerdict& v, double lambda) {
  Json j;
  j["question"] = question;
  j["status"] = to_string(v.status);
  j["method"] = to_string(v.method);
  j["partial_sum"] = jnum(v.partial_sum);
  j["log_partial_sum"] = jnum(v.log_partial_sum);
  j["terms_used"] = v.terms_used;
  j["tail_bound"] = v.tail_bound ? jnum(*v.tail_bound) : Json(nullptr);
  j["lambda"] = lambda;
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

struct Header {
  std::string hash;
  std::uint64_t seed = 0;
};

inline Json header_json(const Header& h) {
  Json j;
  j["tool"] = kToolName;
  j["tool_version"] = kToolVersion;
  j["scenario_hash"] = h.hash;
  j["seed"] = h.seed;
  return j;
}

inline std::string header_csv(const Header& h) {
  return "# tool=" + std::string(kToolName) + " tool_version=" + std::string(kToolVersion) +
         " scenario_hash=" + h.hash + " seed=" + std::to_string(h.seed) + "\n";
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

}  // namespace report

/// Loads the scenario, applies overrides and returns it with its hash.
inline Scenario load_scenario(const CommandOptions& opt) {
  Json doc = read_json_file(opt.scenario_path);
  if (!doc.is_object()) throw ValidationError("scenario root must be a JSON object");
  if (opt.seed) doc["seed"] = *opt.seed;
  if (opt.lambda) doc["lambda"] = *opt.lambda;
  if (opt.replicas) doc["simulate"]["replicas"] = *opt.replicas;
  if (opt.probe) doc["simulate"]["probe"] = *opt.probe;
  if (opt.n) doc["solve"]["n"] = *opt.n;
  if (opt.l) doc["solve"]["l"] = *opt.l;
  if (opt.r) doc["solve"]["r"] = *opt.r;
  return parse_scenario(doc);
}

inline report::Header header_of(const Scenario& s) { return {config_hash(s.document), s.seed}; }

inline std::filesystem::path prepare_out_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------

inline int cmd_classify(const Scenario& s, const CommandOptions& opt) {
  const Classification c = classify(s.chain, s.waiting, s.policy);
  const RecurrenceResult rec = recurrence_class(s.chain, s.policy.max_terms, s.policy);
  Json j = report::header_json(header_of(s));
  j["command"] = "classify";
  if (!s.name.empty()) j["name"] = s.name;
  j["lambda"] = c.lambda;
  j["chain"] = s.chain.description();
  j["waiting"] = {{"plus", s.waiting.plus.describe()}, {"minus", s.waiting.minus.describe()}};
  j["explosion"] = to_string(c.explosion_verdict);
  j["implosion"] = to_string(c.implosion_verdict);
  j["recurrence"] = to_string(rec.cls);
  j["r"] = rec.r ? report::jnum(*rec.r) : Json(nullptr);
  j["series"] = Json::array({report::verdict_json("explosion", c.explosion, c.lambda),
                             report::verdict_json("implosion", c.implosion_series, c.lambda),
                             report::verdict_json("scale_divergence", c.scale_divergence, c.lambda)});
  const auto dir = prepare_out_dir(opt.out_dir);
  report::write_json(dir / "verdicts.json", j);
  return c.determinate() ? kExitOk : kExitUndetermined;
}

inline int cmd_solve(const Scenario& s, const CommandOptions& opt) {
  const auto dir = prepare_out_dir(opt.out_dir);
  const report::Header h = header_of(s);
  const bool two_sided = s.solve.l.has_value() || s.solve.r.has_value();
  SolveResult res;
  std::string system;
  if (two_sided) {
    if (!s.solve.l || !s.solve.r) throw ArgumentError("two-sided solve needs both l and r");
    res = solve_two_sided_transform(s.chain, s.waiting, *s.solve.l, *s.solve.r);
    system = "two_sided_transform";
  } else {
    if (!s.solve.n) throw ArgumentError("solve needs n (scenario solve.n or --n)");
    res = solve_hitting_transform(s.chain, s.waiting, *s.solve.n);
    system = "hitting_transform";
  }
  if (opt.format == "csv") {
    std::string csv = report::header_csv(h);
    csv += "# system=" + system + " lambda=" + report::num(s.waiting.lambda) + " residual=" + report::num(res.residual) +
           "\n";
    csv += two_sided ? "state,F\n" : "state,f,log_f\n";
    for (std::size_t k = 0; k < res.values.size(); ++k) {
      csv += std::to_string(res.first_state + k) + "," + report::num(res.values[k]);
      if (!two_sided) csv += "," + report::num(res.log_values[k]);
      csv += "\n";
    }
    report::write_file(dir / "solution.csv", csv);
  } else {
    Json j = report::header_json(h);
    j["command"] = "solve";
    j["system"] = system;
    j["lambda"] = s.waiting.lambda;
    j["residual"] = res.residual;
    Json rows = Json::array();
    for (std::size_t k = 0; k < res.values.size(); ++k) {
      Json row = {{"state", res.first_state + k}, {"value", report::jnum(res.values[k])}};
      if (!two_sided) row["log_value"] = report::jnum(res.log_values[k]);
      rows.push_back(row);
    }
    j["values"] = rows;
    report::write_json(dir / "solution.json", j);
  }
  return kExitOk;
}

inline int cmd_simulate(const Scenario& s, const CommandOptions& opt) {
  const auto dir = prepare_out_dir(opt.out_dir);
  const report::Header h = header_of(s);
  const SimulateParams& sp = s.simulate;
  ProbeOptions po;
  po.replicas = sp.replicas;
  po.seed = s.seed;
  po.threads = opt.threads ? opt.threads : sp.threads;
  po.step_cap = sp.step_cap;
  po.time_cap = sp.time_cap;
  po.level_cap = sp.level_cap;

  Json j = report::header_json(h);
  j["command"] = "simulate";
  j["probe"] = sp.probe;
  j["replicas"] = sp.replicas;
  j["lambda"] = s.waiting.lambda;
  std::string csv = report::header_csv(h);

  if (sp.probe == "hitting") {
    if (!sp.target) throw ArgumentError("hitting probe needs simulate.target");
    const HittingEstimate e = hitting_probe(s.chain, s.waiting, sp.start, *sp.target, po);
    j["start"] = sp.start;
    j["target"] = *sp.target;
    j["estimator"] = "mean exp(-lambda sigma) over uncensored replicas";
    j["value"] = report::jnum(e.transform.mean);
    j["std_error"] = report::jnum(e.transform.std_error);
    j["censored"] = e.censored;
    if (sp.start < *sp.target) {
      const SolveResult f = solve_hitting_transform(s.chain, s.waiting, *sp.target);
      j["solver_reference"] = report::jnum(f.values[sp.start]);
    }
    csv += "replica,sigma,censored\n";
    for (std::size_t r = 0; r < e.sigma.size(); ++r) {
      csv += std::to_string(r) + "," + (e.sigma[r] ? report::num(*e.sigma[r]) : std::string()) + "," +
             (e.sigma[r] ? "0" : "1") + "\n";
    }
  } else if (sp.probe == "explosion") {
    if (sp.levels.empty()) throw ArgumentError("explosion probe needs simulate.levels");
    const ExplosionProbe e = explosion_probe(s.chain, s.waiting, sp.start, sp.levels, po);
    j["start"] = sp.start;
    j["estimator"] = "median sigma_N over replicas reaching N";
    Json levels = Json::array();
    for (const auto& lv : e.levels) {
      levels.push_back({{"level", lv.level}, {"reached", lv.reached}, {"median_sigma", report::jnum(lv.median_sigma)}});
    }
    j["levels"] = levels;
    Json inc = Json::array();
    for (double x : e.median_increments) inc.push_back(report::jnum(x));
    j["median_increments"] = inc;
    j["fraction_top"] = e.fraction_top;
    j["stabilizing"] = e.stabilizing;
    j["censored"] = e.censored;
    csv += "replica";
    for (StateIndex lv : sp.levels) csv += ",sigma_" + std::to_string(lv);
    csv += "\n";
    for (std::size_t r = 0; r < e.sigma.size(); ++r) {
      csv += std::to_string(r);
      for (const auto& x : e.sigma[r]) csv += "," + (x ? report::num(*x) : std::string());
      csv += "\n";
    }
  } else if (sp.probe == "implosion") {
    if (!sp.m) throw ArgumentError("implosion probe needs simulate.m");
    const ImplosionProbe e = implosion_probe(s.chain, s.waiting, *sp.m, po, sp.grid, s.policy);
    j["m"] = *sp.m;
    j["estimator"] = "median rho^(m) = theta_1 + ... + theta_m";
    Json grid = Json::array();
    for (const auto& g : e.grid) {
      grid.push_back({{"m", g.m},
                      {"median_lower", report::jnum(g.median_lower)},
                      {"median_upper", report::jnum(g.median_upper)},
                      {"censored", g.censored}});
    }
    j["grid"] = grid;
    j["censored"] = e.censored_passages;
    j["warning"] = e.warning ? Json(*e.warning) : Json(nullptr);
    csv += "replica,k,theta,censored\n";
    for (std::size_t r = 0; r < e.theta.size(); ++r) {
      for (std::size_t k = 0; k < e.theta[r].size(); ++k) {
        csv += std::to_string(r) + "," + std::to_string(k + 1) + "," + report::num(e.theta[r][k]) + "," +
               (e.theta_censored[r][k] ? "1" : "0") + "\n";
      }
    }
  } else if (sp.probe == "exit") {
    if (!sp.l || !sp.i || !sp.r) throw ArgumentError("exit probe needs simulate.l, simulate.i and simulate.r");
    std::vector<signed char> sides;
    const ExitEstimate e = embedded_exit_mc(s.chain, *sp.l, *sp.i, *sp.r, po, &sides);
    const ExitProbabilities exact = exit_probabilities(s.chain, *sp.l, *sp.i, *sp.r);
    j["interval"] = {{"l", *sp.l}, {"i", *sp.i}, {"r", *sp.r}};
    j["estimator"] = "frequency of leaving through r";
    j["value"] = e.right;
    j["std_error"] = e.std_error;
    j["censored"] = e.censored;
    j["exact"] = {{"right", exact.right}, {"left", exact.left}};
    csv += "replica,side\n";
    for (std::size_t r = 0; r < sides.size(); ++r) {
      csv += std::to_string(r) + "," + (sides[r] > 0 ? "right" : sides[r] < 0 ? "left" : "censored") + "\n";
    }
  } else {
    throw ValidationError("unknown probe '" + sp.probe + "' (expected hitting, explosion, implosion or exit)");
  }
  report::write_json(dir / "summary.json", j);
  report::write_file(dir / "samples.csv", csv);
  return kExitOk;
}

struct SweepRow {
  std::size_t index = 0;
  double p = 0.0;
  double beta = 0.0;
  std::optional<double> alpha;
  std::optional<Classification> result;
  std::string error;
};

inline std::vector<SweepRow> run_sweep(const SweepParams& sw, const SeriesPolicy& policy, double lambda) {
  std::vector<SweepRow> rows;
  std::vector<std::optional<double>> alphas;
  if (sw.kind == "stable") {
    for (double a : sw.alpha) alphas.emplace_back(a);
  } else {
    alphas.emplace_back(std::nullopt);
  }
  for (double p : sw.p) {
    for (double beta : sw.beta) {
      for (const auto& alpha : alphas) {
        SweepRow row;
        row.index = rows.size();
        row.p = p;
        row.beta = beta;
        row.alpha = alpha;
        rows.push_back(row);
      }
    }
  }
  for (SweepRow& row : rows) {
    try {
      const ChainSpec chain = ChainSpec::homogeneous(row.p);
      const ScaleRule scale = ScaleRule::power_law(row.beta, sw.coef);
      DistModel model = DistModel::exponential(scale);
      if (sw.kind == "stable") model = DistModel::stable(*row.alpha, sw.c, scale);
      if (sw.kind == "deterministic") model = DistModel::deterministic(sw.value, scale);
      row.result = classify(chain, WaitingSpec::symmetric(model, lambda), policy);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  }
  return rows;
}

inline int cmd_sweep(const Scenario& s, const CommandOptions& opt) {
  if (!s.sweep) throw ValidationError("scenario has no 'sweep' section");
  const auto dir = prepare_out_dir(opt.out_dir);
  const report::Header h = header_of(s);
  const std::vector<SweepRow> rows = run_sweep(*s.sweep, s.policy, s.waiting.lambda);

  int code = kExitOk;
  std::string csv = report::header_csv(h);
  csv += "index,p,beta,alpha,explosion,implosion,explosion_method,implosion_method,error\n";
  Json jrows = Json::array();
  for (const SweepRow& row : rows) {
    Json jr = {{"index", row.index}, {"p", row.p}, {"beta", row.beta}};
    jr["alpha"] = row.alpha ? Json(*row.alpha) : Json(nullptr);
    std::string expl, impl, em, im;
    if (row.result) {
      expl = to_string(row.result->explosion_verdict);
      impl = to_string(row.result->implosion_verdict);
      em = to_string(row.result->explosion.method);
      im = to_string(row.result->implosion_series.method);
      jr["explosion"] = expl;
      jr["implosion"] = impl;
      jr["explosion_method"] = em;
      jr["implosion_method"] = im;
      if (!row.result->determinate()) code = std::max(code, static_cast<int>(kExitUndetermined));
    } else {
      jr["error"] = row.error;
      code = kExitRuntimeError;
    }
    std::string err = row.error;
    for (char& ch : err) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    csv += std::to_string(row.index) + "," + report::num(row.p) + "," + report::num(row.beta) + "," +
           (row.alpha ? report::num(*row.alpha) : std::string()) + "," + expl + "," + impl + "," + em + "," + im +
           "," + err + "\n";
    jrows.push_back(jr);
  }
  Json j = report::header_json(h);
  j["command"] = "sweep";
  j["kind"] = s.sweep->kind;
  j["lambda"] = s.waiting.lambda;
  j["rows"] = jrows;
  report::write_json(dir / "sweep.json", j);
  report::write_file(dir / "sweep.csv", csv);
  return code;
}

/// Loads the scenario and runs `command`, mapping failures to exit codes.
/// Diagnostics go to `err`.
template <class Command>
int run_command(const CommandOptions& opt, Command&& command, std::FILE* err = stderr) {
  try {
    if (opt.format != "json" && opt.format != "csv") {
      throw ValidationError("unknown format '" + opt.format + "' (expected json or csv)");
    }
    const Scenario s = load_scenario(opt);
    return command(s, opt);
  } catch (const ValidationError& e) {
    std::fprintf(err, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const ArgumentError& e) {
    std::fprintf(err, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(err, "runtime error: %s\n", e.what());
    return kExitRuntimeError;
  }
}

}  // namespace ctrw
