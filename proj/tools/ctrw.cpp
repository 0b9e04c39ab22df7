// ctrw: classify, solve and simulate birth-and-death random walks.

#include <CLI11.hpp>

#include "ctrw/commands.hpp"

namespace {

void add_common(CLI::App* cmd, ctrw::CommandOptions& opt) {
  cmd->add_option("--scenario", opt.scenario_path, "Scenario JSON file")->required();
  cmd->add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--seed", opt.seed, "Override the scenario seed");
  cmd->add_option("--lambda", opt.lambda, "Override the Laplace point")->check(CLI::PositiveNumber);
  cmd->add_option("--format", opt.format, "Output format: json or csv")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explosion and implosion of birth-and-death continuous-time random walks"};
  app.set_version_flag("--version", std::string(ctrw::kToolVersion));
  app.require_subcommand(1);

  ctrw::CommandOptions opt;

  auto* classify = app.add_subcommand("classify", "Decide explosion and implosion; writes verdicts.json");
  add_common(classify, opt);

  auto* solve = app.add_subcommand("solve", "Solve the hitting-transform system; writes solution.{json,csv}");
  add_common(solve, opt);
  solve->add_option("--n", opt.n, "Target state n for f_i^n");
  solve->add_option("--l", opt.l, "Left boundary of a two-sided system");
  solve->add_option("--r", opt.r, "Right boundary of a two-sided system");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo probes; writes summary.json and samples.csv");
  add_common(simulate, opt);
  simulate->add_option("--probe", opt.probe, "hitting, explosion, implosion or exit");
  simulate->add_option("--replicas", opt.replicas, "Number of replicas");
  simulate->add_option("--threads", opt.threads, "Worker threads (0: all cores)");

  auto* sweep = app.add_subcommand("sweep", "Classify a (p, beta, alpha) grid; writes sweep.{csv,json}");
  add_common(sweep, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ctrw::kExitConfigError;
  }

  if (classify->parsed()) return ctrw::run_command(opt, ctrw::cmd_classify);
  if (solve->parsed()) return ctrw::run_command(opt, ctrw::cmd_solve);
  if (simulate->parsed()) return ctrw::run_command(opt, ctrw::cmd_simulate);
  return ctrw::run_command(opt, ctrw::cmd_sweep);
}
