// Command-line experiment runner: assumption checks, model-based oracle,
// data-driven learning, closed-loop evaluation, and the complexity/rank
// tables. Exit codes: 0 ok, 1 precondition or failed verdict, 2 parse,
// 3 blow-up, 4 iteration cap. Set REGDATA_LOG=1|2 for progress logs.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "regdata/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool blind = false;
};

regdata::ExperimentConfig load_with_overrides(const CommonArgs& args) {
  auto cfg = regdata::load_config(args.config_path);
  if (args.seed) cfg.sim.seed = *args.seed;
  if (args.blind) cfg.blind_mode = true;
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool wants_out) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)")
      ->required();
  if (wants_out)
    cmd->add_option("--out", args.out_dir, "output directory (default from config)");
  cmd->add_option("--seed", args.seed, "override the exploration seed");
  cmd->add_flag("--blind", args.blind,
                "hide the true matrices from all reports (no oracle columns)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "regdata: data-driven output regulation for unknown MIMO plants"};
  app.require_subcommand(1);

  CommonArgs check_args, oracle_args, learn_args, eval_args;
  std::string algorithm = "improved";
  std::string gain_path;
  long rt_n = 0, rt_m = 0, rt_p = 0, rt_q = 0;
  std::optional<long> rt_nz;
  bool rt_d_zero = false;

  auto* check = app.add_subcommand("check", "verify the solvability assumptions");
  add_common(check, check_args, false);

  auto* oracle = app.add_subcommand(
      "oracle", "model-based ground truth: Riccati solution and regulator equations");
  add_common(oracle, oracle_args, true);

  auto* learn = app.add_subcommand("learn", "collect data and run a learner");
  add_common(learn, learn_args, true);
  learn->add_option("--algorithm", algorithm,
                    "pi-lqr | vi-lqr | first | improved (default from config)")
      ->check(CLI::IsMember({"pi-lqr", "vi-lqr", "first", "improved"}));

  auto* evaluate = app.add_subcommand(
      "evaluate", "simulate the closed loop with a gain file and check settling");
  add_common(evaluate, eval_args, true);
  evaluate->add_option("--gain", gain_path, "gain CSV, m x (n + n_z)")->required();

  auto* tables = app.add_subcommand(
      "report-tables", "unknown counts and rank requirements for given dimensions");
  tables->add_option("n", rt_n, "plant state dimension")->required();
  tables->add_option("m", rt_m, "input dimension")->required();
  tables->add_option("p", rt_p, "output dimension")->required();
  tables->add_option("q", rt_q, "exosystem dimension")->required();
  tables->add_option("nz", rt_nz,
                     "internal model dimension (default p*q/2, the "
                     "repeated-oscillator comparison case)");
  tables->add_flag("--d-zero", rt_d_zero, "also print the D = 0 relaxation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) {
      return regdata::cmd_check(load_with_overrides(check_args), std::cout);
    }
    if (oracle->parsed()) {
      auto cfg = load_with_overrides(oracle_args);
      return regdata::cmd_oracle(cfg, cfg.output_dir, std::cout);
    }
    if (learn->parsed()) {
      auto cfg = load_with_overrides(learn_args);
      const std::string alg =
          learn->count("--algorithm") ? algorithm : cfg.alg.name;
      return regdata::cmd_learn(cfg, alg, cfg.output_dir, std::cout);
    }
    if (evaluate->parsed()) {
      auto cfg = load_with_overrides(eval_args);
      return regdata::cmd_evaluate(cfg, gain_path, cfg.output_dir, std::cout);
    }
    if (tables->parsed()) {
      std::optional<regdata::Index> nz;
      if (rt_nz) nz = static_cast<regdata::Index>(*rt_nz);
      return regdata::cmd_report_tables(rt_n, rt_m, rt_p, rt_q, nz, rt_d_zero,
                                        std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return regdata::exit_code_for(e);
  }
  return 0;
}
