// Command-line driver: run experiments, check gradients, aggregate curves.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mpts/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Pool-based active learning with MMD-regularized training and trajectory-averaged acquisition"};
  app.require_subcommand(1);

  mpts::RunCommand run;
  std::string config_path;
  std::uint64_t run_seed = 0;
  std::string out_dir;
  auto* run_cmd = app.add_subcommand("run", "Run an active-learning experiment from a JSON config");
  run_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  auto* seed_opt = run_cmd->add_option("--seed", run_seed, "Override master_seed");
  auto* out_opt = run_cmd->add_option(
      "--out", out_dir,
      "Output directory (default: config output_dir, else $MPTS_OUTPUT_DIR, else mpts_results)");
  run_cmd->add_option("--jobs", run.jobs, "Worker threads for (method, repeat) cells")
      ->default_val(1)
      ->check(CLI::PositiveNumber);

  std::uint64_t gc_seed = 0;
  double inject = 0.0;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  gc_cmd->add_option("--seed", gc_seed, "Seed for the random instances")->default_val(0);
  gc_cmd->add_option("--inject-error", inject,
                     "Add this value to one analytic gradient entry per instance (self-test)")
      ->group("");

  std::string results_path;
  std::string curves_path;
  auto* curves_cmd =
      app.add_subcommand("curves", "Mean/std accuracy per (method, round) from a results CSV");
  curves_cmd->add_option("--results", results_path, "results.csv from `run`")->required();
  curves_cmd->add_option("--out", curves_path, "Output CSV")->required();

  app.footer(
      "Exit codes: 0 ok, 1 failure, 2 config error, 3 data format error,\n"
      "            4 training diverged, 5 gradcheck failed, 64 usage error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mpts::kExitUsage;
  }

  if (*run_cmd) {
    run.config_path = config_path;
    if (*seed_opt) run.seed = run_seed;
    if (*out_opt) run.output_dir = out_dir;
    return mpts::cmd_run(run, std::cout, std::cerr);
  }
  if (*gc_cmd) return mpts::cmd_gradcheck(gc_seed, inject, std::cout, std::cerr);
  return mpts::cmd_curves(results_path, curves_path, std::cout, std::cerr);
}
