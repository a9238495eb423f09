// Command-line front end: run a configured experiment, verify market
// invariants on it, or print the config schema.
//
// Exit codes: 0 success, 1 configuration error, 2 solver failure,
// 3 invariant violation.
#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "ramplab/experiment.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_solver = 2;
constexpr int exit_invariant = 3;

int run_command(const std::string& config_path, const ramplab::run_options& options) {
  const ramplab::experiment_config cfg = ramplab::load_config(config_path);
  ramplab::run_experiment(cfg, options);
  const std::string dir = options.output_dir.value_or(cfg.output_dir);
  std::cout << "wrote loc_vs_sweep.csv, iso_surplus.csv, consumer_payment.csv, "
               "generator_profit.csv, volatility.csv, prices_raw.csv to "
            << dir << "\n";
  return exit_ok;
}

int verify_command(const std::string& config_path, int random_instances) {
  const ramplab::experiment_config cfg = ramplab::load_config(config_path);
  const ramplab::verify_report report =
      ramplab::verify_experiment(cfg, random_instances, std::cout);
  if (report.all_pass()) {
    std::cout << "all invariants hold\n";
    return exit_ok;
  }
  std::cout << "invariant violations detected\n";
  return exit_invariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rolling-window dispatch and pricing experiments"};
  app.require_subcommand(1);

  std::string config_path;
  ramplab::run_options options;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool no_timestamp = false;
  int random_instances = 20;

  CLI::App* run = app.add_subcommand("run", "run the experiment and write CSV reports");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  CLI::Option* out_opt = run->add_option("--out", out_dir, "output directory override");
  CLI::Option* seed_opt = run->add_option("--seed", seed, "base seed override");
  run->add_option("--jobs", options.jobs, "parallel scenario runs")
      ->check(CLI::PositiveNumber);
  run->add_flag("--no-timestamp", no_timestamp,
                "omit the generated-at comment line (byte-identical reruns)");

  CLI::App* verify =
      app.add_subcommand("verify", "check market invariants on the configured instance");
  verify->add_option("config", config_path, "experiment config (JSON)")->required();
  verify->add_option("--random-instances", random_instances,
                     "randomized small instances to add to the battery")
      ->check(CLI::NonNegativeNumber);

  CLI::App* schema = app.add_subcommand("print-schema", "print the config schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? exit_ok : exit_config;
  }

  try {
    if (schema->parsed()) {
      std::cout << ramplab::config_schema() << "\n";
      return exit_ok;
    }
    if (run->parsed()) {
      if (*out_opt) options.output_dir = out_dir;
      if (*seed_opt) options.seed = seed;
      options.with_timestamp = !no_timestamp;
      return run_command(config_path, options);
    }
    return verify_command(config_path, random_instances);
  } catch (const ramplab::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const ramplab::solve_failure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return exit_solver;
  } catch (const ramplab::invariant_violation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return exit_invariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  }
}
