// Configuration-driven experiment runner: JSON config parsing, Monte-Carlo
// sweeps across pricing policies with CSV report emission, and the
// invariant battery behind the verify command.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ramplab/dispatch.hpp"
#include "ramplab/pricing.hpp"
#include "ramplab/settlement.hpp"

namespace ramplab {

inline constexpr const char* config_schema_version = "ramplab-config/1";

/**
 * One fully resolved experiment: instance, uncertainty model, sweep, and
 * reporting options.  Obtained from a JSON document via parse_config or
 * load_config; all file references are resolved at parse time.
 */
struct experiment_config {
  network net = network::single_bus();
  std::vector<generator_spec> generators;
  rolling_config rolling;

  Eigen::MatrixXd mean_profile;  // buses x (>= horizon); first horizon columns used
  double demand_std_fraction = 0.0;
  std::vector<double> sigma_fractions = {0.0};
  int num_scenarios = 1;
  std::uint64_t base_seed = 1;

  sweep_spec sweep;
  std::vector<policy_kind> policies;
  pricing_options pricing;
  settlement_options settlement;
  double check_tolerance = defaults::check_tolerance;
  std::string output_dir = "out";

  void validate() const;  // throws config_error
};

// Parses a config document.  `base_dir` resolves relative file references
// (the mean-profile CSV).  Throws config_error naming the offending field.
experiment_config parse_config(const std::string& json_text, const std::string& base_dir);

// Reads and parses a config file; relative references resolve against the
// file's directory.
experiment_config load_config(const std::string& path);

// Schema documentation for the print-schema command (a JSON document).
std::string config_schema();

// Mean demand profile CSV with columns (hour, bus, MW), hour 1-based and
// bus 0-based; every (hour, bus) cell must appear exactly once.
Eigen::MatrixXd load_mean_profile_csv(const std::string& path);

struct run_options {
  std::optional<std::string> output_dir;  // overrides the config value
  std::optional<std::uint64_t> seed;      // overrides the base seed
  int jobs = 1;                           // parallel units; results independent of it
  bool with_timestamp = true;             // "# generated ..." comment line
};

/**
 * Runs every sweep point x sigma x scenario unit under every configured
 * policy and writes six report tables into the output directory:
 * loc_vs_sweep.csv, iso_surplus.csv, consumer_payment.csv,
 * generator_profit.csv, volatility.csv, prices_raw.csv.  Raw rows carry
 * (policy, sweep, value, sigma, scenario, seed); aggregate rows use
 * "mean" / "stderr" in the scenario column.  An INCOMPLETE marker file
 * exists while the run is in flight and is removed on success, so its
 * presence after the fact signals an aborted run.
 */
void run_experiment(const experiment_config& config, const run_options& options = {});

struct verify_line {
  std::string name;
  int instances = 0;
  double max_violation = 0.0;
  bool pass = true;
};

struct verify_report {
  std::vector<verify_line> lines;
  bool all_pass() const;
};

/**
 * Invariant battery: checks the configured instance (rolling runs per
 * sigma and scenario, plus a free-boundary one-shot run on the mean
 * profile) and `random_instances` randomized small instances (up to 4
 * generators, horizon up to 6, window up to the horizon).  Prints one
 * line per check with its max relative violation to `log`.
 */
verify_report verify_experiment(const experiment_config& config, int random_instances,
                                std::ostream& log);

}  // namespace ramplab
