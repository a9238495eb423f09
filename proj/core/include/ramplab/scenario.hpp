// Demand uncertainty model: actual demand traces, rolling forecasts built
// from per-(target, origin) error draws, and sweep grids over ramp limits,
// revealed limits, forecast accuracy, or line capacity.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ramplab/common.hpp"
#include "ramplab/generator.hpp"
#include "ramplab/network.hpp"

namespace ramplab {

/**
 * Deterministic random stream with bit-portable output.
 *
 * The engine is std::mt19937_64, whose bit stream the language standard
 * pins down exactly; the uniform and normal mappings are implemented here
 * (top 53 bits, Box-Muller without a cached spare) because the standard
 * library distributions are not portable.  Stream splitting hashes a
 * (base_seed, path...) chain with splitmix64 so per-scenario and
 * per-purpose streams are independent.
 */
class rng {
public:
  explicit rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01();  // in (0, 1]
  double normal();     // standard normal, two uniforms per draw

  static std::uint64_t derive(std::uint64_t base,
                              std::initializer_list<std::uint64_t> path);

private:
  std::mt19937_64 engine_;
};

/**
 * One Monte-Carlo draw of a demand horizon.
 *
 * actual(m, t-1) is the realized demand of bus m at interval t (1-based).
 * A forecast made at interval t for target tau = t+k accumulates one error
 * draw per remaining origin,
 *
 *   forecast(t, k) = actual(tau) + sum_{s=t}^{tau-1} innovation(tau, s),
 *
 * so the k-step-ahead error variance is k times the one-step variance and
 * re-forecasts of the same target shed exactly one innovation per step.
 * forecast(t, 0) is the realized demand itself (perfect at the binding
 * interval).  All demands clamp at zero; `clamped` records if that fired.
 */
struct demand_scenario {
  std::uint64_t base_seed = 0;
  int scenario_index = 0;
  double demand_std_fraction = 0.0;
  double sigma_fraction = 0.0;  // one-step error std, fraction of mean
  Eigen::MatrixXd mean;         // buses x T
  Eigen::MatrixXd actual;       // buses x T
  // innovations[tau-1] is (buses x max_lead); column j holds the error that
  // origin tau-1-j contributes to target tau (zero where origin < 1).
  std::vector<Eigen::MatrixXd> innovations;
  int max_lead = 0;
  bool clamped = false;

  int horizon() const { return static_cast<int>(mean.cols()); }
  int num_buses() const { return static_cast<int>(mean.rows()); }
  Eigen::VectorXd forecast(int t, int k) const;
};

// Draws actual demand (mean * (1 + demand_std_fraction * xi)) and the
// forecast-error table (sigma_fraction * mean * z per origin).  The draw
// order is fixed and the raw draws do not depend on either fraction, so
// scenarios with equal (base_seed, scenario_index) share actual demand
// traces exactly across a sigma sweep (common random numbers).
demand_scenario generate_scenario(std::uint64_t base_seed, int scenario_index,
                                  const Eigen::MatrixXd& mean_profile,
                                  double demand_std_fraction, double sigma_fraction,
                                  int max_lead);

// ---- sweep grids ----

enum class sweep_kind { none, ramp_path, revelation, sigma, line_capacity };

// One ramp-limit setting: symmetric up/down limits per generator id; ids
// not listed keep their base limits.
struct ramp_path_point {
  std::string label;
  std::vector<std::pair<std::string, double>> ramp_by_gen;
};

struct sweep_spec {
  sweep_kind kind = sweep_kind::none;
  std::vector<ramp_path_point> ramp_path;
  std::string revelation_generator;     // whose revealed limits vary
  std::vector<double> revelation_grid;  // revealed symmetric ramp limits
  std::vector<double> sigma_grid;
  int line_index = 0;                   // which line's capacity varies
  std::vector<double> line_capacity_grid;
};

// Everything that varies across one sweep point.  `generators` carry the
// point's (possibly revealed) ramp limits; sigma_override replaces the
// scenario accuracy on sigma sweeps and is negative otherwise.
struct experiment_point {
  std::string label;
  double value = 0.0;
  std::vector<generator_spec> generators;
  network net;
  double sigma_override = -1.0;
};

// Expands a sweep spec against the base instance.  A `none` sweep yields
// the single base point labelled "base".
std::vector<experiment_point> build_sweep(const sweep_spec& spec,
                                          const std::vector<generator_spec>& gens,
                                          const network& net);

// Scenario dump, one row per (t, bus): actual demand then the forecasts
// d_hat(t+k | t) for k = 1..max_lead that stay inside the horizon.
void write_scenario_csv(std::ostream& os, const demand_scenario& scenario,
                        const network& net);

}  // namespace ramplab
