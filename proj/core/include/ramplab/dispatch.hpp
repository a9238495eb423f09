// Rolling-window economic dispatch over a transmission network with
// inter-interval ramp coupling, plus the one-shot full-horizon benchmark.
#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ramplab/generator.hpp"
#include "ramplab/network.hpp"
#include "ramplab/scenario.hpp"
#include "ramplab/solver.hpp"

namespace ramplab {

enum class horizon_end {
  shrink,         // final windows cover only the intervals left in the horizon
  hold_forecast,  // windows keep full length, repeating the last forecast
};

struct rolling_config {
  int horizon = 24;
  int window = 1;
  // Ramp anchor for the first interval; unset means the t=1 boundary
  // constraint is dropped (free initial condition).
  std::optional<Eigen::VectorXd> initial_dispatch;
  horizon_end end_mode = horizon_end::shrink;
  // Per-bus emergency injection/curtailment variables keep windows feasible
  // when ramp limits cannot track a demand swing; disabled by default so
  // infeasibility surfaces as an error instead of a price spike.
  bool slack_enabled = false;
  double slack_penalty = defaults::slack_penalty;
  double kkt_tolerance = defaults::kkt_tolerance;

  void validate(int num_generators) const;
};

// One clearing of the look-ahead program at binding interval `start`,
// covering `length` consecutive intervals.  Column tau (0-based) of every
// matrix belongs to interval start + tau.
struct window_solution {
  int start = 1;
  int length = 0;
  Eigen::MatrixXd demand;              // buses x length, as cleared against
  Eigen::MatrixXd dispatch;            // gens x length
  Eigen::VectorXd lambda;              // per-interval system balance price
  Eigen::MatrixXd phi;                 // flow_rows x length, >= 0
  Eigen::MatrixXd ramp_up_duals;       // gens x (length-1), pair tau -> tau+1
  Eigen::MatrixXd ramp_down_duals;     // gens x (length-1)
  Eigen::VectorXd boundary_up_duals;   // gens; ramp pair against the realized
  Eigen::VectorXd boundary_down_duals; //   previous dispatch (zero if free)
  Eigen::MatrixXd capacity_up_duals;   // gens x length
  Eigen::MatrixXd capacity_down_duals;
  Eigen::MatrixXd slack_injection;     // buses x length (zero when disabled)
  Eigen::MatrixXd slack_curtailment;
  double objective = 0.0;        // cleared objective incl. slack penalties
  double generation_cost = 0.0;  // generator cost terms only
  bool degenerate = false;
  bool slack_active = false;
  kkt_residuals kkt;

  // Bus price vector lambda - S'phi for in-window interval tau.
  Eigen::VectorXd bus_prices(const network& net, int tau) const;
};

// One advisory settlement for a target interval: the price and dispatch a
// window published for that interval when it was still in the look-ahead.
struct advisory_settlement {
  int settled_at = 0;            // binding interval of the publishing window
  Eigen::VectorXd bus_price;     // per bus
  Eigen::VectorXd gen_dispatch;  // per generator
  Eigen::VectorXd bus_demand;    // forecast demand the window cleared against
};

// Realized trajectory of sequential window clearings.
//
// Pair-dual conventions, chosen so downstream pricing never has to know
// which mode produced the trajectory:
//   ramp_*_prev col t-1 holds the (t-1 -> t) ramp pair duals used when
//     interval t was binding (the boundary duals of window t when rolling,
//     the in-solve pair duals in one-shot mode; zero at a free t=1);
//   ramp_*_next col t-1 holds the (t -> t+1) pair duals from the same
//     solve (zero when the window did not reach past t).
struct rolling_trajectory {
  int horizon = 0;
  bool one_shot_mode = false;
  Eigen::MatrixXd dispatch;  // gens x T realized
  Eigen::VectorXd lambda;    // T
  Eigen::MatrixXd phi;       // flow_rows x T
  Eigen::MatrixXd ramp_up_prev, ramp_down_prev;
  Eigen::MatrixXd ramp_up_next, ramp_down_next;
  Eigen::MatrixXd slack_injection, slack_curtailment;  // buses x T realized
  // advisories[t-1]: settlements published for interval t in chronological
  // order; the last entry is the binding clearing of interval t itself.
  std::vector<std::vector<advisory_settlement>> advisories;
  std::vector<window_solution> windows;  // per binding interval (one if one-shot)
  double total_generation_cost = 0.0;    // realized sum of generator costs
  bool any_degenerate = false;
  bool slack_used = false;
  std::vector<int> slack_intervals;

  Eigen::VectorXd bus_prices(const network& net, int t) const;  // lambda - S'phi
};

// Clear one look-ahead window.  demand_forecast is (buses x length) with
// column 0 the binding interval's demand; previous_dispatch anchors the
// boundary ramp pair (unset = free).  Throws solve_failure on infeasible
// windows (only possible with slack disabled).
window_solution solve_window(int start, const std::optional<Eigen::VectorXd>& previous_dispatch,
                             const Eigen::MatrixXd& demand_forecast, const network& net,
                             const std::vector<generator_spec>& gens,
                             const rolling_config& config);

// Sequential clearing: at each t solve the window on forecasts made at t,
// commit the binding interval, and chain the realized dispatch into the
// next boundary constraint.
rolling_trajectory run_rolling(const demand_scenario& scenario, const network& net,
                               const std::vector<generator_spec>& gens,
                               const rolling_config& config);

// Full-horizon clearing under perfect foresight of `actual_demand`
// (buses x T): a single solve whose per-interval duals fill the same
// trajectory layout.  Equivalent to rolling with window = horizon and
// perfect forecasts, but all duals come from one optimal basis, which the
// cross-window price identities assume.
rolling_trajectory one_shot(const Eigen::MatrixXd& actual_demand, const network& net,
                            const std::vector<generator_spec>& gens,
                            const rolling_config& config);

// One row per (interval, generator): realized dispatch, balance price, bus
// price, the (t-1 -> t) ramp pair duals, and slack/degeneracy flags.
void write_trajectory_csv(std::ostream& os, const rolling_trajectory& traj,
                          const network& net, const std::vector<generator_spec>& gens);

}  // namespace ramplab
