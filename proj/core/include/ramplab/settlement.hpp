// Money flows and performance metrics: lost-opportunity-cost uplifts,
// merchandising surplus and its congestion/ramping split, the LMP-TLMP
// revenue gap, ISO-neutral consumer payments, generator profits, and price
// volatility across scenarios.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ramplab/pricing.hpp"

namespace ramplab {

struct settlement_options {
  // Ramp limits of the profit-maximizing self-schedule: the revealed
  // (cleared) limits by default, the true limits when set.
  bool loc_uses_true_limits = false;
  // Hand congestion rent to line owners before rebating ISO surplus to
  // demand (network case); when false the whole surplus is rebated.
  bool exclude_congestion_rent = false;
};

// Self-schedule outcome for one generator under one price vector.
struct loc_result {
  double q_value = 0.0;          // optimal self-schedule surplus
  double dispatch_profit = 0.0;  // price revenue minus true cost at dispatch
  double loc = 0.0;              // q_value - dispatch_profit, >= 0
  Eigen::VectorXd self_schedule; // maximizing p
};

/**
 * Lost opportunity cost against a single-settlement price vector: the best
 * surplus any feasible schedule could earn at these prices, minus what the
 * dispatched schedule earns.  The schedule problem has free initial output,
 * capacity bounds, and ramp limits between consecutive intervals.
 */
loc_result loc(const Eigen::VectorXd& prices, const Eigen::VectorXd& dispatch,
               const generator_spec& gen, const settlement_options& options = {});

/**
 * Lost opportunity cost under the deviation-settled policy: both the best
 * and the dispatched surplus are measured against the pre-binding advisory
 * quantities, which shift them by the same constant, so the result equals
 * loc() at the final-settlement prices.  Computed directly from the ledger
 * and asserted against that identity.
 */
loc_result loc_mlmp(const rolling_trajectory& traj, const Eigen::VectorXd& lmp_prices,
                    int gen_index, const generator_spec& gen,
                    const settlement_options& options = {});

struct generator_settlement {
  std::string id;
  double revenue = 0.0;    // policy payment for delivered energy
  double loc = 0.0;        // uplift paid on top
  double true_cost = 0.0;  // cost of the realized dispatch
  double profit = 0.0;     // revenue + loc - true_cost
};

struct settlement_report {
  policy_kind policy = policy_kind::lmp;
  std::vector<generator_settlement> generators;
  double demand_payment = 0.0;
  double generator_payment = 0.0;        // sum of revenues
  double slack_settlement = 0.0;         // emergency energy bought minus sold
  double merchandising_surplus = 0.0;    // demand - generators - slack
  double congestion_rent = 0.0;          // sum over t of limits' phi[t]
  double ramping_surplus = 0.0;          // sum of (up dual * up limit + down dual * down limit)
  double total_loc = 0.0;
  double iso_surplus = 0.0;              // demand - generators - total_loc
  double adjusted_consumer_payment = 0.0;
};

// Full settlement of one trajectory under one price schedule.  Demand and
// slack settle at the schedule's demand prices; generators at their own
// prices (deviation-settled for the multi-settlement policy, which also
// uses its ledger-based uplift).
settlement_report settle(const rolling_trajectory& traj, const price_schedule& prices,
                         const network& net, const std::vector<generator_spec>& gens,
                         const settlement_options& options = {});

// Both sides of the one-shot revenue-gap identity for one generator: the
// direct payment difference between the uniform and temporal price, and the
// ramp-dual sum (up limit times summed up duals plus the symmetric down
// term).  Requires relaxed boundaries (zero boundary duals).
struct revenue_gap_result {
  double direct = 0.0;
  double formula = 0.0;
};
revenue_gap_result revenue_gap(const rolling_trajectory& traj, const network& net,
                               const std::vector<generator_spec>& gens, int gen_index);

/**
 * Normalized price dispersion across scenarios.
 *
 * Input: one (series x T) matrix per scenario; series are bus or generator
 * price rows, aligned across scenarios.  Per series and hour, the
 * population standard deviation across scenarios is divided by the
 * magnitude of the mean; hours whose mean is within `mean_epsilon` of zero
 * are flagged and reported as NaN.  per_hour averages over series, and
 * `average` over the hours that stayed finite.
 */
struct volatility_result {
  Eigen::VectorXd per_hour;           // NaN where any series was flagged
  std::vector<bool> flagged_hour;
  double average = 0.0;               // NaN if every hour was flagged
  bool any_flagged = false;
};
volatility_result price_volatility(const std::vector<Eigen::MatrixXd>& price_by_scenario,
                                   double mean_epsilon = 1e-9);

// One row per generator plus one system row.
void write_settlement_csv(std::ostream& os, const settlement_report& report);

// Aligned human-readable summary table.
std::string format_settlement_summary(const settlement_report& report);

}  // namespace ramplab
