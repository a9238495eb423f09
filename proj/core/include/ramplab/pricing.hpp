// Price systems derived from dispatch trajectories: locational marginal
// prices, their temporal (ramp-aware) variant, two separate pricing
// optimizations (price-preserving and constraint-preserving), and the
// multi-settlement revenue functional.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ramplab/dispatch.hpp"

namespace ramplab {

enum class policy_kind { lmp, tlmp, pmp, cmp, mlmp };

// Stable lowercase tag used in CSV output and config files.
std::string policy_name(policy_kind policy);
policy_kind policy_from_name(const std::string& name);  // throws config_error

/**
 * Prices for one trajectory under one policy.
 *
 * demand_price(m, t-1) is what demand at bus m pays per MWh in interval t;
 * generator_price(i, t-1) is what generator i is paid.  Uniform policies
 * (lmp, pmp, cmp) price generators at their bus's demand price.  The
 * temporal policy splits the generator price into energy, congestion and
 * ramping components whose sum reproduces generator_price exactly.  The
 * multi-settlement policy stores its final-settlement prices here, but
 * revenue must be computed through mlmp_revenue (it is not price times
 * quantity).
 */
struct price_schedule {
  policy_kind policy = policy_kind::lmp;
  Eigen::MatrixXd demand_price;                // buses x T
  Eigen::MatrixXd generator_price;             // gens x T
  Eigen::MatrixXd energy_component;            // gens x T (tlmp only, else 0x0)
  Eigen::MatrixXd congestion_component;        // gens x T
  Eigen::MatrixXd ramping_component;           // gens x T
  bool degenerate = false;
};

// Options for the separate pricing optimizations.
struct pricing_options {
  // Past decision intervals included in the price-preserving program;
  // 0 keeps the whole history.
  int pmp_past_horizon = 0;
  // Impose balance and line constraints on past intervals as well (off by
  // default: the program constrains only the look-ahead window).
  bool pmp_past_balance = false;
  // Demand used by past balance rows when enabled: realized (true) or the
  // forecast each past window cleared against (false).
  bool pmp_past_uses_realized = true;
};

// Bus prices lambda_t - S'phi[t] from the binding-interval duals; every
// generator sees its bus's price.
price_schedule lmp_prices(const rolling_trajectory& traj, const network& net,
                          const std::vector<generator_spec>& gens);

// Ramp-aware generator prices: bus price plus the change in the generator's
// ramp dual differences, (up - down at the pair t -> t+1) minus (up - down
// at the pair t-1 -> t), both taken from the window that cleared t.  The
// demand side pays the plain bus price.
price_schedule tlmp_prices(const rolling_trajectory& traj, const network& net,
                           const std::vector<generator_spec>& gens);

/**
 * Price-preserving bus prices for binding interval t.
 *
 * Minimizes total cost over all generation variables g[1 .. t+L-1] minus
 * the revenue of past intervals at their already-published prices, subject
 * to balance and line limits on the look-ahead window only and ramp/capacity
 * limits everywhere.  past_prices is (buses x t-1), window_demand
 * (buses x L), realized_demand (buses x t-1, used only by the past-balance
 * variant).  Returns lambda_t 1 - S'phi[t].
 */
Eigen::VectorXd pmp_price_at(int t, const Eigen::MatrixXd& past_prices,
                             const Eigen::MatrixXd& window_demand,
                             const Eigen::MatrixXd& realized_demand, const network& net,
                             const std::vector<generator_spec>& gens,
                             const rolling_config& config,
                             const pricing_options& options = {});

// Sequential price-preserving prices over a whole trajectory, feeding each
// interval's published price into the later programs.
price_schedule pmp_prices(const rolling_trajectory& traj, const network& net,
                          const std::vector<generator_spec>& gens,
                          const rolling_config& config,
                          const pricing_options& options = {});

/**
 * Constraint-preserving bus prices for binding interval t.
 *
 * Re-solves the window program with the realized boundary dispatch and an
 * objective surcharge (up minus down boundary ramp dual) on first-interval
 * generation, so the pricing run faces the same inter-window coupling the
 * dispatch did.  Returns lambda_t 1 - S'phi[t].
 */
Eigen::VectorXd cmp_price_at(int t, const rolling_trajectory& traj, const network& net,
                             const std::vector<generator_spec>& gens,
                             const rolling_config& config);

price_schedule cmp_prices(const rolling_trajectory& traj, const network& net,
                          const std::vector<generator_spec>& gens,
                          const rolling_config& config);

// Multi-settlement prices: the final settlement coincides with the bus
// price of the binding window, recorded here for reporting and for the
// ramp-free collapse checks.
price_schedule mlmp_prices(const rolling_trajectory& traj, const network& net,
                           const std::vector<generator_spec>& gens);

// Deviation-settled revenue of one generator for one target interval: the
// first advisory quantity at the first advisory price, plus each later
// settlement's price times the dispatch revision it introduced.  `ledger`
// is the advisory list of that interval in settlement order.
double mlmp_revenue(const std::vector<advisory_settlement>& ledger, int gen_index,
                    int bus);

// Advisory dispatch the generator carried into the final settlement (the
// next-to-last ledger entry); zero when the interval settled only once.
double mlmp_pre_binding_dispatch(const std::vector<advisory_settlement>& ledger,
                                 int gen_index);

// Deviation-settled payment of the demand at one bus for one interval,
// mirroring mlmp_revenue with forecast demand in place of dispatch.
double mlmp_demand_payment(const std::vector<advisory_settlement>& ledger, int bus);

// Dispatches to the policy's pricing function; config and options are only
// consulted by the pricing-optimization policies.
price_schedule prices_for(policy_kind policy, const rolling_trajectory& traj,
                          const network& net, const std::vector<generator_spec>& gens,
                          const rolling_config& config,
                          const pricing_options& options = {});

// Price schedule rows serialize as (policy, t, bus, generator-or-DEMAND,
// price, energy, congestion, ramping).
void write_price_csv(std::ostream& os, const price_schedule& prices, const network& net,
                     const std::vector<generator_spec>& gens);

}  // namespace ramplab
