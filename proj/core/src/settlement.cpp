#include "ramplab/settlement.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "ramplab/solver.hpp"

namespace ramplab {

namespace {

// Self-schedule program: minimize sum_t (f(p_t) - pi_t p_t) over capacity
// and ramp limits, free initial output.  Returns the solved program's
// solution; the caller negates the objective to get the surplus.
primal_dual_solution solve_self_schedule(const Eigen::VectorXd& prices,
                                         const generator_spec& gen,
                                         bool use_true_limits) {
  const int horizon = static_cast<int>(prices.size());
  const double up = use_true_limits ? gen.ramp_up : gen.cleared_ramp_up();
  const double down = use_true_limits ? gen.ramp_down : gen.cleared_ramp_down();
  convex_program prog = convex_program::with_variables(horizon);
  for (int t = 0; t < horizon; ++t) {
    prog.cost_linear(t) = gen.marginal_cost - prices(t);
    prog.cost_quadratic(t) = gen.quadratic_cost;
    prog.set_bounds(t, 0.0, gen.capacity);
  }
  if (gen.quadratic_cost == 0.0) prog.cost_quadratic.resize(0);
  for (int t = 0; t + 1 < horizon; ++t) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(horizon);
    row(t + 1) = 1.0;
    row(t) = -1.0;
    prog.add_inequality(row, up);
    row(t + 1) = -1.0;
    row(t) = 1.0;
    prog.add_inequality(row, down);
  }
  try {
    return solve(prog);
  } catch (const solve_failure& e) {
    throw solve_failure(e.status,
                        std::string("self-schedule for ") + gen.id + ": " + e.what(),
                        e.violated_rows);
  }
}

double true_cost_of(const Eigen::VectorXd& dispatch, const generator_spec& gen) {
  double cost = 0.0;
  for (int t = 0; t < dispatch.size(); ++t) cost += gen.cost_at(dispatch(t));
  return cost;
}

Eigen::VectorXd realized_demand_at(const rolling_trajectory& traj, int t) {
  if (traj.one_shot_mode) return traj.windows[0].demand.col(t - 1);
  return traj.windows[t - 1].demand.col(0);
}

}  // namespace

loc_result loc(const Eigen::VectorXd& prices, const Eigen::VectorXd& dispatch,
               const generator_spec& gen, const settlement_options& options) {
  if (prices.size() != dispatch.size())
    throw invalid_input("loc: price and dispatch horizons differ");
  if (prices.size() == 0) throw invalid_input("loc: empty horizon");
  primal_dual_solution sol =
      solve_self_schedule(prices, gen, options.loc_uses_true_limits);
  loc_result r;
  r.q_value = -sol.objective;
  r.self_schedule = sol.x;
  r.dispatch_profit = prices.dot(dispatch) - true_cost_of(dispatch, gen);
  r.loc = r.q_value - r.dispatch_profit;
  return r;
}

loc_result loc_mlmp(const rolling_trajectory& traj, const Eigen::VectorXd& lmp_prices,
                    int gen_index, const generator_spec& gen,
                    const settlement_options& options) {
  const int horizon = traj.horizon;
  if (lmp_prices.size() != horizon)
    throw invalid_input("loc_mlmp: price horizon mismatch");

  // Deviation-settled surpluses subtract the pre-binding advisory quantity
  // from both the candidate schedule and the dispatch.
  Eigen::VectorXd pre_binding(horizon);
  for (int t = 1; t <= horizon; ++t)
    pre_binding(t - 1) = mlmp_pre_binding_dispatch(traj.advisories[t - 1], gen_index);

  primal_dual_solution sol =
      solve_self_schedule(lmp_prices, gen, options.loc_uses_true_limits);
  const double settled_constant = lmp_prices.dot(pre_binding);
  const Eigen::VectorXd dispatch = traj.dispatch.row(gen_index).transpose();

  loc_result r;
  r.self_schedule = sol.x;
  r.q_value = -sol.objective - settled_constant;
  r.dispatch_profit =
      lmp_prices.dot(dispatch) - settled_constant - true_cost_of(dispatch, gen);
  r.loc = r.q_value - r.dispatch_profit;

  loc_result single = loc(lmp_prices, dispatch, gen, options);
  const double scale = 1.0 + std::abs(single.loc);
  if (std::abs(r.loc - single.loc) > defaults::check_tolerance * scale)
    throw invariant_violation(
        "deviation-settled uplift diverged from the single-settlement uplift for " +
        gen.id);
  return r;
}

settlement_report settle(const rolling_trajectory& traj, const price_schedule& prices,
                         const network& net, const std::vector<generator_spec>& gens,
                         const settlement_options& options) {
  const int n = static_cast<int>(gens.size());
  const int horizon = traj.horizon;
  if (prices.demand_price.cols() != horizon || prices.generator_price.rows() != n)
    throw invalid_input("settle: price schedule does not match the trajectory");

  settlement_report rep;
  rep.policy = prices.policy;
  rep.generators.resize(n);

  for (int t = 1; t <= horizon; ++t) {
    const Eigen::VectorXd d = realized_demand_at(traj, t);
    for (int m = 0; m < net.num_buses(); ++m) {
      if (prices.policy == policy_kind::mlmp)
        rep.demand_payment += mlmp_demand_payment(traj.advisories[t - 1], m);
      else
        rep.demand_payment += prices.demand_price(m, t - 1) * d(m);
      rep.slack_settlement +=
          prices.demand_price(m, t - 1) *
          (traj.slack_injection(m, t - 1) - traj.slack_curtailment(m, t - 1));
    }
    if (net.num_flow_rows() > 0)
      rep.congestion_rent += net.line_limits().dot(traj.phi.col(t - 1));
    for (int i = 0; i < n; ++i)
      rep.ramping_surplus +=
          traj.ramp_up_prev(i, t - 1) * gens[i].cleared_ramp_up() +
          traj.ramp_down_prev(i, t - 1) * gens[i].cleared_ramp_down();
  }

  for (int i = 0; i < n; ++i) {
    generator_settlement& gs = rep.generators[i];
    gs.id = gens[i].id;
    const Eigen::VectorXd dispatch = traj.dispatch.row(i).transpose();
    if (prices.policy == policy_kind::mlmp) {
      for (int t = 1; t <= horizon; ++t)
        gs.revenue += mlmp_revenue(traj.advisories[t - 1], i, gens[i].bus);
      gs.loc = loc_mlmp(traj, prices.generator_price.row(i).transpose(), i, gens[i],
                        options)
                   .loc;
    } else {
      gs.revenue = prices.generator_price.row(i).dot(dispatch.transpose());
      gs.loc =
          loc(prices.generator_price.row(i).transpose(), dispatch, gens[i], options)
              .loc;
    }
    gs.true_cost = true_cost_of(dispatch, gens[i]);
    gs.profit = gs.revenue + gs.loc - gs.true_cost;
    rep.generator_payment += gs.revenue;
    rep.total_loc += gs.loc;
  }

  rep.merchandising_surplus =
      rep.demand_payment - rep.generator_payment - rep.slack_settlement;
  rep.iso_surplus = rep.demand_payment - rep.generator_payment - rep.total_loc;
  rep.adjusted_consumer_payment =
      rep.demand_payment -
      (rep.iso_surplus -
       (options.exclude_congestion_rent ? rep.congestion_rent : 0.0));
  return rep;
}

revenue_gap_result revenue_gap(const rolling_trajectory& traj, const network& net,
                               const std::vector<generator_spec>& gens, int gen_index) {
  if (!traj.one_shot_mode)
    throw invalid_input("revenue_gap: defined for one-shot trajectories");
  if (gen_index < 0 || gen_index >= static_cast<int>(gens.size()))
    throw invalid_input("revenue_gap: generator index out of range");
  if (traj.ramp_up_prev.col(0).cwiseAbs().maxCoeff() > 0.0 ||
      traj.ramp_down_prev.col(0).cwiseAbs().maxCoeff() > 0.0)
    throw invalid_input("revenue_gap: boundary ramp duals are nonzero");

  price_schedule uniform = lmp_prices(traj, net, gens);
  price_schedule temporal = tlmp_prices(traj, net, gens);
  const Eigen::VectorXd dispatch = traj.dispatch.row(gen_index).transpose();

  revenue_gap_result r;
  r.direct = (uniform.generator_price.row(gen_index) -
              temporal.generator_price.row(gen_index))
                 .dot(dispatch.transpose());
  r.formula =
      gens[gen_index].cleared_ramp_up() * traj.ramp_up_next.row(gen_index).sum() +
      gens[gen_index].cleared_ramp_down() * traj.ramp_down_next.row(gen_index).sum();
  return r;
}

volatility_result price_volatility(const std::vector<Eigen::MatrixXd>& price_by_scenario,
                                   double mean_epsilon) {
  const int scenarios = static_cast<int>(price_by_scenario.size());
  if (scenarios < 2)
    throw invalid_input("price_volatility: need at least two scenarios");
  const Eigen::Index series = price_by_scenario[0].rows();
  const Eigen::Index horizon = price_by_scenario[0].cols();
  for (const Eigen::MatrixXd& m : price_by_scenario)
    if (m.rows() != series || m.cols() != horizon)
      throw invalid_input("price_volatility: scenario matrices differ in shape");

  volatility_result res;
  res.per_hour = Eigen::VectorXd::Zero(horizon);
  res.flagged_hour.assign(horizon, false);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (Eigen::Index t = 0; t < horizon; ++t) {
    double hour_sum = 0.0;
    bool hour_ok = true;
    for (Eigen::Index s = 0; s < series; ++s) {
      double mean = 0.0;
      for (const Eigen::MatrixXd& m : price_by_scenario) mean += m(s, t);
      mean /= scenarios;
      double var = 0.0;
      for (const Eigen::MatrixXd& m : price_by_scenario) {
        const double dev = m(s, t) - mean;
        var += dev * dev;
      }
      var /= scenarios;  // population convention
      if (std::abs(mean) <= mean_epsilon) {
        hour_ok = false;
        break;
      }
      hour_sum += std::sqrt(var) / std::abs(mean);
    }
    if (hour_ok) {
      res.per_hour(t) = hour_sum / static_cast<double>(series);
    } else {
      res.per_hour(t) = nan;
      res.flagged_hour[t] = true;
      res.any_flagged = true;
    }
  }

  double total = 0.0;
  int valid = 0;
  for (Eigen::Index t = 0; t < horizon; ++t)
    if (!res.flagged_hour[t]) {
      total += res.per_hour(t);
      ++valid;
    }
  res.average = valid > 0 ? total / valid : nan;
  return res;
}

void write_settlement_csv(std::ostream& os, const settlement_report& report) {
  char buf[64];
  auto money = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return std::string(buf);
  };
  os << "policy,row,revenue,loc,true_cost,profit\n";
  const std::string tag = policy_name(report.policy);
  for (const generator_settlement& gs : report.generators)
    os << tag << ',' << gs.id << ',' << money(gs.revenue) << ',' << money(gs.loc)
       << ',' << money(gs.true_cost) << ',' << money(gs.profit) << '\n';
  os << tag << ",SYSTEM," << money(report.demand_payment) << ','
     << money(report.total_loc) << ",," << money(report.merchandising_surplus)
     << '\n';
}

std::string format_settlement_summary(const settlement_report& report) {
  std::ostringstream os;
  char line[160];
  os << "policy: " << policy_name(report.policy) << '\n';
  std::snprintf(line, sizeof line, "%-14s %12s %10s %12s %12s\n", "generator",
                "revenue", "loc", "true_cost", "profit");
  os << line;
  for (const generator_settlement& gs : report.generators) {
    std::snprintf(line, sizeof line, "%-14s %12.2f %10.2f %12.2f %12.2f\n",
                  gs.id.c_str(), gs.revenue, gs.loc, gs.true_cost, gs.profit);
    os << line;
  }
  std::snprintf(line, sizeof line,
                "demand payment %.2f, MS %.2f, congestion rent %.2f, ramping "
                "surplus %.2f\n",
                report.demand_payment, report.merchandising_surplus,
                report.congestion_rent, report.ramping_surplus);
  os << line;
  std::snprintf(line, sizeof line,
                "total LOC %.2f, ISO surplus %.2f, adjusted consumer payment %.2f\n",
                report.total_loc, report.iso_surplus,
                report.adjusted_consumer_payment);
  os << line;
  return os.str();
}

}  // namespace ramplab
