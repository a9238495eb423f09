#include "ramplab/pricing.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

#include "ramplab/solver.hpp"

namespace ramplab {

std::string policy_name(policy_kind policy) {
  switch (policy) {
    case policy_kind::lmp: return "lmp";
    case policy_kind::tlmp: return "tlmp";
    case policy_kind::pmp: return "pmp";
    case policy_kind::cmp: return "cmp";
    case policy_kind::mlmp: return "mlmp";
  }
  throw invalid_input("policy_name: unknown policy");
}

policy_kind policy_from_name(const std::string& name) {
  if (name == "lmp") return policy_kind::lmp;
  if (name == "tlmp") return policy_kind::tlmp;
  if (name == "pmp") return policy_kind::pmp;
  if (name == "cmp") return policy_kind::cmp;
  if (name == "mlmp") return policy_kind::mlmp;
  throw config_error("unknown pricing policy '" + name + "'");
}

namespace {

// Bus price matrix (buses x T) from the trajectory's binding duals.
Eigen::MatrixXd bus_price_matrix(const rolling_trajectory& traj, const network& net) {
  Eigen::MatrixXd prices(net.num_buses(), traj.horizon);
  for (int t = 1; t <= traj.horizon; ++t) prices.col(t - 1) = traj.bus_prices(net, t);
  return prices;
}

Eigen::MatrixXd at_generator_buses(const Eigen::MatrixXd& bus_prices,
                                   const std::vector<generator_spec>& gens) {
  Eigen::MatrixXd out(static_cast<int>(gens.size()), bus_prices.cols());
  for (size_t i = 0; i < gens.size(); ++i)
    out.row(static_cast<int>(i)) = bus_prices.row(gens[i].bus);
  return out;
}

void check_trajectory(const rolling_trajectory& traj,
                      const std::vector<generator_spec>& gens, const network& net) {
  const int n = static_cast<int>(gens.size());
  if (traj.horizon < 1) throw invalid_input("pricing: empty trajectory");
  if (traj.dispatch.rows() != n)
    throw invalid_input("pricing: trajectory generator count mismatch");
  if (traj.phi.rows() != net.num_flow_rows())
    throw invalid_input("pricing: trajectory flow-row count mismatch");
  if (traj.lambda.size() != traj.horizon || traj.ramp_up_prev.cols() != traj.horizon)
    throw invalid_input("pricing: trajectory duals incomplete");
}

}  // namespace

price_schedule lmp_prices(const rolling_trajectory& traj, const network& net,
                          const std::vector<generator_spec>& gens) {
  check_trajectory(traj, gens, net);
  price_schedule ps;
  ps.policy = policy_kind::lmp;
  ps.demand_price = bus_price_matrix(traj, net);
  ps.generator_price = at_generator_buses(ps.demand_price, gens);
  ps.degenerate = traj.any_degenerate;
  return ps;
}

price_schedule tlmp_prices(const rolling_trajectory& traj, const network& net,
                           const std::vector<generator_spec>& gens) {
  check_trajectory(traj, gens, net);
  const int n = static_cast<int>(gens.size());
  price_schedule ps;
  ps.policy = policy_kind::tlmp;
  ps.demand_price = bus_price_matrix(traj, net);
  ps.energy_component.resize(n, traj.horizon);
  ps.congestion_component.resize(n, traj.horizon);
  ps.ramping_component.resize(n, traj.horizon);
  for (int t = 0; t < traj.horizon; ++t)
    for (int i = 0; i < n; ++i) {
      ps.energy_component(i, t) = traj.lambda(t);
      ps.congestion_component(i, t) =
          ps.demand_price(gens[i].bus, t) - traj.lambda(t);
      double pair_next = traj.ramp_up_next(i, t) - traj.ramp_down_next(i, t);
      double pair_prev = traj.ramp_up_prev(i, t) - traj.ramp_down_prev(i, t);
      ps.ramping_component(i, t) = pair_next - pair_prev;
    }
  ps.generator_price =
      ps.energy_component + ps.congestion_component + ps.ramping_component;
  ps.degenerate = traj.any_degenerate;
  return ps;
}

namespace {

// Shared skeleton of the two pricing optimizations: a block of generation
// variables over `total` consecutive intervals (the trailing `window` of
// them carrying balance + line rows), chained ramp pairs throughout, and
// optional per-bus slack on balance-carrying intervals.
struct pricing_program {
  int gens = 0, buses = 0, flows = 0, total = 0, first_networked = 0;
  bool slack = false;
  convex_program prog;
  std::vector<int> balance_rows;            // per networked interval
  std::vector<int> first_flow_row;          // per networked interval

  int g(int i, int tau) const { return tau * gens + i; }
  int u(int m, int tau) const {
    return gens * total + (tau - first_networked) * buses + m;
  }
  int v(int m, int tau) const {
    return gens * total + (total - first_networked) * buses +
           (tau - first_networked) * buses + m;
  }

  pricing_program(const network& net, const std::vector<generator_spec>& gen_list,
                  int total_intervals, int first_networked_interval,
                  const Eigen::MatrixXd& networked_demand, bool slack_enabled,
                  double slack_penalty)
      : gens(static_cast<int>(gen_list.size())),
        buses(net.num_buses()),
        flows(net.num_flow_rows()),
        total(total_intervals),
        first_networked(first_networked_interval),
        slack(slack_enabled) {
    const int networked = total - first_networked;
    const int num_vars = gens * total + (slack ? 2 * buses * networked : 0);
    prog = convex_program::with_variables(num_vars);

    bool any_quadratic = false;
    for (int tau = 0; tau < total; ++tau)
      for (int i = 0; i < gens; ++i) {
        prog.cost_linear(g(i, tau)) = gen_list[i].marginal_cost;
        prog.cost_quadratic(g(i, tau)) = gen_list[i].quadratic_cost;
        if (gen_list[i].quadratic_cost > 0.0) any_quadratic = true;
        prog.set_bounds(g(i, tau), 0.0, gen_list[i].capacity);
      }
    if (slack)
      for (int tau = first_networked; tau < total; ++tau)
        for (int m = 0; m < buses; ++m) {
          prog.cost_linear(u(m, tau)) = slack_penalty;
          prog.cost_linear(v(m, tau)) = slack_penalty;
          prog.set_bounds(u(m, tau), 0.0, inf);
          prog.set_bounds(v(m, tau), 0.0, inf);
        }
    if (!any_quadratic) prog.cost_quadratic.resize(0);

    const Eigen::MatrixXd& s = net.shift_factors();
    for (int tau = first_networked; tau < total; ++tau) {
      const Eigen::VectorXd demand = networked_demand.col(tau - first_networked);
      Eigen::VectorXd row = Eigen::VectorXd::Zero(num_vars);
      for (int i = 0; i < gens; ++i) row(g(i, tau)) = 1.0;
      if (slack)
        for (int m = 0; m < buses; ++m) {
          row(u(m, tau)) = 1.0;
          row(v(m, tau)) = -1.0;
        }
      balance_rows.push_back(prog.add_equality(row, demand.sum()));
      first_flow_row.push_back(-1);
      for (int f = 0; f < flows; ++f) {
        Eigen::VectorXd frow = Eigen::VectorXd::Zero(num_vars);
        for (int i = 0; i < gens; ++i) frow(g(i, tau)) = s(f, gen_list[i].bus);
        if (slack)
          for (int m = 0; m < buses; ++m) {
            frow(u(m, tau)) = s(f, m);
            frow(v(m, tau)) = -s(f, m);
          }
        int r = prog.add_inequality(frow, net.line_limits()(f) + s.row(f).dot(demand));
        if (f == 0) first_flow_row.back() = r;
      }
    }
    for (int tau = 0; tau + 1 < total; ++tau)
      for (int i = 0; i < gens; ++i) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(num_vars);
        row(g(i, tau + 1)) = 1.0;
        row(g(i, tau)) = -1.0;
        prog.add_inequality(row, gen_list[i].cleared_ramp_up());
      }
    for (int tau = 0; tau + 1 < total; ++tau)
      for (int i = 0; i < gens; ++i) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(num_vars);
        row(g(i, tau)) = 1.0;
        row(g(i, tau + 1)) = -1.0;
        prog.add_inequality(row, gen_list[i].cleared_ramp_down());
      }
  }

  // Bus prices of networked interval `tau` from a solved program.
  Eigen::VectorXd prices_at(const network& net, const primal_dual_solution& sol,
                            int tau) const {
    const int k = tau - first_networked;
    Eigen::VectorXd p =
        Eigen::VectorXd::Constant(buses, sol.eq_duals(balance_rows[k]));
    for (int f = 0; f < flows; ++f)
      p -= net.shift_factors().row(f).transpose() *
           sol.ineq_duals(first_flow_row[k] + f);
    return p;
  }
};

primal_dual_solution solve_pricing(const convex_program& prog, int t,
                                   const char* policy, double tolerance) {
  solver_options opts;
  opts.kkt_tolerance = tolerance;
  try {
    return solve(prog, opts);
  } catch (const solve_failure& e) {
    std::ostringstream os;
    os << policy << " pricing at interval " << t << ": " << e.what();
    throw solve_failure(e.status, os.str(), e.violated_rows);
  }
}

}  // namespace

Eigen::VectorXd pmp_price_at(int t, const Eigen::MatrixXd& past_prices,
                             const Eigen::MatrixXd& window_demand,
                             const Eigen::MatrixXd& realized_demand, const network& net,
                             const std::vector<generator_spec>& gens,
                             const rolling_config& config,
                             const pricing_options& options) {
  const int n = static_cast<int>(gens.size());
  const int length = static_cast<int>(window_demand.cols());
  if (t < 1) throw invalid_input("pmp_price_at: t must be >= 1");
  if (length < 1) throw invalid_input("pmp_price_at: empty window");
  if (past_prices.cols() < t - 1)
    throw invalid_input("pmp_price_at: past prices incomplete");
  if (options.pmp_past_horizon < 0)
    throw invalid_input("pmp_price_at: negative past horizon");
  config.validate(n);

  // Past intervals kept in the program: [first_past + 1, t - 1] (1-based).
  const int kept_past =
      options.pmp_past_horizon == 0 ? t - 1 : std::min(options.pmp_past_horizon, t - 1);
  const int first_past = t - 1 - kept_past;
  const int total = kept_past + length;

  Eigen::MatrixXd networked = window_demand;
  int first_networked = kept_past;
  if (options.pmp_past_balance) {
    if (realized_demand.cols() < t - 1)
      throw invalid_input("pmp_price_at: realized demand incomplete");
    networked.resize(net.num_buses(), total);
    networked.rightCols(length) = window_demand;
    networked.leftCols(kept_past) =
        realized_demand.middleCols(first_past, kept_past);
    first_networked = 0;
  }

  pricing_program pp(net, gens, total, first_networked, networked,
                     config.slack_enabled, config.slack_penalty);
  // Past generation is credited at its published price, so the objective
  // charges cost minus revenue there.
  for (int tau = 0; tau < kept_past; ++tau)
    for (int i = 0; i < n; ++i)
      pp.prog.cost_linear(pp.g(i, tau)) -=
          past_prices(gens[i].bus, first_past + tau);

  primal_dual_solution sol =
      solve_pricing(pp.prog, t, "price-preserving", config.kkt_tolerance);
  return pp.prices_at(net, sol, kept_past);
}

price_schedule pmp_prices(const rolling_trajectory& traj, const network& net,
                          const std::vector<generator_spec>& gens,
                          const rolling_config& config,
                          const pricing_options& options) {
  check_trajectory(traj, gens, net);
  price_schedule ps;
  ps.policy = policy_kind::pmp;
  ps.demand_price.resize(net.num_buses(), traj.horizon);

  Eigen::MatrixXd realized(net.num_buses(), traj.horizon);
  for (int t = 1; t <= traj.horizon; ++t)
    realized.col(t - 1) = traj.windows[traj.one_shot_mode ? 0 : t - 1].demand.col(
        traj.one_shot_mode ? t - 1 : 0);

  if (traj.one_shot_mode) {
    // A single full-horizon clearing has no past intervals: the program at
    // t = 1 is the dispatch program itself, priced across its window.
    const window_solution& ws = traj.windows[0];
    pricing_program pp(net, gens, ws.length, 0, ws.demand, config.slack_enabled,
                       config.slack_penalty);
    primal_dual_solution sol =
        solve_pricing(pp.prog, 1, "price-preserving", config.kkt_tolerance);
    for (int t = 0; t < traj.horizon; ++t)
      ps.demand_price.col(t) = pp.prices_at(net, sol, t);
    ps.degenerate = sol.degenerate;
  } else {
    for (int t = 1; t <= traj.horizon; ++t) {
      const window_solution& ws = traj.windows[t - 1];
      ps.demand_price.col(t - 1) =
          pmp_price_at(t, ps.demand_price.leftCols(t - 1), ws.demand, realized, net,
                       gens, config, options);
    }
  }
  ps.generator_price = at_generator_buses(ps.demand_price, gens);
  return ps;
}

Eigen::VectorXd cmp_price_at(int t, const rolling_trajectory& traj, const network& net,
                             const std::vector<generator_spec>& gens,
                             const rolling_config& config) {
  check_trajectory(traj, gens, net);
  if (t < 1 || t > traj.horizon) throw invalid_input("cmp_price_at: t out of range");
  const int n = static_cast<int>(gens.size());
  const window_solution& ws = traj.windows[t - 1];

  pricing_program pp(net, gens, ws.length, 0, ws.demand, config.slack_enabled,
                     config.slack_penalty);
  // Surcharge first-interval generation with the boundary ramp dual gap the
  // dispatch saw, then re-impose the boundary pair itself.
  for (int i = 0; i < n; ++i)
    pp.prog.cost_linear(pp.g(i, 0)) +=
        traj.ramp_up_prev(i, t - 1) - traj.ramp_down_prev(i, t - 1);
  std::optional<Eigen::VectorXd> previous;
  if (t >= 2)
    previous = traj.dispatch.col(t - 2);
  else if (config.initial_dispatch)
    previous = config.initial_dispatch;
  if (previous) {
    const int num_vars = static_cast<int>(pp.prog.cost_linear.size());
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(num_vars);
      row(pp.g(i, 0)) = 1.0;
      pp.prog.add_inequality(row, (*previous)(i) + gens[i].cleared_ramp_up());
    }
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(num_vars);
      row(pp.g(i, 0)) = -1.0;
      pp.prog.add_inequality(row, gens[i].cleared_ramp_down() - (*previous)(i));
    }
  }
  primal_dual_solution sol =
      solve_pricing(pp.prog, t, "constraint-preserving", config.kkt_tolerance);
  return pp.prices_at(net, sol, 0);
}

price_schedule cmp_prices(const rolling_trajectory& traj, const network& net,
                          const std::vector<generator_spec>& gens,
                          const rolling_config& config) {
  check_trajectory(traj, gens, net);
  price_schedule ps;
  ps.policy = policy_kind::cmp;
  ps.demand_price.resize(net.num_buses(), traj.horizon);
  if (traj.one_shot_mode) {
    // One clearing, relaxed boundary, zero boundary duals: the pricing
    // program is the dispatch program over the full horizon.
    const window_solution& ws = traj.windows[0];
    pricing_program pp(net, gens, ws.length, 0, ws.demand, config.slack_enabled,
                       config.slack_penalty);
    if (config.initial_dispatch) {
      const int num_vars = static_cast<int>(pp.prog.cost_linear.size());
      for (int i = 0; i < static_cast<int>(gens.size()); ++i) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(num_vars);
        row(pp.g(i, 0)) = 1.0;
        pp.prog.add_inequality(row, (*config.initial_dispatch)(i) +
                                        gens[i].cleared_ramp_up());
        row(pp.g(i, 0)) = -1.0;
        pp.prog.add_inequality(row, gens[i].cleared_ramp_down() -
                                        (*config.initial_dispatch)(i));
      }
    }
    primal_dual_solution sol =
        solve_pricing(pp.prog, 1, "constraint-preserving", config.kkt_tolerance);
    for (int t = 0; t < traj.horizon; ++t)
      ps.demand_price.col(t) = pp.prices_at(net, sol, t);
    ps.degenerate = sol.degenerate;
  } else {
    for (int t = 1; t <= traj.horizon; ++t)
      ps.demand_price.col(t - 1) = cmp_price_at(t, traj, net, gens, config);
  }
  ps.generator_price = at_generator_buses(ps.demand_price, gens);
  return ps;
}

price_schedule mlmp_prices(const rolling_trajectory& traj, const network& net,
                           const std::vector<generator_spec>& gens) {
  price_schedule ps = lmp_prices(traj, net, gens);
  ps.policy = policy_kind::mlmp;
  return ps;
}

double mlmp_revenue(const std::vector<advisory_settlement>& ledger, int gen_index,
                    int bus) {
  if (ledger.empty()) throw invalid_input("mlmp_revenue: empty advisory ledger");
  double revenue = 0.0;
  double settled = 0.0;
  for (const advisory_settlement& adv : ledger) {
    revenue += adv.bus_price(bus) * (adv.gen_dispatch(gen_index) - settled);
    settled = adv.gen_dispatch(gen_index);
  }
  return revenue;
}

double mlmp_pre_binding_dispatch(const std::vector<advisory_settlement>& ledger,
                                 int gen_index) {
  if (ledger.empty()) throw invalid_input("mlmp_pre_binding_dispatch: empty ledger");
  if (ledger.size() < 2) return 0.0;
  return ledger[ledger.size() - 2].gen_dispatch(gen_index);
}

double mlmp_demand_payment(const std::vector<advisory_settlement>& ledger, int bus) {
  if (ledger.empty()) throw invalid_input("mlmp_demand_payment: empty ledger");
  double payment = 0.0;
  double settled = 0.0;
  for (const advisory_settlement& adv : ledger) {
    payment += adv.bus_price(bus) * (adv.bus_demand(bus) - settled);
    settled = adv.bus_demand(bus);
  }
  return payment;
}

price_schedule prices_for(policy_kind policy, const rolling_trajectory& traj,
                          const network& net, const std::vector<generator_spec>& gens,
                          const rolling_config& config, const pricing_options& options) {
  switch (policy) {
    case policy_kind::lmp:
      return lmp_prices(traj, net, gens);
    case policy_kind::tlmp:
      return tlmp_prices(traj, net, gens);
    case policy_kind::pmp:
      return pmp_prices(traj, net, gens, config, options);
    case policy_kind::cmp:
      return cmp_prices(traj, net, gens, config);
    case policy_kind::mlmp:
      return mlmp_prices(traj, net, gens);
  }
  throw invalid_input("prices_for: unknown policy");
}

void write_price_csv(std::ostream& os, const price_schedule& prices, const network& net,
                     const std::vector<generator_spec>& gens) {
  os << "policy,t,bus,participant,price,energy,congestion,ramping\n";
  const std::string tag = policy_name(prices.policy);
  char buf[64];
  auto put = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.10g", x);
    os << ',' << buf;
  };
  const bool split = prices.energy_component.size() > 0;
  for (int t = 1; t <= static_cast<int>(prices.demand_price.cols()); ++t) {
    for (int m = 0; m < net.num_buses(); ++m) {
      os << tag << ',' << t << ',' << net.bus_labels()[m] << ",DEMAND";
      put(prices.demand_price(m, t - 1));
      os << ",,,\n";
    }
    for (size_t i = 0; i < gens.size(); ++i) {
      const int gi = static_cast<int>(i);
      os << tag << ',' << t << ',' << net.bus_labels()[gens[i].bus] << ','
         << gens[i].id;
      put(prices.generator_price(gi, t - 1));
      if (split) {
        put(prices.energy_component(gi, t - 1));
        put(prices.congestion_component(gi, t - 1));
        put(prices.ramping_component(gi, t - 1));
      } else {
        os << ",,,";
      }
      os << '\n';
    }
  }
}

}  // namespace ramplab
