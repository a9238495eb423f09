#include "ramplab/dispatch.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace ramplab {

void rolling_config::validate(int num_generators) const {
  if (horizon < 1) throw invalid_input("rolling_config: horizon must be >= 1");
  if (window < 1) throw invalid_input("rolling_config: window must be >= 1");
  if (initial_dispatch && initial_dispatch->size() != num_generators)
    throw invalid_input("rolling_config: initial_dispatch needs one entry per generator");
  if (slack_penalty <= 0.0) throw invalid_input("rolling_config: slack penalty must be > 0");
  if (kkt_tolerance <= 0.0) throw invalid_input("rolling_config: tolerance must be > 0");
}

Eigen::VectorXd window_solution::bus_prices(const network& net, int tau) const {
  if (tau < 0 || tau >= length) throw invalid_input("bus_prices: interval outside window");
  Eigen::VectorXd p = Eigen::VectorXd::Constant(net.num_buses(), lambda(tau));
  if (net.num_flow_rows() > 0) p -= net.shift_factors().transpose() * phi.col(tau);
  return p;
}

Eigen::VectorXd rolling_trajectory::bus_prices(const network& net, int t) const {
  if (t < 1 || t > horizon) throw invalid_input("bus_prices: interval outside horizon");
  Eigen::VectorXd p = Eigen::VectorXd::Constant(net.num_buses(), lambda(t - 1));
  if (net.num_flow_rows() > 0) p -= net.shift_factors().transpose() * phi.col(t - 1);
  return p;
}

namespace {

// Column layout of a window program: generation interval-major, then (when
// slack is enabled) per-bus injection u and curtailment v, also
// interval-major.  Row layout: balance equalities per interval, then flow
// rows per interval, ramp-up pairs, ramp-down pairs, boundary pair.
struct window_layout {
  int gens = 0, buses = 0, flows = 0, length = 0;
  bool slack = false;
  int g(int i, int tau) const { return tau * gens + i; }
  int u(int m, int tau) const { return gens * length + tau * buses + m; }
  int v(int m, int tau) const { return gens * length + buses * length + tau * buses + m; }
  int num_vars() const { return gens * length + (slack ? 2 * buses * length : 0); }
  int flow_row(int f, int tau) const { return tau * flows + f; }
  int ramp_up_row(int i, int tau) const { return flows * length + tau * gens + i; }
  int ramp_down_row(int i, int tau) const {
    return flows * length + gens * (length - 1) + tau * gens + i;
  }
  int boundary_up_row(int i) const {
    return flows * length + 2 * gens * (length - 1) + i;
  }
  int boundary_down_row(int i) const { return boundary_up_row(i) + gens; }
};

}  // namespace

window_solution solve_window(int start, const std::optional<Eigen::VectorXd>& previous_dispatch,
                             const Eigen::MatrixXd& demand_forecast, const network& net,
                             const std::vector<generator_spec>& gens,
                             const rolling_config& config) {
  const int n = static_cast<int>(gens.size());
  const int buses = net.num_buses();
  const int flows = net.num_flow_rows();
  const int length = static_cast<int>(demand_forecast.cols());
  if (n == 0) throw invalid_input("solve_window: no generators");
  if (start < 1) throw invalid_input("solve_window: start must be >= 1");
  if (length < 1) throw invalid_input("solve_window: empty window");
  if (demand_forecast.rows() != buses)
    throw invalid_input("solve_window: demand rows != bus count");
  if ((demand_forecast.array() < 0.0).any())
    throw invalid_input("solve_window: negative demand");
  if (previous_dispatch && previous_dispatch->size() != n)
    throw invalid_input("solve_window: previous dispatch needs one entry per generator");
  for (const generator_spec& g : gens) g.validate(buses);
  config.validate(n);

  window_layout lay{n, buses, flows, length, config.slack_enabled};
  convex_program prog = convex_program::with_variables(lay.num_vars());

  bool any_quadratic = false;
  for (int tau = 0; tau < length; ++tau)
    for (int i = 0; i < n; ++i) {
      const generator_spec& g = gens[i];
      prog.cost_linear(lay.g(i, tau)) = g.marginal_cost;
      prog.cost_quadratic(lay.g(i, tau)) = g.quadratic_cost;
      if (g.quadratic_cost > 0.0) any_quadratic = true;
      prog.set_bounds(lay.g(i, tau), 0.0, g.capacity);
    }
  if (config.slack_enabled)
    for (int tau = 0; tau < length; ++tau)
      for (int m = 0; m < buses; ++m) {
        prog.cost_linear(lay.u(m, tau)) = config.slack_penalty;
        prog.cost_linear(lay.v(m, tau)) = config.slack_penalty;
        prog.set_bounds(lay.u(m, tau), 0.0, inf);
        prog.set_bounds(lay.v(m, tau), 0.0, inf);
      }
  if (!any_quadratic) prog.cost_quadratic.resize(0);

  // System-wide balance per interval; the dual is the balance price.
  for (int tau = 0; tau < length; ++tau) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(lay.num_vars());
    for (int i = 0; i < n; ++i) row(lay.g(i, tau)) = 1.0;
    if (config.slack_enabled)
      for (int m = 0; m < buses; ++m) {
        row(lay.u(m, tau)) = 1.0;
        row(lay.v(m, tau)) = -1.0;
      }
    prog.add_equality(row, demand_forecast.col(tau).sum());
  }

  // Directed line flows S (q + u - v - d) <= limits.
  const Eigen::MatrixXd& s = net.shift_factors();
  for (int tau = 0; tau < length; ++tau)
    for (int f = 0; f < flows; ++f) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(lay.num_vars());
      for (int i = 0; i < n; ++i) row(lay.g(i, tau)) = s(f, gens[i].bus);
      if (config.slack_enabled)
        for (int m = 0; m < buses; ++m) {
          row(lay.u(m, tau)) = s(f, m);
          row(lay.v(m, tau)) = -s(f, m);
        }
      double rhs = net.line_limits()(f) + s.row(f).dot(demand_forecast.col(tau));
      prog.add_inequality(row, rhs);
    }

  // In-window ramp pairs, cleared at the revealed limits.
  for (int tau = 0; tau + 1 < length; ++tau)
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(lay.num_vars());
      row(lay.g(i, tau + 1)) = 1.0;
      row(lay.g(i, tau)) = -1.0;
      prog.add_inequality(row, gens[i].cleared_ramp_up());
    }
  for (int tau = 0; tau + 1 < length; ++tau)
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(lay.num_vars());
      row(lay.g(i, tau)) = 1.0;
      row(lay.g(i, tau + 1)) = -1.0;
      prog.add_inequality(row, gens[i].cleared_ramp_down());
    }

  // Boundary ramp pair against the realized previous dispatch.
  if (previous_dispatch) {
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(lay.num_vars());
      row(lay.g(i, 0)) = 1.0;
      prog.add_inequality(row, (*previous_dispatch)(i) + gens[i].cleared_ramp_up());
    }
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(lay.num_vars());
      row(lay.g(i, 0)) = -1.0;
      prog.add_inequality(row, gens[i].cleared_ramp_down() - (*previous_dispatch)(i));
    }
  }

  solver_options opts;
  opts.kkt_tolerance = config.kkt_tolerance;
  primal_dual_solution sol;
  try {
    sol = solve(prog, opts);
  } catch (const solve_failure& e) {
    std::ostringstream os;
    os << "window at interval " << start << " (length " << length << "): " << e.what();
    throw solve_failure(e.status, os.str(), e.violated_rows);
  }

  window_solution ws;
  ws.start = start;
  ws.length = length;
  ws.demand = demand_forecast;
  ws.dispatch.resize(n, length);
  ws.capacity_up_duals.resize(n, length);
  ws.capacity_down_duals.resize(n, length);
  for (int tau = 0; tau < length; ++tau)
    for (int i = 0; i < n; ++i) {
      ws.dispatch(i, tau) = sol.x(lay.g(i, tau));
      ws.capacity_up_duals(i, tau) = sol.upper_duals(lay.g(i, tau));
      ws.capacity_down_duals(i, tau) = sol.lower_duals(lay.g(i, tau));
    }
  ws.lambda = sol.eq_duals;
  ws.phi.resize(flows, length);
  for (int tau = 0; tau < length; ++tau)
    for (int f = 0; f < flows; ++f)
      ws.phi(f, tau) = sol.ineq_duals(lay.flow_row(f, tau));
  ws.ramp_up_duals = Eigen::MatrixXd::Zero(n, std::max(length - 1, 0));
  ws.ramp_down_duals = Eigen::MatrixXd::Zero(n, std::max(length - 1, 0));
  for (int tau = 0; tau + 1 < length; ++tau)
    for (int i = 0; i < n; ++i) {
      ws.ramp_up_duals(i, tau) = sol.ineq_duals(lay.ramp_up_row(i, tau));
      ws.ramp_down_duals(i, tau) = sol.ineq_duals(lay.ramp_down_row(i, tau));
    }
  ws.boundary_up_duals = Eigen::VectorXd::Zero(n);
  ws.boundary_down_duals = Eigen::VectorXd::Zero(n);
  if (previous_dispatch)
    for (int i = 0; i < n; ++i) {
      ws.boundary_up_duals(i) = sol.ineq_duals(lay.boundary_up_row(i));
      ws.boundary_down_duals(i) = sol.ineq_duals(lay.boundary_down_row(i));
    }
  ws.slack_injection = Eigen::MatrixXd::Zero(buses, length);
  ws.slack_curtailment = Eigen::MatrixXd::Zero(buses, length);
  if (config.slack_enabled) {
    const double tol = 1e-7 * (1.0 + demand_forecast.cwiseAbs().maxCoeff());
    for (int tau = 0; tau < length; ++tau)
      for (int m = 0; m < buses; ++m) {
        ws.slack_injection(m, tau) = sol.x(lay.u(m, tau));
        ws.slack_curtailment(m, tau) = sol.x(lay.v(m, tau));
        if (ws.slack_injection(m, tau) > tol || ws.slack_curtailment(m, tau) > tol)
          ws.slack_active = true;
      }
  }
  ws.objective = sol.objective;
  for (int tau = 0; tau < length; ++tau)
    for (int i = 0; i < n; ++i) ws.generation_cost += gens[i].cost_at(ws.dispatch(i, tau));
  ws.degenerate = sol.degenerate;
  ws.kkt = sol.kkt;
  return ws;
}

namespace {

rolling_trajectory make_trajectory_shell(int horizon, int gens, int buses, int flows) {
  rolling_trajectory traj;
  traj.horizon = horizon;
  traj.dispatch = Eigen::MatrixXd::Zero(gens, horizon);
  traj.lambda = Eigen::VectorXd::Zero(horizon);
  traj.phi = Eigen::MatrixXd::Zero(flows, horizon);
  traj.ramp_up_prev = Eigen::MatrixXd::Zero(gens, horizon);
  traj.ramp_down_prev = Eigen::MatrixXd::Zero(gens, horizon);
  traj.ramp_up_next = Eigen::MatrixXd::Zero(gens, horizon);
  traj.ramp_down_next = Eigen::MatrixXd::Zero(gens, horizon);
  traj.slack_injection = Eigen::MatrixXd::Zero(buses, horizon);
  traj.slack_curtailment = Eigen::MatrixXd::Zero(buses, horizon);
  traj.advisories.resize(horizon);
  return traj;
}

}  // namespace

rolling_trajectory run_rolling(const demand_scenario& scenario, const network& net,
                               const std::vector<generator_spec>& gens,
                               const rolling_config& config) {
  const int n = static_cast<int>(gens.size());
  const int horizon = config.horizon;
  config.validate(n);
  if (scenario.horizon() < horizon)
    throw invalid_input("run_rolling: scenario shorter than the horizon");
  if (scenario.num_buses() != net.num_buses())
    throw invalid_input("run_rolling: scenario bus count != network bus count");
  if (config.window > 1 && scenario.max_lead < config.window - 1)
    throw invalid_input("run_rolling: scenario lookahead shorter than window - 1");

  rolling_trajectory traj =
      make_trajectory_shell(horizon, n, net.num_buses(), net.num_flow_rows());
  traj.windows.reserve(horizon);

  std::optional<Eigen::VectorXd> previous = config.initial_dispatch;
  for (int t = 1; t <= horizon; ++t) {
    const int length = config.end_mode == horizon_end::shrink
                           ? std::min(config.window, horizon - t + 1)
                           : config.window;
    Eigen::MatrixXd forecast(net.num_buses(), length);
    for (int k = 0; k < length; ++k) {
      // Past the horizon (hold_forecast mode) the last in-horizon forecast
      // is repeated.
      const int lead = t + k <= horizon ? k : horizon - t;
      forecast.col(k) = scenario.forecast(t, lead);
    }
    window_solution ws = solve_window(t, previous, forecast, net, gens, config);

    traj.dispatch.col(t - 1) = ws.dispatch.col(0);
    traj.lambda(t - 1) = ws.lambda(0);
    if (net.num_flow_rows() > 0) traj.phi.col(t - 1) = ws.phi.col(0);
    traj.ramp_up_prev.col(t - 1) = ws.boundary_up_duals;
    traj.ramp_down_prev.col(t - 1) = ws.boundary_down_duals;
    if (length >= 2) {
      traj.ramp_up_next.col(t - 1) = ws.ramp_up_duals.col(0);
      traj.ramp_down_next.col(t - 1) = ws.ramp_down_duals.col(0);
    }
    traj.slack_injection.col(t - 1) = ws.slack_injection.col(0);
    traj.slack_curtailment.col(t - 1) = ws.slack_curtailment.col(0);
    traj.slack_used = traj.slack_used || ws.slack_active;
    const double slack_tol = 1e-7 * (1.0 + forecast.col(0).cwiseAbs().maxCoeff());
    if (ws.slack_injection.col(0).maxCoeff() > slack_tol ||
        ws.slack_curtailment.col(0).maxCoeff() > slack_tol)
      traj.slack_intervals.push_back(t);
    traj.any_degenerate = traj.any_degenerate || ws.degenerate;

    for (int k = 0; k < length && t + k <= horizon; ++k) {
      advisory_settlement adv;
      adv.settled_at = t;
      adv.bus_price = ws.bus_prices(net, k);
      adv.gen_dispatch = ws.dispatch.col(k);
      adv.bus_demand = forecast.col(k);
      traj.advisories[t + k - 1].push_back(std::move(adv));
    }

    previous = ws.dispatch.col(0);
    traj.windows.push_back(std::move(ws));
  }

  for (int t = 0; t < horizon; ++t)
    for (int i = 0; i < n; ++i)
      traj.total_generation_cost += gens[i].cost_at(traj.dispatch(i, t));
  return traj;
}

rolling_trajectory one_shot(const Eigen::MatrixXd& actual_demand, const network& net,
                            const std::vector<generator_spec>& gens,
                            const rolling_config& config) {
  const int n = static_cast<int>(gens.size());
  const int horizon = static_cast<int>(actual_demand.cols());
  if (horizon < 1) throw invalid_input("one_shot: empty demand horizon");
  if (config.horizon != horizon)
    throw invalid_input("one_shot: config horizon != demand columns");

  window_solution ws = solve_window(1, config.initial_dispatch, actual_demand, net,
                                    gens, config);

  rolling_trajectory traj =
      make_trajectory_shell(horizon, n, net.num_buses(), net.num_flow_rows());
  traj.one_shot_mode = true;
  traj.dispatch = ws.dispatch;
  traj.lambda = ws.lambda;
  traj.phi = ws.phi;
  for (int t = 1; t <= horizon; ++t) {
    if (t == 1) {
      traj.ramp_up_prev.col(0) = ws.boundary_up_duals;
      traj.ramp_down_prev.col(0) = ws.boundary_down_duals;
    } else {
      traj.ramp_up_prev.col(t - 1) = ws.ramp_up_duals.col(t - 2);
      traj.ramp_down_prev.col(t - 1) = ws.ramp_down_duals.col(t - 2);
    }
    if (t < horizon) {
      traj.ramp_up_next.col(t - 1) = ws.ramp_up_duals.col(t - 1);
      traj.ramp_down_next.col(t - 1) = ws.ramp_down_duals.col(t - 1);
    }
    advisory_settlement adv;
    adv.settled_at = 1;
    adv.bus_price = ws.bus_prices(net, t - 1);
    adv.gen_dispatch = ws.dispatch.col(t - 1);
    adv.bus_demand = actual_demand.col(t - 1);
    traj.advisories[t - 1].push_back(std::move(adv));
  }
  traj.slack_injection = ws.slack_injection;
  traj.slack_curtailment = ws.slack_curtailment;
  if (ws.slack_active) {
    traj.slack_used = true;
    const double tol = 1e-7 * (1.0 + actual_demand.cwiseAbs().maxCoeff());
    for (int t = 1; t <= horizon; ++t)
      if (ws.slack_injection.col(t - 1).maxCoeff() > tol ||
          ws.slack_curtailment.col(t - 1).maxCoeff() > tol)
        traj.slack_intervals.push_back(t);
  }
  traj.any_degenerate = ws.degenerate;
  traj.total_generation_cost = ws.generation_cost;
  traj.windows.push_back(std::move(ws));
  return traj;
}

void write_trajectory_csv(std::ostream& os, const rolling_trajectory& traj,
                          const network& net, const std::vector<generator_spec>& gens) {
  os << "t,bus,generator,dispatch_mw,lambda,bus_price,ramp_up_dual,ramp_down_dual,flags\n";
  char buf[64];
  auto put = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.10g", x);
    os << ',' << buf;
  };
  for (int t = 1; t <= traj.horizon; ++t) {
    Eigen::VectorXd prices = traj.bus_prices(net, t);
    bool slack_here =
        std::find(traj.slack_intervals.begin(), traj.slack_intervals.end(), t) !=
        traj.slack_intervals.end();
    for (size_t i = 0; i < gens.size(); ++i) {
      os << t << ',' << net.bus_labels()[gens[i].bus] << ',' << gens[i].id;
      put(traj.dispatch(static_cast<int>(i), t - 1));
      put(traj.lambda(t - 1));
      put(prices(gens[i].bus));
      put(traj.ramp_up_prev(static_cast<int>(i), t - 1));
      put(traj.ramp_down_prev(static_cast<int>(i), t - 1));
      os << ',';
      if (slack_here) os << "slack";
      os << '\n';
    }
  }
}

}  // namespace ramplab
