#include "ramplab/scenario.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

namespace ramplab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

double rng::uniform01() {
  // Top 53 bits, shifted into (0, 1] so log() is always safe.
  return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
}

double rng::normal() {
  double u1 = uniform01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t rng::derive(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p));
  return h;
}

Eigen::VectorXd demand_scenario::forecast(int t, int k) const {
  const int tau = t + k;
  if (t < 1 || k < 0 || tau > horizon())
    throw invalid_input("forecast: (t, k) outside the horizon");
  if (k > max_lead)
    throw invalid_input("forecast: lead exceeds the generated lookahead");
  Eigen::VectorXd f = actual.col(tau - 1);
  // Innovation columns for target tau are ordered nearest origin first:
  // column j belongs to origin tau-1-j, and origins s = t..tau-1 map to
  // j = 0..k-1.
  for (int j = 0; j < k; ++j) f += innovations[tau - 1].col(j);
  return f.cwiseMax(0.0);
}

demand_scenario generate_scenario(std::uint64_t base_seed, int scenario_index,
                                  const Eigen::MatrixXd& mean_profile,
                                  double demand_std_fraction, double sigma_fraction,
                                  int max_lead) {
  if (mean_profile.size() == 0)
    throw invalid_input("generate_scenario: empty mean profile");
  if ((mean_profile.array() < 0.0).any())
    throw invalid_input("generate_scenario: negative mean demand");
  if (demand_std_fraction < 0.0 || sigma_fraction < 0.0)
    throw invalid_input("generate_scenario: negative spread fraction");
  if (max_lead < 0) throw invalid_input("generate_scenario: negative lookahead");

  demand_scenario sc;
  sc.base_seed = base_seed;
  sc.scenario_index = scenario_index;
  sc.demand_std_fraction = demand_std_fraction;
  sc.sigma_fraction = sigma_fraction;
  sc.mean = mean_profile;
  sc.max_lead = max_lead;
  const int buses = sc.num_buses();
  const int horizon = sc.horizon();

  // Separate streams per purpose keep actual demand identical across sigma
  // settings and forecast errors identical across demand-spread settings.
  rng actual_rng(rng::derive(base_seed, {static_cast<std::uint64_t>(scenario_index), 0}));
  rng error_rng(rng::derive(base_seed, {static_cast<std::uint64_t>(scenario_index), 1}));

  sc.actual.resize(buses, horizon);
  for (int t = 0; t < horizon; ++t)
    for (int m = 0; m < buses; ++m) {
      double d = sc.mean(m, t) * (1.0 + demand_std_fraction * actual_rng.normal());
      if (d < 0.0) {
        d = 0.0;
        sc.clamped = true;
      }
      sc.actual(m, t) = d;
    }

  sc.innovations.resize(horizon);
  for (int tau = 1; tau <= horizon; ++tau) {
    Eigen::MatrixXd& inn = sc.innovations[tau - 1];
    inn = Eigen::MatrixXd::Zero(buses, std::max(max_lead, 1));
    for (int j = 0; j < max_lead; ++j) {
      const int origin = tau - 1 - j;
      for (int m = 0; m < buses; ++m) {
        // One draw per (target, origin, bus); drawn even when the origin
        // precedes the horizon start so the stream layout is fixed.
        double z = error_rng.normal();
        if (origin >= 1) inn(m, j) = sigma_fraction * sc.mean(m, tau - 1) * z;
      }
    }
  }

  // Forecasts clamp at zero on read; record now whether any will.
  for (int tau = 1; tau <= horizon; ++tau) {
    Eigen::VectorXd f = sc.actual.col(tau - 1);
    for (int k = 1; k <= std::min(max_lead, tau - 1); ++k) {
      f += sc.innovations[tau - 1].col(k - 1);
      if ((f.array() < 0.0).any()) sc.clamped = true;
    }
  }
  return sc;
}

std::vector<experiment_point> build_sweep(const sweep_spec& spec,
                                          const std::vector<generator_spec>& gens,
                                          const network& net) {
  std::vector<experiment_point> points;
  auto base_point = [&](std::string label, double value) {
    experiment_point p{std::move(label), value, gens, net, -1.0};
    return p;
  };

  switch (spec.kind) {
    case sweep_kind::none:
      points.push_back(base_point("base", 0.0));
      break;

    case sweep_kind::ramp_path: {
      if (spec.ramp_path.empty())
        throw invalid_input("build_sweep: empty ramp path");
      for (size_t i = 0; i < spec.ramp_path.size(); ++i) {
        const ramp_path_point& rp = spec.ramp_path[i];
        experiment_point p = base_point(rp.label, static_cast<double>(i));
        for (const auto& [id, limit] : rp.ramp_by_gen) {
          bool found = false;
          for (generator_spec& g : p.generators)
            if (g.id == id) {
              g.ramp_up = limit;
              g.ramp_down = limit;
              g.revealed_ramp_up.reset();
              g.revealed_ramp_down.reset();
              found = true;
            }
          if (!found)
            throw invalid_input("build_sweep: ramp path names unknown generator '" + id + "'");
        }
        if (!rp.ramp_by_gen.empty()) p.value = rp.ramp_by_gen.front().second;
        points.push_back(std::move(p));
      }
      break;
    }

    case sweep_kind::revelation: {
      if (spec.revelation_grid.empty())
        throw invalid_input("build_sweep: empty revelation grid");
      for (double limit : spec.revelation_grid) {
        if (limit < 0.0) throw invalid_input("build_sweep: negative revealed limit");
        experiment_point p = base_point("revealed=" + std::to_string(limit), limit);
        bool found = false;
        for (generator_spec& g : p.generators)
          if (g.id == spec.revelation_generator) {
            g.revealed_ramp_up = limit;
            g.revealed_ramp_down = limit;
            found = true;
          }
        if (!found)
          throw invalid_input("build_sweep: revelation names unknown generator '" +
                              spec.revelation_generator + "'");
        points.push_back(std::move(p));
      }
      break;
    }

    case sweep_kind::sigma: {
      if (spec.sigma_grid.empty())
        throw invalid_input("build_sweep: empty sigma grid");
      for (double s : spec.sigma_grid) {
        if (s < 0.0) throw invalid_input("build_sweep: negative sigma");
        experiment_point p = base_point("sigma=" + std::to_string(s), s);
        p.sigma_override = s;
        points.push_back(std::move(p));
      }
      break;
    }

    case sweep_kind::line_capacity: {
      if (spec.line_capacity_grid.empty())
        throw invalid_input("build_sweep: empty line capacity grid");
      const int rows = net.num_flow_rows();
      if (spec.line_index < 0 || 2 * spec.line_index + 1 >= rows)
        throw invalid_input("build_sweep: line index out of range");
      for (double cap : spec.line_capacity_grid) {
        if (cap < 0.0) throw invalid_input("build_sweep: negative line capacity");
        Eigen::VectorXd limits = net.line_limits();
        limits(2 * spec.line_index) = cap;
        limits(2 * spec.line_index + 1) = cap;
        network varied(net.num_buses(), net.shift_factors(), limits, net.bus_labels());
        experiment_point p{"line_cap=" + std::to_string(cap), cap, gens, varied, -1.0};
        points.push_back(std::move(p));
      }
      break;
    }
  }
  return points;
}

void write_scenario_csv(std::ostream& os, const demand_scenario& sc, const network& net) {
  os << "scenario,t,bus,actual";
  for (int k = 1; k <= sc.max_lead; ++k) os << ",forecast_lead" << k;
  os << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    os << ',' << buf;
  };
  for (int t = 1; t <= sc.horizon(); ++t)
    for (int m = 0; m < sc.num_buses(); ++m) {
      os << sc.scenario_index << ',' << t << ',' << net.bus_labels()[m];
      put(sc.actual(m, t - 1));
      for (int k = 1; k <= sc.max_lead; ++k) {
        if (t + k <= sc.horizon()) {
          // forecast(origin, lead) with origin = t means "made at t".
          put(sc.forecast(t, k)(m));
        } else {
          os << ',';
        }
      }
      os << "\n";
    }
}

}  // namespace ramplab
