#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ramplab/settlement.hpp"

using namespace ramplab;

namespace {

std::vector<generator_spec> two_gen_fleet() {
  generator_spec g1;
  g1.id = "G1";
  g1.marginal_cost = 10.0;
  g1.capacity = 200.0;
  g1.ramp_up = 20.0;
  g1.ramp_down = 20.0;
  generator_spec g2;
  g2.id = "G2";
  g2.marginal_cost = 30.0;
  g2.capacity = 200.0;
  g2.ramp_up = 200.0;
  g2.ramp_down = 200.0;
  return {g1, g2};
}

Eigen::MatrixXd step_demand() {
  Eigen::MatrixXd d(1, 2);
  d << 100.0, 150.0;
  return d;
}

rolling_trajectory one_shot_m1() {
  rolling_config cfg;
  cfg.horizon = 2;
  return one_shot(step_demand(), network::single_bus(), two_gen_fleet(), cfg);
}

rolling_trajectory rolling_m1() {
  rolling_config cfg;
  cfg.horizon = 2;
  cfg.window = 1;
  demand_scenario sc = generate_scenario(42, 0, step_demand(), 0.0, 0.0, 0);
  return run_rolling(sc, network::single_bus(), two_gen_fleet(), cfg);
}

struct congested_case {
  network net = network::radial({{0, 1, 60.0, 60.0}}, 1, 2);
  std::vector<generator_spec> gens;
  rolling_trajectory traj;
};

congested_case make_congested() {
  congested_case c;
  generator_spec a;
  a.id = "A";
  a.bus = 0;
  a.marginal_cost = 10.0;
  a.capacity = 200.0;
  a.ramp_up = a.ramp_down = 200.0;
  generator_spec b = a;
  b.id = "B";
  b.bus = 1;
  b.marginal_cost = 30.0;
  c.gens = {a, b};
  Eigen::MatrixXd d(2, 1);
  d << 0.0, 100.0;
  rolling_config cfg;
  cfg.horizon = 1;
  c.traj = one_shot(d, c.net, c.gens, cfg);
  return c;
}

}  // namespace

TEST_CASE("self-schedule uplift vanishes at the one-shot optimum") {
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_trajectory traj = one_shot_m1();
  Eigen::VectorXd prices(2);
  prices << -10.0, 30.0;
  loc_result r = loc(prices, traj.dispatch.row(0).transpose(), gens[0]);
  CHECK(r.q_value == doctest::Approx(400.0));
  CHECK(r.dispatch_profit == doctest::Approx(400.0));
  CHECK(r.loc == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("myopic prices leave money on the table") {
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_trajectory traj = rolling_m1();
  Eigen::VectorXd prices(2);
  prices << 10.0, 30.0;
  loc_result r = loc(prices, traj.dispatch.row(0).transpose(), gens[0]);
  // Best response: run at the cap in interval 2 and stage interval 1 high
  // enough to reach it.
  CHECK(r.q_value == doctest::Approx(4000.0));
  CHECK(r.self_schedule(1) == doctest::Approx(200.0));
  CHECK(r.self_schedule(0) >= 180.0 - 1e-9);
  CHECK(r.dispatch_profit == doctest::Approx(2400.0));
  CHECK(r.loc == doctest::Approx(1600.0));
}

TEST_CASE("marginal-cost prices give zero uplift trivially") {
  std::vector<generator_spec> gens = two_gen_fleet();
  Eigen::VectorXd prices = Eigen::VectorXd::Constant(2, 10.0);
  Eigen::VectorXd dispatch(2);
  dispatch << 100.0, 120.0;
  loc_result r = loc(prices, dispatch, gens[0]);
  CHECK(r.q_value == doctest::Approx(0.0));
  CHECK(r.loc == doctest::Approx(0.0));
}

TEST_CASE("temporal prices produce zero uplift on the frozen cases") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  for (rolling_trajectory traj : {one_shot_m1(), rolling_m1()}) {
    price_schedule tlmp = tlmp_prices(traj, net, gens);
    for (int i = 0; i < 2; ++i) {
      loc_result r = loc(tlmp.generator_price.row(i).transpose(),
                         traj.dispatch.row(i).transpose(), gens[i]);
      CHECK(r.loc <= 1e-7 * (1.0 + std::abs(r.dispatch_profit)));
    }
  }
}

TEST_CASE("deviation-settled uplift equals the single-settlement uplift") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_trajectory traj = rolling_m1();
  price_schedule lmp = lmp_prices(traj, net, gens);
  loc_result direct = loc(lmp.generator_price.row(0).transpose(),
                          traj.dispatch.row(0).transpose(), gens[0]);
  loc_result dev = loc_mlmp(traj, lmp.generator_price.row(0).transpose(), 0, gens[0]);
  CHECK(direct.loc == doctest::Approx(1600.0));
  CHECK(dev.loc == doctest::Approx(direct.loc));
  // W = 1: nothing was settled before binding, so the surpluses coincide.
  CHECK(dev.q_value == doctest::Approx(direct.q_value));
}

TEST_CASE("uplift identity holds across window sizes with forecast errors") {
  std::mt19937_64 eng(31);
  std::uniform_real_distribution<double> cost(5.0, 40.0);
  network net = network::single_bus();
  std::vector<generator_spec> gens(3);
  for (int i = 0; i < 3; ++i) {
    gens[i].id = "G" + std::to_string(i + 1);
    gens[i].marginal_cost = cost(eng);
    gens[i].capacity = 400.0;
    gens[i].ramp_up = 20.0 + 10.0 * i;
    gens[i].ramp_down = 400.0;
  }
  gens[2].ramp_up = 400.0;
  Eigen::MatrixXd mean(1, 8);
  mean << 150, 180, 210, 190, 160, 200, 240, 170;
  for (int window : {2, 3}) {
    demand_scenario sc = generate_scenario(17, 3, mean, 0.1, 0.05, window - 1);
    rolling_config cfg;
    cfg.horizon = 8;
    cfg.window = window;
    cfg.slack_enabled = true;
    rolling_trajectory traj = run_rolling(sc, net, gens, cfg);
    price_schedule lmp = lmp_prices(traj, net, gens);
    for (int i = 0; i < 3; ++i) {
      loc_result direct = loc(lmp.generator_price.row(i).transpose(),
                              traj.dispatch.row(i).transpose(), gens[i]);
      loc_result dev =
          loc_mlmp(traj, lmp.generator_price.row(i).transpose(), i, gens[i]);
      CHECK(dev.loc ==
            doctest::Approx(direct.loc).epsilon(1e-8).scale(1.0 + direct.loc));
      CHECK(direct.loc >= -1e-7 * (1.0 + std::abs(direct.dispatch_profit)));
    }
  }
}

TEST_CASE("one-shot temporal settlement decomposes into ramping surplus") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_trajectory traj = one_shot_m1();
  price_schedule tlmp = tlmp_prices(traj, net, gens);
  settlement_report rep = settle(traj, tlmp, net, gens);

  CHECK(rep.demand_payment == doctest::Approx(3500.0));
  CHECK(rep.generator_payment == doctest::Approx(3100.0));
  CHECK(rep.merchandising_surplus == doctest::Approx(400.0));
  CHECK(rep.ramping_surplus == doctest::Approx(400.0));
  CHECK(rep.congestion_rent == doctest::Approx(0.0));
  CHECK(rep.merchandising_surplus ==
        doctest::Approx(rep.ramping_surplus + rep.congestion_rent));
  CHECK(rep.total_loc == doctest::Approx(0.0).epsilon(1e-9));
  // ISO-neutral rebate: consumers pay exactly the generation cost.
  CHECK(rep.adjusted_consumer_payment == doctest::Approx(3100.0));
  CHECK(rep.generators[0].profit == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("congestion rent is the whole uniform-price surplus") {
  congested_case c = make_congested();
  price_schedule lmp = lmp_prices(c.traj, c.net, c.gens);
  settlement_report rep = settle(c.traj, lmp, c.net, c.gens);
  CHECK(rep.demand_payment == doctest::Approx(3000.0));
  CHECK(rep.generator_payment == doctest::Approx(1800.0));
  CHECK(rep.merchandising_surplus == doctest::Approx(1200.0));
  CHECK(rep.congestion_rent == doctest::Approx(1200.0));
  CHECK(rep.total_loc == doctest::Approx(0.0).epsilon(1e-9));

  settlement_options keep_rent;
  keep_rent.exclude_congestion_rent = true;
  settlement_report adj = settle(c.traj, lmp, c.net, c.gens, keep_rent);
  CHECK(adj.adjusted_consumer_payment ==
        doctest::Approx(adj.generator_payment + 1200.0));
}

TEST_CASE("uniform surplus equals congestion rent under forecast errors") {
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> cost(5.0, 40.0);
  network net = network::radial({{0, 1, 80.0, 80.0}}, 1, 2);
  std::vector<generator_spec> gens(3);
  for (int i = 0; i < 3; ++i) {
    gens[i].id = "G" + std::to_string(i + 1);
    gens[i].bus = i % 2;
    gens[i].marginal_cost = cost(eng);
    gens[i].capacity = 300.0;
    gens[i].ramp_up = 30.0 + 15.0 * i;
    gens[i].ramp_down = 300.0;
  }
  gens[2].ramp_up = 300.0;
  Eigen::MatrixXd mean(2, 6);
  mean << 60, 90, 120, 80, 100, 70, 90, 130, 100, 120, 90, 110;
  for (int window : {1, 3}) {
    demand_scenario sc = generate_scenario(11, 4, mean, 0.1, 0.06,
                                           std::max(window - 1, 1));
    rolling_config cfg;
    cfg.horizon = 6;
    cfg.window = window;
    cfg.slack_enabled = true;
    rolling_trajectory traj = run_rolling(sc, net, gens, cfg);
    price_schedule lmp = lmp_prices(traj, net, gens);
    settlement_report rep = settle(traj, lmp, net, gens);
    const double scale = 1.0 + std::abs(rep.congestion_rent);
    CHECK(std::abs(rep.merchandising_surplus - rep.congestion_rent) < 1e-6 * scale);
    CHECK(rep.merchandising_surplus >= -1e-6 * scale);
  }
}

TEST_CASE("payment difference between uniform and temporal matches the dual sum") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_trajectory traj = one_shot_m1();
  revenue_gap_result gap = revenue_gap(traj, net, gens, 0);
  CHECK(gap.direct == doctest::Approx(400.0));
  CHECK(gap.formula == doctest::Approx(400.0));
  revenue_gap_result flexible = revenue_gap(traj, net, gens, 1);
  CHECK(flexible.direct == doctest::Approx(0.0));
  CHECK(flexible.formula == doctest::Approx(0.0));

  rolling_config cfg;
  cfg.horizon = 2;
  cfg.initial_dispatch = Eigen::VectorXd::Zero(2);
  rolling_trajectory bounded = one_shot(step_demand(), net, two_gen_fleet(), cfg);
  CHECK_THROWS_AS(revenue_gap(bounded, net, gens, 0), invalid_input);
  CHECK_THROWS_AS(revenue_gap(rolling_m1(), net, gens, 0), invalid_input);
}

TEST_CASE("random one-shot instances satisfy the gap identity") {
  std::mt19937_64 eng(41);
  std::uniform_real_distribution<double> cost(5.0, 45.0);
  std::uniform_real_distribution<double> ramp(15.0, 80.0);
  std::uniform_real_distribution<double> load(50.0, 260.0);
  network net = network::single_bus();
  for (int trial = 0; trial < 12; ++trial) {
    const int horizon = 4;
    std::vector<generator_spec> gens(3);
    for (int i = 0; i < 3; ++i) {
      gens[i].id = "G" + std::to_string(i + 1);
      gens[i].marginal_cost = cost(eng);
      gens[i].capacity = 300.0;
      gens[i].ramp_up = ramp(eng);
      gens[i].ramp_down = ramp(eng);
    }
    Eigen::MatrixXd demand(1, horizon);
    for (int t = 0; t < horizon; ++t) demand(0, t) = load(eng);
    rolling_config cfg;
    cfg.horizon = horizon;
    cfg.slack_enabled = true;
    rolling_trajectory traj = one_shot(demand, net, gens, cfg);
    for (int i = 0; i < 3; ++i) {
      revenue_gap_result gap = revenue_gap(traj, net, gens, i);
      const double scale = 1.0 + std::abs(gap.formula);
      CHECK(std::abs(gap.direct - gap.formula) < 1e-6 * scale);
      CHECK(gap.direct >= -1e-6 * scale);
    }
  }
}

TEST_CASE("slack settles at the bus price and the surplus identity survives") {
  network net = network::single_bus();
  generator_spec g1;
  g1.id = "G1";
  g1.marginal_cost = 10.0;
  g1.capacity = 500.0;
  g1.ramp_up = g1.ramp_down = 10.0;
  Eigen::MatrixXd mean(1, 2);
  mean << 100.0, 300.0;
  demand_scenario sc = generate_scenario(42, 0, mean, 0.0, 0.0, 0);
  rolling_config cfg;
  cfg.horizon = 2;
  cfg.window = 1;
  cfg.slack_enabled = true;
  rolling_trajectory traj = run_rolling(sc, net, {g1}, cfg);
  REQUIRE(traj.slack_used);
  price_schedule lmp = lmp_prices(traj, net, {g1});
  settlement_report rep = settle(traj, lmp, net, {g1});
  CHECK(rep.slack_settlement == doctest::Approx(190.0 * defaults::slack_penalty));
  // No lines: the surplus net of slack purchases is zero.
  CHECK(rep.merchandising_surplus == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("dispersion statistics normalize by the mean") {
  Eigen::MatrixXd a(1, 2), b(1, 2);
  a << 9.0, 5.0;
  b << 11.0, 5.0;
  volatility_result r = price_volatility({a, b});
  CHECK(r.per_hour(0) == doctest::Approx(0.1));
  CHECK(r.per_hour(1) == doctest::Approx(0.0));
  CHECK(r.average == doctest::Approx(0.05));
  CHECK_FALSE(r.any_flagged);

  Eigen::MatrixXd c(1, 1), d(1, 1);
  c << 1.0;
  d << -1.0;
  volatility_result zero_mean = price_volatility({c, d});
  CHECK(zero_mean.any_flagged);
  CHECK(zero_mean.flagged_hour[0]);
  CHECK(std::isnan(zero_mean.per_hour(0)));
  CHECK(std::isnan(zero_mean.average));

  CHECK_THROWS_AS(price_volatility({a}), invalid_input);
  Eigen::MatrixXd wrong(2, 2);
  CHECK_THROWS_AS(price_volatility({a, wrong}), invalid_input);
}

TEST_CASE("multi-series dispersion averages across rows") {
  Eigen::MatrixXd a(2, 1), b(2, 1);
  a << 9.0, 20.0;
  b << 11.0, 20.0;
  volatility_result r = price_volatility({a, b});
  CHECK(r.per_hour(0) == doctest::Approx(0.05));  // (0.1 + 0.0) / 2
}

TEST_CASE("settlement serialization carries generator and system rows") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_trajectory traj = one_shot_m1();
  settlement_report rep = settle(traj, tlmp_prices(traj, net, gens), net, gens);
  std::ostringstream os;
  write_settlement_csv(os, rep);
  CHECK(os.str().find("policy,row,revenue,loc,true_cost,profit") == 0);
  CHECK(os.str().find("tlmp,G1,2200.00") != std::string::npos);
  CHECK(os.str().find("SYSTEM") != std::string::npos);
  std::string summary = format_settlement_summary(rep);
  CHECK(summary.find("policy: tlmp") != std::string::npos);
  CHECK(summary.find("ramping") != std::string::npos);
}

TEST_CASE("settlement validates input dimensions") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_trajectory traj = one_shot_m1();
  price_schedule lmp = lmp_prices(traj, net, gens);
  price_schedule broken = lmp;
  broken.demand_price = Eigen::MatrixXd::Zero(1, 5);
  CHECK_THROWS_AS(settle(traj, broken, net, gens), invalid_input);
  Eigen::VectorXd short_prices(1);
  short_prices << 10.0;
  CHECK_THROWS_AS(loc(short_prices, traj.dispatch.row(0).transpose(), gens[0]),
                  invalid_input);
}
