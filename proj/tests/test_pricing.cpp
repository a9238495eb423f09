#include <doctest.h>

#include <random>
#include <sstream>

#include "ramplab/pricing.hpp"
#include "support/lp_oracle.hpp"

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

}  // namespace

TEST_CASE("locational prices read off the binding duals") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  price_schedule ps = lmp_prices(one_shot_m1(), net, gens);
  CHECK(ps.policy == policy_kind::lmp);
  CHECK(ps.demand_price(0, 0) == doctest::Approx(-10.0));
  CHECK(ps.demand_price(0, 1) == doctest::Approx(30.0));
  // Uniform pricing: generators see the bus price.
  CHECK(ps.generator_price.row(0) == ps.demand_price.row(0));
  CHECK(ps.generator_price.row(1) == ps.demand_price.row(0));
  CHECK(ps.energy_component.size() == 0);
}

TEST_CASE("congestion splits prices across the line") {
  network net = network::radial({{0, 1, 60.0, 60.0}}, 1, 2);
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
  Eigen::MatrixXd d(2, 1);
  d << 0.0, 100.0;
  rolling_config cfg;
  cfg.horizon = 1;
  rolling_trajectory traj = one_shot(d, net, {a, b}, cfg);

  price_schedule lmp = lmp_prices(traj, net, {a, b});
  CHECK(lmp.demand_price(0, 0) == doctest::Approx(10.0));
  CHECK(lmp.demand_price(1, 0) == doctest::Approx(30.0));

  price_schedule tlmp = tlmp_prices(traj, net, {a, b});
  CHECK(tlmp.energy_component(0, 0) == doctest::Approx(30.0));
  CHECK(tlmp.congestion_component(0, 0) == doctest::Approx(-20.0));
  CHECK(tlmp.congestion_component(1, 0) == doctest::Approx(0.0));
  CHECK(tlmp.ramping_component.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("temporal prices shift the ramp dual between neighbours") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();

  price_schedule shot = tlmp_prices(one_shot_m1(), net, gens);
  CHECK(shot.generator_price(0, 0) == doctest::Approx(10.0));
  CHECK(shot.generator_price(0, 1) == doctest::Approx(10.0));
  CHECK(shot.generator_price(1, 0) == doctest::Approx(-10.0));
  CHECK(shot.generator_price(1, 1) == doctest::Approx(30.0));
  // Demand keeps the plain bus price.
  CHECK(shot.demand_price(0, 0) == doctest::Approx(-10.0));
  CHECK(shot.demand_price(0, 1) == doctest::Approx(30.0));
  CHECK(shot.ramping_component(0, 0) == doctest::Approx(20.0));
  CHECK(shot.ramping_component(0, 1) == doctest::Approx(-20.0));

  price_schedule rolled = tlmp_prices(rolling_m1(), net, gens);
  CHECK(rolled.generator_price(0, 0) == doctest::Approx(10.0));
  CHECK(rolled.generator_price(0, 1) == doctest::Approx(10.0));
  CHECK(rolled.generator_price(1, 1) == doctest::Approx(30.0));
}

TEST_CASE("temporal decomposition sums exactly and demand matches the uniform price") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_trajectory traj = rolling_m1();
  price_schedule tlmp = tlmp_prices(traj, net, gens);
  price_schedule lmp = lmp_prices(traj, net, gens);
  CHECK(tlmp.demand_price == lmp.demand_price);
  Eigen::MatrixXd sum =
      tlmp.energy_component + tlmp.congestion_component + tlmp.ramping_component;
  CHECK(sum == tlmp.generator_price);
}

TEST_CASE("generator with slack ramps is paid the bus price") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_trajectory traj = rolling_m1();
  price_schedule tlmp = tlmp_prices(traj, net, gens);
  price_schedule lmp = lmp_prices(traj, net, gens);
  // G2 never hits a ramp limit, so its temporal price collapses to LMP.
  CHECK((tlmp.generator_price.row(1) - lmp.generator_price.row(1))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("price-preserving program reproduces the hand value and the oracle") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_config cfg;
  cfg.horizon = 2;
  cfg.window = 1;

  Eigen::MatrixXd no_past(1, 0);
  Eigen::MatrixXd d1(1, 1);
  d1 << 100.0;
  // t = 1: no past terms, so the program is the dispatch window itself.
  Eigen::VectorXd p1 = pmp_price_at(1, no_past, d1, no_past, net, gens, cfg);
  CHECK(p1(0) == doctest::Approx(10.0));

  Eigen::MatrixXd past(1, 1);
  past << 10.0;
  Eigen::MatrixXd d2(1, 1);
  d2 << 150.0;
  Eigen::MatrixXd realized(1, 1);
  realized << 100.0;
  Eigen::VectorXd p2 = pmp_price_at(2, past, d2, realized, net, gens, cfg);
  CHECK(p2(0) == doctest::Approx(10.0));

  // Independent check: same program, brute-force vertex enumeration, and a
  // finite-difference shadow price on the balance row.
  convex_program prog = convex_program::with_variables(4);  // g1[1] g2[1] g1[2] g2[2]
  prog.cost_linear << 10.0 - 10.0, 30.0 - 10.0, 10.0, 30.0;
  for (int j = 0; j < 4; ++j) prog.set_bounds(j, 0.0, 200.0);
  Eigen::VectorXd bal = Eigen::VectorXd::Zero(4);
  bal(2) = bal(3) = 1.0;
  prog.add_equality(bal, 150.0);
  Eigen::VectorXd row = Eigen::VectorXd::Zero(4);
  row(2) = 1.0;
  row(0) = -1.0;
  prog.add_inequality(row, 20.0);
  row.setZero();
  row(3) = 1.0;
  row(1) = -1.0;
  prog.add_inequality(row, 200.0);
  row.setZero();
  row(0) = 1.0;
  row(2) = -1.0;
  prog.add_inequality(row, 20.0);
  row.setZero();
  row(1) = 1.0;
  row(3) = -1.0;
  prog.add_inequality(row, 200.0);
  CHECK(testing::oracle_eq_shadow_price(prog, 0, 0.5) == doctest::Approx(10.0));
}

TEST_CASE("price-preserving prices over a trajectory feed forward") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_config cfg;
  cfg.horizon = 2;
  cfg.window = 1;
  rolling_trajectory traj = rolling_m1();
  price_schedule ps = pmp_prices(traj, net, gens, cfg);
  CHECK(ps.policy == policy_kind::pmp);
  CHECK(ps.demand_price(0, 0) == doctest::Approx(10.0));
  CHECK(ps.demand_price(0, 1) == doctest::Approx(10.0));
  CHECK(ps.generator_price.row(0) == ps.demand_price.row(0));
  CHECK(ps.generator_price.row(1) == ps.demand_price.row(0));
}

TEST_CASE("constraint-preserving program reproduces the hand value and the oracle") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_config cfg;
  cfg.horizon = 2;
  cfg.window = 1;
  rolling_trajectory traj = rolling_m1();

  // t = 1 has a free boundary and zero boundary duals: same program as the
  // dispatch window, so the same price.
  Eigen::VectorXd p1 = cmp_price_at(1, traj, net, gens, cfg);
  CHECK(p1(0) == doctest::Approx(10.0));
  Eigen::VectorXd p2 = cmp_price_at(2, traj, net, gens, cfg);
  CHECK(p2(0) == doctest::Approx(30.0));

  // Oracle for t = 2: surcharge 20 on G1, boundary against g[1] = (100, 0).
  convex_program prog = convex_program::with_variables(2);
  prog.cost_linear << 10.0 + 20.0, 30.0;
  prog.set_bounds(0, 0.0, 200.0);
  prog.set_bounds(1, 0.0, 200.0);
  Eigen::VectorXd bal = Eigen::VectorXd::Constant(2, 1.0);
  prog.add_equality(bal, 150.0);
  Eigen::VectorXd row = Eigen::VectorXd::Zero(2);
  row(0) = 1.0;
  prog.add_inequality(row, 100.0 + 20.0);
  row(0) = -1.0;
  prog.add_inequality(row, 20.0 - 100.0);
  row.setZero();
  row(1) = 1.0;
  prog.add_inequality(row, 0.0 + 200.0);
  row(1) = -1.0;
  prog.add_inequality(row, 200.0 - 0.0);
  CHECK(testing::oracle_eq_shadow_price(prog, 0, 0.5) == doctest::Approx(30.0));

  price_schedule ps = cmp_prices(traj, net, gens, cfg);
  CHECK(ps.demand_price(0, 0) == doctest::Approx(10.0));
  CHECK(ps.demand_price(0, 1) == doctest::Approx(30.0));
}

TEST_CASE("ramp-free instances collapse every policy to the locational price") {
  std::mt19937_64 eng(23);
  std::uniform_real_distribution<double> cost(5.0, 40.0);
  network net = network::radial({{0, 1, 500.0, 500.0}}, 1, 2);
  std::vector<generator_spec> gens(3);
  for (int i = 0; i < 3; ++i) {
    gens[i].id = "G" + std::to_string(i + 1);
    gens[i].bus = i % 2;
    gens[i].marginal_cost = cost(eng);
    gens[i].capacity = 400.0;
    gens[i].ramp_up = gens[i].ramp_down = 400.0;
  }
  Eigen::MatrixXd mean(2, 5);
  mean << 80, 120, 60, 90, 110, 100, 140, 90, 70, 120;
  demand_scenario sc = generate_scenario(7, 0, mean, 0.0, 0.0, 1);
  rolling_config cfg;
  cfg.horizon = 5;
  cfg.window = 2;
  rolling_trajectory traj = run_rolling(sc, net, gens, cfg);
  CHECK(traj.ramp_up_prev.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(traj.ramp_up_next.cwiseAbs().maxCoeff() < 1e-9);

  price_schedule lmp = lmp_prices(traj, net, gens);
  price_schedule tlmp = tlmp_prices(traj, net, gens);
  price_schedule pmp = pmp_prices(traj, net, gens, cfg);
  price_schedule cmp = cmp_prices(traj, net, gens, cfg);
  price_schedule mlmp = mlmp_prices(traj, net, gens);
  for (const price_schedule* ps : {&tlmp, &pmp, &cmp, &mlmp}) {
    CHECK((ps->generator_price - lmp.generator_price).cwiseAbs().maxCoeff() < 1e-7);
    CHECK((ps->demand_price - lmp.demand_price).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("separate pricing runs work on one-shot trajectories") {
  network net = network::radial({{0, 1, 60.0, 60.0}}, 1, 2);
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
  Eigen::MatrixXd d(2, 1);
  d << 0.0, 100.0;
  rolling_config cfg;
  cfg.horizon = 1;
  rolling_trajectory traj = one_shot(d, net, {a, b}, cfg);
  price_schedule lmp = lmp_prices(traj, net, {a, b});
  price_schedule pmp = pmp_prices(traj, net, {a, b}, cfg);
  price_schedule cmp = cmp_prices(traj, net, {a, b}, cfg);
  CHECK((pmp.demand_price - lmp.demand_price).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((cmp.demand_price - lmp.demand_price).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("deviation settlement telescopes advisory revisions") {
  auto entry = [](double price, double dispatch, double demand) {
    advisory_settlement adv;
    adv.settled_at = 0;
    adv.bus_price = Eigen::VectorXd::Constant(1, price);
    adv.gen_dispatch = Eigen::VectorXd::Constant(1, dispatch);
    adv.bus_demand = Eigen::VectorXd::Constant(1, demand);
    return adv;
  };
  std::vector<advisory_settlement> ledger = {entry(10, 50, 55), entry(12, 60, 58),
                                             entry(11, 55, 60)};
  CHECK(mlmp_revenue(ledger, 0, 0) ==
        doctest::Approx(10 * 50 + 12 * (60 - 50) + 11 * (55 - 60)));
  CHECK(mlmp_revenue(ledger, 0, 0) == doctest::Approx(565.0));
  CHECK(mlmp_pre_binding_dispatch(ledger, 0) == doctest::Approx(60.0));
  CHECK(mlmp_demand_payment(ledger, 0) ==
        doctest::Approx(10 * 55 + 12 * 3 + 11 * 2));

  std::vector<advisory_settlement> single = {entry(25, 70, 70)};
  CHECK(mlmp_revenue(single, 0, 0) == doctest::Approx(25 * 70));
  CHECK(mlmp_pre_binding_dispatch(single, 0) == 0.0);
  CHECK_THROWS_AS(mlmp_revenue({}, 0, 0), invalid_input);
  CHECK_THROWS_AS(mlmp_demand_payment({}, 0), invalid_input);
}

TEST_CASE("constant advisories make the deviation settlement a spot payment") {
  // Perfect forecasts, wide window: advisory values for the last interval
  // coincide across settlements, so revenue telescopes to price times
  // quantity.
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  gens[0].ramp_up = gens[0].ramp_down = 200.0;  // nothing binds
  rolling_config cfg;
  cfg.horizon = 3;
  cfg.window = 3;
  Eigen::MatrixXd mean(1, 3);
  mean << 100.0, 110.0, 105.0;
  demand_scenario sc = generate_scenario(4, 0, mean, 0.0, 0.0, 2);
  rolling_trajectory traj = run_rolling(sc, net, gens, cfg);
  const auto& ledger = traj.advisories[2];
  REQUIRE(ledger.size() == 3);
  double revenue = mlmp_revenue(ledger, 0, 0);
  double spot = traj.bus_prices(net, 3)(0) * traj.dispatch(0, 2);
  CHECK(revenue == doctest::Approx(spot));
}

TEST_CASE("pricing under emergency slack stays defined") {
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
  CHECK(lmp.demand_price(0, 1) == doctest::Approx(defaults::slack_penalty));
  price_schedule tlmp = tlmp_prices(traj, net, {g1});
  CHECK(tlmp.demand_price == lmp.demand_price);
  price_schedule pmp = pmp_prices(traj, net, {g1}, cfg);
  price_schedule cmp = cmp_prices(traj, net, {g1}, cfg);
  // The price-preserving program may redo the past: credited at its own
  // published price, the generator's interval-1 variable climbs high enough
  // to feed the jump, so interval 2 prices at marginal cost, not at the
  // penalty.
  CHECK(pmp.demand_price(0, 1) == doctest::Approx(10.0));
  CHECK(cmp.demand_price(0, 1) == doctest::Approx(defaults::slack_penalty));
}

TEST_CASE("policy names round-trip and reject unknowns") {
  for (policy_kind p : {policy_kind::lmp, policy_kind::tlmp, policy_kind::pmp,
                        policy_kind::cmp, policy_kind::mlmp})
    CHECK(policy_from_name(policy_name(p)) == p);
  CHECK_THROWS_AS(policy_from_name("vcg"), config_error);
}

TEST_CASE("price CSV carries components for the temporal policy") {
  network net = network::single_bus();
  std::vector<generator_spec> gens = two_gen_fleet();
  rolling_trajectory traj = one_shot_m1();
  std::ostringstream os;
  write_price_csv(os, tlmp_prices(traj, net, gens), net, gens);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "policy,t,bus,participant,price,energy,congestion,ramping");
  int rows = 0;
  bool saw_demand = false;
  while (std::getline(is, line)) {
    ++rows;
    if (line.find("DEMAND") != std::string::npos) saw_demand = true;
  }
  CHECK(rows == 2 * 3);  // per interval: one demand row + two generators
  CHECK(saw_demand);
  CHECK(os.str().find("tlmp,1,") != std::string::npos);
}
