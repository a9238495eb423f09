#include <doctest.h>

#include <cmath>
#include <random>

#include "ramplab/solver.hpp"
#include "support/lp_oracle.hpp"

using namespace ramplab;

namespace {

// Two-interval, two-generator dispatch as a flat LP.  Variables
// (g11, g12, g21, g22): generator 1 costs 10 with ramp limit 20, generator 2
// costs 30 with a slack ramp limit, demands 100 then 150, capacities 200.
// Hand KKT solution: g = (100, 120, 0, 30), interval prices (-10, 30),
// ramp-up dual 20 on generator 1, objective 3100.
convex_program two_interval_dispatch_lp() {
  convex_program p = convex_program::with_variables(4);
  p.cost_linear << 10, 10, 30, 30;
  Eigen::VectorXd r(4);
  r << 1, 0, 1, 0;
  p.add_equality(r, 100);
  r << 0, 1, 0, 1;
  p.add_equality(r, 150);
  r << -1, 1, 0, 0;
  p.add_inequality(r, 20);  // g12 - g11 <= 20
  r << 1, -1, 0, 0;
  p.add_inequality(r, 20);  // g11 - g12 <= 20
  r << 0, 0, -1, 1;
  p.add_inequality(r, 200);
  r << 0, 0, 1, -1;
  p.add_inequality(r, 200);
  for (int j = 0; j < 4; ++j) p.set_bounds(j, 0.0, 200.0);
  return p;
}

struct random_lp {
  convex_program program;
  Eigen::VectorXd feasible_point;
};

// Random LP with all-finite bounds (so the feasible set is bounded) that is
// feasible by construction: right-hand sides are anchored at a random
// interior point.
random_lp make_random_lp(std::mt19937_64& rng, int max_vars) {
  std::uniform_int_distribution<int> nvar(2, max_vars);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = nvar(rng);
  std::uniform_int_distribution<int> neq(0, std::min(2, n - 1));
  std::uniform_int_distribution<int> nineq(0, 4);
  const int me = neq(rng), mi = nineq(rng);

  convex_program p = convex_program::with_variables(n);
  for (int j = 0; j < n; ++j) {
    double lo = -5.0 * unit(rng);
    double hi = lo + 1.0 + 9.0 * unit(rng);
    p.set_bounds(j, lo, hi);
    p.cost_linear(j) = -10.0 + 20.0 * unit(rng);
  }
  Eigen::VectorXd x0(n);
  for (int j = 0; j < n; ++j)
    x0(j) = p.lower(j) + (p.upper(j) - p.lower(j)) * unit(rng);
  for (int r = 0; r < me; ++r) {
    Eigen::VectorXd row(n);
    for (int j = 0; j < n; ++j) row(j) = -3.0 + 6.0 * unit(rng);
    p.add_equality(row, row.dot(x0));
  }
  for (int r = 0; r < mi; ++r) {
    Eigen::VectorXd row(n);
    for (int j = 0; j < n; ++j) row(j) = -3.0 + 6.0 * unit(rng);
    p.add_inequality(row, row.dot(x0) + 2.0 * unit(rng));
  }
  return {p, x0};
}

}  // namespace

TEST_CASE("single bounded variable") {
  convex_program p = convex_program::with_variables(1);
  p.cost_linear << 3.0;
  p.set_bounds(0, 5.0, 10.0);
  primal_dual_solution s = solve(p);
  CHECK(s.x(0) == doctest::Approx(5.0));
  CHECK(s.objective == doctest::Approx(15.0));
  CHECK(s.lower_duals(0) == doctest::Approx(3.0));
  CHECK(s.upper_duals(0) == doctest::Approx(0.0));
  CHECK(s.kkt.max() <= 1e-12);
}

TEST_CASE("equality conflicting with a bound reports a violated row subset") {
  convex_program p = convex_program::with_variables(1);
  p.cost_linear << 1.0;
  Eigen::VectorXd r(1);
  r << 1.0;
  p.add_equality(r, 4.0);
  p.set_bounds(0, -inf, 3.0);
  try {
    solve(p);
    FAIL("expected solve_failure");
  } catch (const solve_failure& e) {
    CHECK(e.status == solve_status::infeasible);
    REQUIRE(!e.violated_rows.empty());
    CHECK(e.violated_rows[0] == 0);
  }
}

TEST_CASE("unbounded objective detected") {
  convex_program p = convex_program::with_variables(1);
  p.cost_linear << -1.0;
  p.set_bounds(0, 0.0, inf);
  CHECK_THROWS_WITH_AS(solve(p), doctest::Contains("unbounded"), solve_failure);
}

TEST_CASE("malformed programs rejected before solving") {
  convex_program p = convex_program::with_variables(2);
  p.cost_quadratic << 1.0, -0.5;
  CHECK_THROWS_AS(solve(p), invalid_input);

  convex_program q = convex_program::with_variables(2);
  q.set_bounds(1, 2.0, 1.0);
  CHECK_THROWS_AS(solve(q), invalid_input);

  convex_program d = convex_program::with_variables(2);
  CHECK_THROWS_AS(d.add_equality(Eigen::VectorXd::Ones(3), 1.0), invalid_input);
}

TEST_CASE("two-interval dispatch LP matches hand KKT solution") {
  convex_program p = two_interval_dispatch_lp();
  primal_dual_solution s = solve(p);
  CHECK(s.x(0) == doctest::Approx(100.0));
  CHECK(s.x(1) == doctest::Approx(120.0));
  CHECK(s.x(2) == doctest::Approx(0.0));
  CHECK(s.x(3) == doctest::Approx(30.0));
  CHECK(s.objective == doctest::Approx(3100.0));
  // Interval prices: ramp-limited first interval prices below marginal cost.
  CHECK(s.eq_duals(0) == doctest::Approx(-10.0));
  CHECK(s.eq_duals(1) == doctest::Approx(30.0));
  CHECK(s.ineq_duals(0) == doctest::Approx(20.0));  // binding ramp-up
  for (int k = 1; k < 4; ++k) CHECK(s.ineq_duals(k) == doctest::Approx(0.0));
  CHECK(s.lower_duals(2) == doctest::Approx(40.0));
  CHECK(s.kkt.max() <= 1e-9);
  CHECK_FALSE(s.degenerate);
}

TEST_CASE("strong duality holds on random bounded LPs") {
  std::mt19937_64 rng(20240711);
  for (int trial = 0; trial < 50; ++trial) {
    random_lp inst = make_random_lp(rng, 6);
    primal_dual_solution s = solve(inst.program);
    double gap = std::abs(s.objective - dual_objective(inst.program, s));
    CHECK(gap <= 1e-7 * (1.0 + std::abs(s.objective)));
    CHECK(s.kkt.max() <= 1e-8);
    CHECK(s.objective <= inst.program.objective_value(inst.feasible_point) + 1e-9);
  }
}

TEST_CASE("objective agrees with vertex-enumeration oracle") {
  std::mt19937_64 rng(987651234);
  for (int trial = 0; trial < 40; ++trial) {
    random_lp inst = make_random_lp(rng, 5);
    primal_dual_solution s = solve(inst.program);
    testing::oracle_result o = testing::oracle_solve(inst.program);
    REQUIRE(o.feasible);
    CHECK(s.objective == doctest::Approx(o.objective).epsilon(1e-7));
  }
}

TEST_CASE("duals match finite-difference shadow prices on nondegenerate LPs") {
  std::mt19937_64 rng(55511);
  int checked = 0;
  for (int trial = 0; trial < 60 && checked < 12; ++trial) {
    random_lp inst = make_random_lp(rng, 4);
    primal_dual_solution s = solve(inst.program);
    if (s.degenerate) continue;  // shadow prices only well defined off ties
    const double step = 1e-5;
    for (int r = 0; r < inst.program.num_equalities(); ++r) {
      double fd = testing::oracle_eq_shadow_price(inst.program, r, step);
      CHECK(s.eq_duals(r) == doctest::Approx(fd).epsilon(1e-4));
    }
    for (int r = 0; r < inst.program.num_inequalities(); ++r) {
      double fd = testing::oracle_ineq_shadow_price(inst.program, r, step);
      CHECK(s.ineq_duals(r) == doctest::Approx(-fd).epsilon(1e-4));
    }
    ++checked;
  }
  CHECK(checked >= 8);
}

TEST_CASE("repeat solves are deterministic") {
  convex_program p = two_interval_dispatch_lp();
  primal_dual_solution a = solve(p);
  primal_dual_solution b = solve(p);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((a.eq_duals - b.eq_duals).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((a.ineq_duals - b.ineq_duals).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("duals scale linearly with the objective") {
  convex_program p = two_interval_dispatch_lp();
  primal_dual_solution base = solve(p);
  convex_program scaled = p;
  scaled.cost_linear *= 7.5;
  primal_dual_solution s = solve(scaled);
  CHECK((s.x - base.x).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((s.eq_duals - 7.5 * base.eq_duals).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((s.ineq_duals - 7.5 * base.ineq_duals).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("bounded scalar QP") {
  // minimize (x-3)^2 over [0, 2], dropping the constant: x^2 - 6x.
  convex_program p = convex_program::with_variables(1);
  p.cost_linear << -6.0;
  p.cost_quadratic << 1.0;
  p.set_bounds(0, 0.0, 2.0);
  primal_dual_solution s = solve(p);
  CHECK(s.x(0) == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(s.upper_duals(0) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(s.kkt.max() <= 1e-8);
}

TEST_CASE("equality-constrained QP dual") {
  convex_program p = convex_program::with_variables(2);
  p.cost_quadratic << 1.0, 1.0;
  Eigen::VectorXd r(2);
  r << 1.0, 1.0;
  p.add_equality(r, 2.0);
  p.set_bounds(0, -100.0, 100.0);
  p.set_bounds(1, -100.0, 100.0);
  primal_dual_solution s = solve(p);
  CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(s.x(1) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(s.eq_duals(0) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("QP with a linear-only variable") {
  // minimize x^2 + 3y with x + y = 1, y >= 0: optimum at y = 0, x = 1.
  convex_program p = convex_program::with_variables(2);
  p.cost_linear << 0.0, 3.0;
  p.cost_quadratic << 1.0, 0.0;
  Eigen::VectorXd r(2);
  r << 1.0, 1.0;
  p.add_equality(r, 1.0);
  p.set_bounds(0, -50.0, 50.0);
  p.set_bounds(1, 0.0, 50.0);
  primal_dual_solution s = solve(p);
  CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.x(1) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(s.eq_duals(0) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(s.lower_duals(1) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("infeasible QP gets the same certificate format as LPs") {
  convex_program p = convex_program::with_variables(1);
  p.cost_quadratic << 1.0;
  Eigen::VectorXd r(1);
  r << 1.0;
  p.add_equality(r, 5.0);
  p.set_bounds(0, -inf, 3.0);
  try {
    solve(p);
    FAIL("expected solve_failure");
  } catch (const solve_failure& e) {
    CHECK(e.status == solve_status::infeasible);
    CHECK(!e.violated_rows.empty());
  }
}

TEST_CASE("fixed variables are substituted out of QPs") {
  convex_program p = convex_program::with_variables(2);
  p.cost_quadratic << 1.0, 1.0;
  Eigen::VectorXd r(2);
  r << 1.0, 1.0;
  p.add_equality(r, 3.0);
  p.set_bounds(0, -100.0, 100.0);
  p.set_bounds(1, 1.0, 1.0);
  primal_dual_solution s = solve(p);
  CHECK(s.x(0) == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(s.x(1) == doctest::Approx(1.0));
  CHECK(s.eq_duals(0) == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(s.upper_duals(1) - s.lower_duals(1) == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("kkt check is exact at analytic optima and catches perturbations") {
  convex_program p = convex_program::with_variables(1);
  p.cost_linear << 3.0;
  p.set_bounds(0, 5.0, 10.0);
  primal_dual_solution s;
  s.x = Eigen::VectorXd::Constant(1, 5.0);
  s.eq_duals.resize(0);
  s.ineq_duals.resize(0);
  s.lower_duals = Eigen::VectorXd::Constant(1, 3.0);
  s.upper_duals = Eigen::VectorXd::Zero(1);
  kkt_residuals at_opt = check_kkt(p, s);
  CHECK(at_opt.max() == 0.0);

  s.x(0) = 6.0;  // feasible but no longer complementary
  kkt_residuals off = check_kkt(p, s);
  CHECK(off.complementarity > 1e-3);
}

TEST_CASE("tied marginal costs are flagged degenerate") {
  convex_program p = convex_program::with_variables(2);
  p.cost_linear << 10.0, 10.0;
  Eigen::VectorXd r(2);
  r << 1.0, 1.0;
  p.add_equality(r, 100.0);
  p.set_bounds(0, 0.0, 200.0);
  p.set_bounds(1, 0.0, 200.0);
  primal_dual_solution s = solve(p);
  CHECK(s.degenerate);
}

TEST_CASE("iteration cap surfaces as numerical failure") {
  convex_program p = two_interval_dispatch_lp();
  solver_options opt;
  opt.max_iterations = 1;
  try {
    solve(p, opt);
    FAIL("expected solve_failure");
  } catch (const solve_failure& e) {
    CHECK(e.status == solve_status::numerical_failure);
  }
}
