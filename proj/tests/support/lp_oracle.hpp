// Brute-force reference solver used only by tests.  Independent of the
// production solver: enumerates candidate vertices from active-constraint
// subsets and evaluates the objective at each, so it cross-checks the
// simplex without sharing any code path with it.
#pragma once

#include <Eigen/Dense>

#include "ramplab/solver.hpp"

namespace ramplab::testing {

struct oracle_result {
  bool feasible = false;
  double objective = 0.0;
  Eigen::VectorXd x;
};

// Exhaustive vertex enumeration for LPs with a bounded feasible set.
// Exponential in the constraint count; intended for n <= ~8 variables.
oracle_result oracle_solve(const convex_program& program);

// Central finite-difference shadow price d(objective)/d(rhs) computed by
// re-running the enumeration at perturbed right-hand sides.
double oracle_eq_shadow_price(const convex_program& program, int row, double step);
double oracle_ineq_shadow_price(const convex_program& program, int row, double step);

}  // namespace ramplab::testing
