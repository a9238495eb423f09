// Dense convex-program solver: bounded-variable revised simplex for LPs,
// primal-dual interior point for diagonal QPs.  Every solve returns primal
// and dual vectors together with independently recomputed KKT residuals.
#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>

#include "ramplab/common.hpp"

namespace ramplab {

inline constexpr double inf = std::numeric_limits<double>::infinity();

/**
 * Convex program in the fixed canonical form
 *
 *   minimize    cost_linear' x + sum_j cost_quadratic[j] * x[j]^2
 *   subject to  eq_coeffs   x  = eq_rhs
 *               ineq_coeffs x <= ineq_rhs
 *               lower <= x <= upper      (entries may be +-inf)
 *
 * cost_quadratic must be elementwise >= 0 (all-zero means pure LP).
 * Rows are addressed by index; add_equality / add_inequality return the
 * index of the row they created so callers can map duals back.
 */
struct convex_program {
  Eigen::VectorXd cost_linear;
  Eigen::VectorXd cost_quadratic;
  Eigen::MatrixXd eq_coeffs;    // (num_eq x n)
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq_coeffs;  // (num_ineq x n)
  Eigen::VectorXd ineq_rhs;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static convex_program with_variables(int n);

  int num_variables() const { return static_cast<int>(cost_linear.size()); }
  int num_equalities() const { return static_cast<int>(eq_rhs.size()); }
  int num_inequalities() const { return static_cast<int>(ineq_rhs.size()); }
  bool is_linear() const;

  int add_equality(const Eigen::VectorXd& row, double rhs);
  int add_inequality(const Eigen::VectorXd& row, double rhs);
  void set_bounds(int j, double lo, double hi);

  double objective_value(const Eigen::VectorXd& x) const;

  // Throws invalid_input on dimension mismatches, negative quadratic
  // coefficients, Na's, or lower[j] > upper[j].
  void validate() const;

  // Plain-text dump of the canonical form, for debugging and error reports.
  std::string debug_dump() const;
};

/**
 * Relative KKT residuals of a (program, solution) pair.
 *
 *   stationarity     |grad f - Aeq' y + G' mu - z_lo + z_hi|_inf, divided by
 *                    1 + the largest infinity norm among the summed terms.
 *   primal           worst constraint/bound violation divided by
 *                    1 + max(|rhs|_inf, |x|_inf).
 *   complementarity  worst of |mu_k * slack_k| / (1 + |mu_k| + |slack_k|)
 *                    over inequality rows and active bounds, and of any
 *                    negative dual magnitude.
 *
 * Exact analytic optima give (0, 0, 0) up to floating-point rounding.
 */
struct kkt_residuals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;

  double max() const;
};

/**
 * Primal-dual solution.  Dual sign conventions:
 *
 *   eq_duals[r]    = d(optimal value)/d(eq_rhs[r])        (free sign)
 *   ineq_duals[k]  >= 0, d(optimal value)/d(ineq_rhs[k]) = -ineq_duals[k]
 *   lower_duals[j] >= 0, multiplier on lower[j] <= x[j]
 *   upper_duals[j] >= 0, multiplier on x[j] <= upper[j]
 *
 * so a binding "<=" row with positive dual means relaxing its right-hand
 * side by one unit lowers the optimal cost by that dual.
 */
struct primal_dual_solution {
  Eigen::VectorXd x;
  Eigen::VectorXd eq_duals;
  Eigen::VectorXd ineq_duals;
  Eigen::VectorXd lower_duals;
  Eigen::VectorXd upper_duals;
  double objective = 0.0;
  kkt_residuals kkt;
  // True when the optimal basis is primal- or dual-degenerate (LP) or a
  // complementary pair (slack, dual) is ambiguous at tolerance (QP), i.e.
  // the reported duals may not be unique.
  bool degenerate = false;
  int iterations = 0;
};

struct solver_options {
  double kkt_tolerance = defaults::kkt_tolerance;
  int max_iterations = 0;  // 0 means an automatic size-based cap
};

/**
 * Solve the program to optimality.
 *
 * Throws solve_failure with status infeasible (naming a violated row
 * subset), unbounded, or numerical_failure (KKT residuals above tolerance
 * after the iteration cap).  Deterministic: identical inputs produce
 * identical outputs on the same build.
 */
primal_dual_solution solve(const convex_program& program,
                           const solver_options& options = {});

// Recompute the three residuals of a candidate solution from scratch;
// never trusts the solver's own bookkeeping.
kkt_residuals check_kkt(const convex_program& program,
                        const primal_dual_solution& solution);

// Lagrangian dual objective under the sign conventions above.  For an LP
// at optimality this equals the primal objective (strong duality).
double dual_objective(const convex_program& program,
                      const primal_dual_solution& solution);

}  // namespace ramplab
