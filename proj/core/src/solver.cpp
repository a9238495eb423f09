// Implementation of the dense LP/QP solver declared in solver.hpp.
//
// LPs go through a bounded-variable revised simplex (phase 1 with signed
// artificials, phase 2 with Bland's rule, explicit basis inverse with
// periodic refactorization).  QPs with a diagonal quadratic term go through
// a Mehrotra predictor-corrector interior-point method after a simplex
// phase-1 feasibility check, so infeasibility certificates are uniform
// across both paths.

#include "ramplab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ramplab {

namespace {

bool finite(double v) { return std::isfinite(v); }

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace

// ---- program construction and validation ----

convex_program convex_program::with_variables(int n) {
  if (n <= 0) throw invalid_input("convex_program: need at least one variable");
  convex_program p;
  p.cost_linear = Eigen::VectorXd::Zero(n);
  p.cost_quadratic = Eigen::VectorXd::Zero(n);
  p.eq_coeffs.resize(0, n);
  p.eq_rhs.resize(0);
  p.ineq_coeffs.resize(0, n);
  p.ineq_rhs.resize(0);
  p.lower = Eigen::VectorXd::Constant(n, -inf);
  p.upper = Eigen::VectorXd::Constant(n, inf);
  return p;
}

bool convex_program::is_linear() const {
  return cost_quadratic.size() == 0 || (cost_quadratic.array() == 0.0).all();
}

int convex_program::add_equality(const Eigen::VectorXd& row, double rhs) {
  if (row.size() != num_variables())
    throw invalid_input("add_equality: row length != variable count");
  eq_coeffs.conservativeResize(eq_coeffs.rows() + 1, num_variables());
  eq_coeffs.row(eq_coeffs.rows() - 1) = row.transpose();
  eq_rhs.conservativeResize(eq_rhs.size() + 1);
  eq_rhs(eq_rhs.size() - 1) = rhs;
  return static_cast<int>(eq_rhs.size()) - 1;
}

int convex_program::add_inequality(const Eigen::VectorXd& row, double rhs) {
  if (row.size() != num_variables())
    throw invalid_input("add_inequality: row length != variable count");
  ineq_coeffs.conservativeResize(ineq_coeffs.rows() + 1, num_variables());
  ineq_coeffs.row(ineq_coeffs.rows() - 1) = row.transpose();
  ineq_rhs.conservativeResize(ineq_rhs.size() + 1);
  ineq_rhs(ineq_rhs.size() - 1) = rhs;
  return static_cast<int>(ineq_rhs.size()) - 1;
}

void convex_program::set_bounds(int j, double lo, double hi) {
  if (j < 0 || j >= num_variables())
    throw invalid_input("set_bounds: variable index out of range");
  lower(j) = lo;
  upper(j) = hi;
}

double convex_program::objective_value(const Eigen::VectorXd& x) const {
  double quad = 0.0;
  if (cost_quadratic.size() > 0)
    quad = (cost_quadratic.array() * x.array().square()).sum();
  return cost_linear.dot(x) + quad;
}

void convex_program::validate() const {
  const int n = num_variables();
  if (n <= 0) throw invalid_input("convex_program: no variables");
  if (cost_quadratic.size() != 0 && cost_quadratic.size() != n)
    throw invalid_input("convex_program: cost_quadratic length mismatch");
  if (cost_quadratic.size() == n && (cost_quadratic.array() < 0.0).any())
    throw invalid_input("convex_program: negative quadratic cost (non-convex)");
  if (eq_coeffs.rows() != eq_rhs.size() || (eq_coeffs.rows() > 0 && eq_coeffs.cols() != n))
    throw invalid_input("convex_program: equality block dimension mismatch");
  if (ineq_coeffs.rows() != ineq_rhs.size() ||
      (ineq_coeffs.rows() > 0 && ineq_coeffs.cols() != n))
    throw invalid_input("convex_program: inequality block dimension mismatch");
  if (lower.size() != n || upper.size() != n)
    throw invalid_input("convex_program: bound vector length mismatch");
  for (int j = 0; j < n; ++j) {
    if (std::isnan(lower(j)) || std::isnan(upper(j)))
      throw invalid_input("convex_program: NaN bound");
    if (lower(j) > upper(j))
      throw invalid_input("convex_program: lower > upper for variable " + std::to_string(j));
  }
  auto check_finite = [](const Eigen::MatrixXd& m, const char* what) {
    if (m.size() > 0 && !m.allFinite())
      throw invalid_input(std::string("convex_program: non-finite entries in ") + what);
  };
  check_finite(cost_linear, "cost_linear");
  check_finite(eq_coeffs, "eq_coeffs");
  check_finite(eq_rhs, "eq_rhs");
  check_finite(ineq_coeffs, "ineq_coeffs");
  check_finite(ineq_rhs, "ineq_rhs");
}

std::string convex_program::debug_dump() const {
  std::ostringstream os;
  os << "minimize";
  for (int j = 0; j < num_variables(); ++j) {
    os << (j ? " + " : " ") << cost_linear(j) << "*x" << j;
    if (cost_quadratic.size() == num_variables() && cost_quadratic(j) != 0.0)
      os << " + " << cost_quadratic(j) << "*x" << j << "^2";
  }
  os << "\n";
  for (int r = 0; r < num_equalities(); ++r)
    os << "  eq[" << r << "]: " << eq_coeffs.row(r) << " == " << eq_rhs(r) << "\n";
  for (int r = 0; r < num_inequalities(); ++r)
    os << "  le[" << r << "]: " << ineq_coeffs.row(r) << " <= " << ineq_rhs(r) << "\n";
  for (int j = 0; j < num_variables(); ++j)
    os << "  x" << j << " in [" << lower(j) << ", " << upper(j) << "]\n";
  return os.str();
}

// ---- KKT residuals ----

double kkt_residuals::max() const {
  return std::max(stationarity, std::max(primal, complementarity));
}

kkt_residuals check_kkt(const convex_program& p, const primal_dual_solution& s) {
  kkt_residuals res;
  const int n = p.num_variables();
  const Eigen::VectorXd& x = s.x;

  Eigen::VectorXd grad = p.cost_linear;
  if (p.cost_quadratic.size() == n)
    grad += 2.0 * (p.cost_quadratic.array() * x.array()).matrix();

  Eigen::VectorXd aty = Eigen::VectorXd::Zero(n);
  if (p.num_equalities() > 0) aty = p.eq_coeffs.transpose() * s.eq_duals;
  Eigen::VectorXd gtm = Eigen::VectorXd::Zero(n);
  if (p.num_inequalities() > 0) gtm = p.ineq_coeffs.transpose() * s.ineq_duals;

  Eigen::VectorXd sv = grad - aty + gtm - s.lower_duals + s.upper_duals;
  double denom = 1.0 + std::max({inf_norm(grad), inf_norm(aty), inf_norm(gtm),
                                 inf_norm(s.lower_duals), inf_norm(s.upper_duals)});
  res.stationarity = inf_norm(sv) / denom;

  double viol = 0.0;
  double rhs_scale = inf_norm(x);
  if (p.num_equalities() > 0) {
    viol = std::max(viol, inf_norm(p.eq_coeffs * x - p.eq_rhs));
    rhs_scale = std::max(rhs_scale, inf_norm(p.eq_rhs));
  }
  Eigen::VectorXd islack;
  if (p.num_inequalities() > 0) {
    islack = p.ineq_rhs - p.ineq_coeffs * x;
    viol = std::max(viol, std::max(0.0, -islack.minCoeff()));
    rhs_scale = std::max(rhs_scale, inf_norm(p.ineq_rhs));
  }
  for (int j = 0; j < n; ++j) {
    if (finite(p.lower(j))) {
      viol = std::max(viol, p.lower(j) - x(j));
      rhs_scale = std::max(rhs_scale, std::abs(p.lower(j)));
    }
    if (finite(p.upper(j))) {
      viol = std::max(viol, x(j) - p.upper(j));
      rhs_scale = std::max(rhs_scale, std::abs(p.upper(j)));
    }
  }
  res.primal = viol / (1.0 + rhs_scale);

  auto pair_term = [](double dual, double slack) {
    double t = std::abs(dual * slack) / (1.0 + std::abs(dual) + std::abs(slack));
    double neg = std::max(0.0, -dual) / (1.0 + std::abs(dual));
    return std::max(t, neg);
  };
  double compl_worst = 0.0;
  for (int k = 0; k < p.num_inequalities(); ++k)
    compl_worst = std::max(compl_worst, pair_term(s.ineq_duals(k), islack(k)));
  for (int j = 0; j < n; ++j) {
    if (finite(p.lower(j)))
      compl_worst = std::max(compl_worst, pair_term(s.lower_duals(j), x(j) - p.lower(j)));
    else
      compl_worst = std::max(compl_worst, std::abs(s.lower_duals(j)));
    if (finite(p.upper(j)))
      compl_worst = std::max(compl_worst, pair_term(s.upper_duals(j), p.upper(j) - x(j)));
    else
      compl_worst = std::max(compl_worst, std::abs(s.upper_duals(j)));
  }
  res.complementarity = compl_worst;
  return res;
}

double dual_objective(const convex_program& p, const primal_dual_solution& s) {
  if (p.is_linear()) {
    double d = 0.0;
    if (p.num_equalities() > 0) d += s.eq_duals.dot(p.eq_rhs);
    if (p.num_inequalities() > 0) d -= s.ineq_duals.dot(p.ineq_rhs);
    for (int j = 0; j < p.num_variables(); ++j) {
      if (finite(p.lower(j))) d += s.lower_duals(j) * p.lower(j);
      if (finite(p.upper(j))) d -= s.upper_duals(j) * p.upper(j);
    }
    return d;
  }
  // Lagrangian evaluated at the returned primal point; equals the dual
  // objective when the stationarity residual is ~0.
  double l = p.objective_value(s.x);
  if (p.num_equalities() > 0) l -= s.eq_duals.dot(p.eq_coeffs * s.x - p.eq_rhs);
  if (p.num_inequalities() > 0) l += s.ineq_duals.dot(p.ineq_coeffs * s.x - p.ineq_rhs);
  for (int j = 0; j < p.num_variables(); ++j) {
    if (finite(p.lower(j))) l -= s.lower_duals(j) * (s.x(j) - p.lower(j));
    if (finite(p.upper(j))) l += s.upper_duals(j) * (s.x(j) - p.upper(j));
  }
  return l;
}

// ---- bounded-variable revised simplex ----

namespace {

enum class col_state : int8_t { at_lower, at_upper, basic, free_zero };

struct simplex {
  // Columns: [structural x | inequality slacks | one artificial per row].
  int n = 0, mi = 0, me = 0, m = 0, cols = 0;
  Eigen::MatrixXd A;   // m x cols
  Eigen::VectorXd lo, hi, cost;
  Eigen::VectorXd rhs;
  std::vector<col_state> state;
  Eigen::VectorXd value;           // current value per column
  std::vector<int> basic;          // row -> column
  std::vector<int> basic_pos;      // column -> row (or -1)
  Eigen::MatrixXd binv;
  int pivots_since_refactor = 0;
  int total_iterations = 0;
  double piv_tol = 1e-10;

  int art_begin() const { return n + mi; }
  bool is_artificial(int j) const { return j >= art_begin(); }
  bool is_fixed(int j) const { return lo(j) == hi(j); }

  explicit simplex(const convex_program& p) {
    n = p.num_variables();
    me = p.num_equalities();
    mi = p.num_inequalities();
    m = me + mi;
    cols = n + mi + m;
    A = Eigen::MatrixXd::Zero(m, cols);
    if (me > 0) A.block(0, 0, me, n) = p.eq_coeffs;
    if (mi > 0) {
      A.block(me, 0, mi, n) = p.ineq_coeffs;
      A.block(me, n, mi, mi) = Eigen::MatrixXd::Identity(mi, mi);
    }
    rhs.resize(m);
    if (me > 0) rhs.head(me) = p.eq_rhs;
    if (mi > 0) rhs.tail(mi) = p.ineq_rhs;
    lo.resize(cols);
    hi.resize(cols);
    lo.head(n) = p.lower;
    hi.head(n) = p.upper;
    lo.segment(n, mi).setZero();
    hi.segment(n, mi).setConstant(inf);
    lo.tail(m).setZero();
    hi.tail(m).setZero();  // opened per-row during phase-1 setup
    cost = Eigen::VectorXd::Zero(cols);
    state.assign(cols, col_state::at_lower);
    value = Eigen::VectorXd::Zero(cols);
    basic.assign(m, -1);
    basic_pos.assign(cols, -1);
  }

  // Start from nonbasic structurals at their bound nearest zero, slacks or
  // signed artificials basic so the initial basis matrix is diag(+-1).
  void phase1_setup() {
    for (int j = 0; j < n; ++j) {
      if (finite(lo(j)) && finite(hi(j)))
        state[j] = std::abs(lo(j)) <= std::abs(hi(j)) ? col_state::at_lower : col_state::at_upper;
      else if (finite(lo(j)))
        state[j] = col_state::at_lower;
      else if (finite(hi(j)))
        state[j] = col_state::at_upper;
      else
        state[j] = col_state::free_zero;
      value(j) = state[j] == col_state::at_lower   ? lo(j)
                 : state[j] == col_state::at_upper ? hi(j)
                                                   : 0.0;
    }
    Eigen::VectorXd residual = rhs - A.leftCols(n) * value.head(n);
    binv = Eigen::MatrixXd::Identity(m, m);
    for (int r = 0; r < m; ++r) {
      const bool ineq_row = r >= me;
      const int slack_col = ineq_row ? n + (r - me) : -1;
      const int art_col = art_begin() + r;
      if (ineq_row && residual(r) >= 0.0) {
        make_basic(slack_col, r, residual(r));
      } else {
        double sign = residual(r) < 0.0 ? -1.0 : 1.0;
        A(r, art_col) = sign;
        hi(art_col) = inf;
        cost(art_col) = 1.0;  // phase-1 objective
        make_basic(art_col, r, std::abs(residual(r)));
        binv(r, r) = sign;    // basis column is sign * e_r
        if (ineq_row) {
          state[slack_col] = col_state::at_lower;
          value(slack_col) = 0.0;
        }
      }
    }
  }

  void make_basic(int col, int row, double val) {
    basic[row] = col;
    basic_pos[col] = row;
    state[col] = col_state::basic;
    value(col) = val;
  }

  void refactor() {
    Eigen::MatrixXd b(m, m);
    for (int r = 0; r < m; ++r) b.col(r) = A.col(basic[r]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    binv = lu.inverse();
    if (!binv.allFinite())
      throw solve_failure(solve_status::numerical_failure, "simplex: singular basis");
    recompute_basic_values();
    pivots_since_refactor = 0;
  }

  void recompute_basic_values() {
    Eigen::VectorXd acc = rhs;
    for (int j = 0; j < cols; ++j) {
      if (state[j] == col_state::basic || value(j) == 0.0) continue;
      acc -= A.col(j) * value(j);
    }
    Eigen::VectorXd xb = binv * acc;
    for (int r = 0; r < m; ++r) value(basic[r]) = xb(r);
  }

  Eigen::VectorXd duals() const {
    Eigen::VectorXd cb(m);
    for (int r = 0; r < m; ++r) cb(r) = cost(basic[r]);
    return binv.transpose() * cb;
  }

  // One phase of iteration with Bland's rule.  Returns true at optimality,
  // throws on unboundedness (phase 2 only, artificials cannot be unbounded).
  bool iterate(int max_iterations, bool phase_two) {
    const double cost_scale = 1.0 + inf_norm(cost);
    const double d_tol = 1e-9 * cost_scale;
    while (true) {
      if (++total_iterations > max_iterations)
        throw solve_failure(solve_status::numerical_failure,
                            "simplex: iteration limit exceeded");
      Eigen::VectorXd y = duals();
      int enter = -1;
      double dir = 0.0;
      for (int j = 0; j < cols; ++j) {
        if (state[j] == col_state::basic || is_fixed(j)) continue;
        double rc = cost(j) - A.col(j).dot(y);
        if (state[j] == col_state::at_lower && rc < -d_tol) {
          enter = j; dir = 1.0; break;
        }
        if (state[j] == col_state::at_upper && rc > d_tol) {
          enter = j; dir = -1.0; break;
        }
        if (state[j] == col_state::free_zero && std::abs(rc) > d_tol) {
          enter = j; dir = rc > 0 ? -1.0 : 1.0; break;
        }
      }
      if (enter < 0) return true;

      Eigen::VectorXd d = binv * A.col(enter);
      // Max step for the entering variable before some basic variable or
      // its own opposite bound blocks.
      double own_range = hi(enter) - lo(enter);
      double t_best = finite(own_range) ? own_range : inf;
      int leave_row = -1;
      double leave_target = 0.0;
      std::vector<int> ties;
      for (int r = 0; r < m; ++r) {
        double delta = -dir * d(r);
        if (std::abs(delta) < piv_tol) continue;
        int bc = basic[r];
        double t;
        if (delta > 0.0) {
          if (!finite(hi(bc))) continue;
          t = (hi(bc) - value(bc)) / delta;
        } else {
          if (!finite(lo(bc))) continue;
          t = (lo(bc) - value(bc)) / delta;
        }
        t = std::max(t, 0.0);
        if (!finite(t_best) || t < t_best - 1e-12 * (1.0 + t_best)) {
          t_best = t;
          ties.clear();
          ties.push_back(r);
        } else if (t <= t_best + 1e-12 * (1.0 + t_best)) {
          ties.push_back(r);
        }
      }
      if (!finite(t_best)) {
        if (!phase_two)
          throw solve_failure(solve_status::numerical_failure,
                              "simplex: phase-1 objective unbounded");
        throw solve_failure(solve_status::unbounded,
                            "simplex: objective unbounded along variable " +
                                std::to_string(enter));
      }
      // Pick the leaving row: smallest basic column index among ties with an
      // acceptable pivot magnitude (Bland), falling back to the largest pivot.
      for (int r : ties) {
        double delta = -dir * d(r);
        double t = delta > 0.0 ? (hi(basic[r]) - value(basic[r])) / delta
                               : (lo(basic[r]) - value(basic[r])) / delta;
        if (std::max(t, 0.0) > t_best + 1e-12 * (1.0 + t_best)) continue;
        if (std::abs(d(r)) < 1e-9) continue;
        if (leave_row < 0 || basic[r] < basic[leave_row]) {
          leave_row = r;
          leave_target = delta > 0.0 ? hi(basic[r]) : lo(basic[r]);
        }
      }
      if (leave_row < 0 && !ties.empty()) {
        for (int r : ties)
          if (leave_row < 0 || std::abs(d(r)) > std::abs(d(leave_row))) leave_row = r;
        double delta = -dir * d(leave_row);
        leave_target = delta > 0.0 ? hi(basic[leave_row]) : lo(basic[leave_row]);
      }

      if (leave_row < 0 || own_range < t_best - 1e-12) {
        // Bound flip: entering variable crosses to its opposite bound.
        double t = own_range;
        for (int r = 0; r < m; ++r) value(basic[r]) -= dir * t * d(r);
        value(enter) += dir * t;
        state[enter] = state[enter] == col_state::at_lower ? col_state::at_upper
                                                           : col_state::at_lower;
        continue;
      }

      // Pivot: entering becomes basic in leave_row.
      double t = t_best;
      for (int r = 0; r < m; ++r) value(basic[r]) -= dir * t * d(r);
      int leaving = basic[leave_row];
      value(leaving) = leave_target;
      state[leaving] = leave_target == lo(leaving) ? col_state::at_lower : col_state::at_upper;
      basic_pos[leaving] = -1;
      double entering_value = value(enter) + dir * t;
      make_basic(enter, leave_row, entering_value);

      double piv = d(leave_row);
      if (std::abs(piv) < piv_tol) {
        refactor();
        continue;
      }
      apply_eta(d, leave_row);
    }
  }

  void apply_eta(const Eigen::VectorXd& d, int row) {
    binv.row(row) /= d(row);
    for (int r = 0; r < m; ++r) {
      if (r == row) continue;
      double f = d(r);
      if (f != 0.0) binv.row(r) -= f * binv.row(row);
    }
    if (++pivots_since_refactor >= 64) refactor();
  }

  // Degenerate zero-step pivot replacing one basic artificial (stuck at
  // zero) with a real column, preferring the lowest reduced cost.  Duals of
  // redundant or zero-demand rows then come from the cost structure rather
  // than phase-1 bookkeeping; with a degenerate dual set this selects the
  // right-derivative shadow price.  Returns false when nothing changed.
  bool pivot_out_artificial() {
    Eigen::VectorXd y = duals();
    for (int r = 0; r < m; ++r) {
      if (!is_artificial(basic[r])) continue;
      int best = -1;
      double best_rc = 0.0;
      for (int j = 0; j < art_begin(); ++j) {
        if (state[j] == col_state::basic || is_fixed(j)) continue;
        if (std::abs(binv.row(r).dot(A.col(j))) < 1e-9) continue;
        double rc = cost(j) - A.col(j).dot(y);
        if (best < 0 || rc < best_rc - 1e-12 ||
            (std::abs(rc - best_rc) <= 1e-12 && j < best)) {
          best = j;
          best_rc = rc;
        }
      }
      if (best < 0) continue;
      Eigen::VectorXd d = binv * A.col(best);
      int art = basic[r];
      basic_pos[art] = -1;
      state[art] = col_state::at_lower;
      value(art) = 0.0;
      make_basic(best, r, value(best));
      apply_eta(d, r);
      return true;
    }
    return false;
  }
};

primal_dual_solution pack_simplex_solution(const convex_program& p, simplex& s) {
  s.refactor();  // fresh factorization before extracting duals
  Eigen::VectorXd y = s.duals();

  primal_dual_solution out;
  out.x = s.value.head(s.n);
  out.eq_duals = y.head(s.me);
  out.ineq_duals.resize(s.mi);
  for (int i = 0; i < s.mi; ++i) out.ineq_duals(i) = std::max(0.0, -y(s.me + i));
  out.lower_duals = Eigen::VectorXd::Zero(s.n);
  out.upper_duals = Eigen::VectorXd::Zero(s.n);

  bool primal_degenerate = false, dual_degenerate = false;
  const double cost_scale = 1.0 + inf_norm(s.cost);
  for (int j = 0; j < s.cols; ++j) {
    if (s.state[j] == col_state::basic) {
      double margin = inf;
      if (finite(s.lo(j))) margin = std::min(margin, s.value(j) - s.lo(j));
      if (finite(s.hi(j))) margin = std::min(margin, s.hi(j) - s.value(j));
      if (finite(margin) && margin <= 1e-7 * (1.0 + std::abs(s.value(j))))
        primal_degenerate = true;
      continue;
    }
    if (s.is_artificial(j)) continue;
    double rc = s.cost(j) - s.A.col(j).dot(y);
    if (!s.is_fixed(j) && std::abs(rc) <= 1e-7 * cost_scale) dual_degenerate = true;
    if (j >= s.n) continue;
    if (s.is_fixed(j)) {
      out.lower_duals(j) = std::max(0.0, rc);
      out.upper_duals(j) = std::max(0.0, -rc);
    } else if (s.state[j] == col_state::at_lower) {
      out.lower_duals(j) = std::max(0.0, rc);
    } else if (s.state[j] == col_state::at_upper) {
      out.upper_duals(j) = std::max(0.0, -rc);
    }
  }
  out.degenerate = primal_degenerate || dual_degenerate;
  out.objective = p.objective_value(out.x);
  out.iterations = s.total_iterations;
  return out;
}

// Runs phase 1; throws solve_failure(infeasible) naming rows whose
// artificial variables stay positive.
void run_phase1(simplex& s, int max_iterations) {
  s.phase1_setup();
  s.iterate(max_iterations, /*phase_two=*/false);
  double art_sum = 0.0;
  std::vector<int> violated;
  for (int r = 0; r < s.m; ++r) {
    int a = s.art_begin() + r;
    double v = s.value(a);
    if (s.state[a] != col_state::basic) v = 0.0;
    art_sum += std::max(v, 0.0);
    if (v > 1e-7 * (1.0 + inf_norm(s.rhs))) violated.push_back(r);
  }
  if (art_sum > 1e-7 * (1.0 + inf_norm(s.rhs))) {
    std::ostringstream os;
    os << "infeasible program; unsatisfiable row subset {";
    for (size_t i = 0; i < violated.size(); ++i) os << (i ? "," : "") << violated[i];
    os << "} (0-based, equalities first)";
    throw solve_failure(solve_status::infeasible, os.str(), violated);
  }
  // Freeze artificials at zero for phase 2.
  for (int r = 0; r < s.m; ++r) {
    int a = s.art_begin() + r;
    s.hi(a) = 0.0;
    if (s.state[a] != col_state::basic) {
      s.state[a] = col_state::at_lower;
      s.value(a) = 0.0;
    }
  }
}

primal_dual_solution solve_lp(const convex_program& p, const solver_options& opt) {
  simplex s(p);
  int cap = opt.max_iterations > 0 ? opt.max_iterations : 200 * (s.m + s.cols) + 5000;
  run_phase1(s, cap);
  s.cost.setZero();
  s.cost.head(s.n) = p.cost_linear;
  s.iterate(cap, /*phase_two=*/true);
  // Re-optimize after each artificial eviction; entering never picks the
  // fixed artificials again, so this terminates in at most m swaps.
  while (s.pivot_out_artificial()) s.iterate(cap, /*phase_two=*/true);
  return pack_simplex_solution(p, s);
}

// ---- interior-point method for diagonal QPs ----

// Fixed variables (lower == upper) are substituted out before the IPM runs
// and their bound duals recovered from the stationarity condition afterward.
primal_dual_solution solve_qp(const convex_program& p0, const solver_options& opt) {
  const int n0 = p0.num_variables();
  std::vector<int> keep;
  keep.reserve(n0);
  for (int j = 0; j < n0; ++j)
    if (p0.lower(j) != p0.upper(j)) keep.push_back(j);

  // Reduced program over the non-fixed variables.
  const int n = static_cast<int>(keep.size());
  if (n == 0) throw invalid_input("solve: all variables fixed in a QP");
  Eigen::VectorXd xfix = Eigen::VectorXd::Zero(n0);
  for (int j = 0; j < n0; ++j)
    if (p0.lower(j) == p0.upper(j)) xfix(j) = p0.lower(j);

  Eigen::VectorXd c(n), q(n), lo(n), hi(n);
  for (int k = 0; k < n; ++k) {
    c(k) = p0.cost_linear(keep[k]);
    q(k) = p0.cost_quadratic.size() == n0 ? p0.cost_quadratic(keep[k]) : 0.0;
    lo(k) = p0.lower(keep[k]);
    hi(k) = p0.upper(keep[k]);
  }
  const int me = p0.num_equalities();
  const int mg = p0.num_inequalities();
  Eigen::MatrixXd aeq(me, n);
  Eigen::VectorXd beq(me);
  for (int r = 0; r < me; ++r) {
    double shift = 0.0;
    for (int k = 0; k < n; ++k) aeq(r, k) = p0.eq_coeffs(r, keep[k]);
    for (int j = 0; j < n0; ++j)
      if (p0.lower(j) == p0.upper(j)) shift += p0.eq_coeffs(r, j) * xfix(j);
    beq(r) = p0.eq_rhs(r) - shift;
  }

  // Inequality rows of C: general rows, then -x<= -lo, then x <= hi.
  std::vector<int> lo_rows, hi_rows;
  for (int k = 0; k < n; ++k) {
    if (finite(lo(k))) lo_rows.push_back(k);
    if (finite(hi(k))) hi_rows.push_back(k);
  }
  const int mc = mg + static_cast<int>(lo_rows.size() + hi_rows.size());
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(mc, n);
  Eigen::VectorXd h(mc);
  for (int r = 0; r < mg; ++r) {
    double shift = 0.0;
    for (int k = 0; k < n; ++k) C(r, k) = p0.ineq_coeffs(r, keep[k]);
    for (int j = 0; j < n0; ++j)
      if (p0.lower(j) == p0.upper(j)) shift += p0.ineq_coeffs(r, j) * xfix(j);
    h(r) = p0.ineq_rhs(r) - shift;
  }
  for (size_t i = 0; i < lo_rows.size(); ++i) {
    C(mg + static_cast<int>(i), lo_rows[i]) = -1.0;
    h(mg + static_cast<int>(i)) = -lo(lo_rows[i]);
  }
  const int hi_base = mg + static_cast<int>(lo_rows.size());
  for (size_t i = 0; i < hi_rows.size(); ++i) {
    C(hi_base + static_cast<int>(i), hi_rows[i]) = 1.0;
    h(hi_base + static_cast<int>(i)) = hi(hi_rows[i]);
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    if (finite(lo(k)) && x(k) < lo(k)) x(k) = lo(k);
    if (finite(hi(k)) && x(k) > hi(k)) x(k) = hi(k);
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(me);
  Eigen::VectorXd s = Eigen::VectorXd::Ones(mc);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(mc);
  if (mc > 0) s = (h - C * x).cwiseMax(1.0);

  const double tol = opt.kkt_tolerance;
  const int max_it = opt.max_iterations > 0 ? opt.max_iterations : 100;
  const double obj_scale = 1.0 + inf_norm(c);
  int it = 0;
  for (; it < max_it; ++it) {
    Eigen::VectorXd grad = c + 2.0 * (q.array() * x.array()).matrix();
    Eigen::VectorXd rd = grad;
    if (me > 0) rd -= aeq.transpose() * y;
    if (mc > 0) rd += C.transpose() * z;
    Eigen::VectorXd rp = me > 0 ? Eigen::VectorXd(aeq * x - beq) : Eigen::VectorXd();
    Eigen::VectorXd rc = mc > 0 ? Eigen::VectorXd(C * x + s - h) : Eigen::VectorXd();
    double mu = mc > 0 ? s.dot(z) / mc : 0.0;

    double rel_rd = inf_norm(rd) / (1.0 + inf_norm(grad) + inf_norm(z));
    double rel_rp = (me > 0 ? inf_norm(rp) : 0.0) / (1.0 + inf_norm(beq) + inf_norm(x));
    double rel_rc = (mc > 0 ? inf_norm(rc) : 0.0) / (1.0 + inf_norm(h) + inf_norm(x));
    double rel_mu = 0.0;
    for (int i = 0; i < mc; ++i)
      rel_mu = std::max(rel_mu, s(i) * z(i) / (1.0 + std::abs(s(i)) + std::abs(z(i))));
    if (std::max({rel_rd, rel_rp, rel_rc, rel_mu}) < 0.05 * tol) break;

    Eigen::VectorXd zs = mc > 0 ? Eigen::VectorXd(z.array() / s.array()) : Eigen::VectorXd();
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + me, n + me);
    for (int k = 0; k < n; ++k) kkt(k, k) = 2.0 * q(k);
    if (mc > 0) kkt.topLeftCorner(n, n) += C.transpose() * zs.asDiagonal() * C;
    if (me > 0) {
      kkt.topRightCorner(n, me) = -aeq.transpose();
      kkt.bottomLeftCorner(me, n) = aeq;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);

    auto solve_step = [&](const Eigen::VectorXd& rmu, Eigen::VectorXd& dx,
                          Eigen::VectorXd& dy, Eigen::VectorXd& ds, Eigen::VectorXd& dz) {
      Eigen::VectorXd rhs(n + me);
      Eigen::VectorXd top = -rd;
      if (mc > 0)
        top += C.transpose() *
               ((rmu.array() - z.array() * rc.array()) / s.array()).matrix();
      rhs.head(n) = top;
      if (me > 0) rhs.tail(me) = -rp;
      Eigen::VectorXd sol = lu.solve(rhs);
      dx = sol.head(n);
      dy = me > 0 ? Eigen::VectorXd(sol.tail(me)) : Eigen::VectorXd();
      if (mc > 0) {
        ds = -rc - C * dx;
        dz = ((-rmu.array() - z.array() * ds.array()) / s.array()).matrix();
      }
    };
    auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
      double a = 1.0;
      for (int i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
      return a;
    };

    Eigen::VectorXd dx, dy, ds, dz;
    Eigen::VectorXd rmu_aff =
        mc > 0 ? Eigen::VectorXd(s.array() * z.array()) : Eigen::VectorXd();
    solve_step(rmu_aff, dx, dy, ds, dz);

    double sigma = 0.0;
    Eigen::VectorXd rmu = rmu_aff;
    if (mc > 0) {
      double a_aff = std::min(max_step(s, ds), max_step(z, dz));
      double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / mc;
      sigma = mu > 0 ? std::pow(mu_aff / mu, 3.0) : 0.0;
      sigma = std::clamp(sigma, 0.0, 1.0);
      rmu = (s.array() * z.array() + ds.array() * dz.array() - sigma * mu).matrix();
      solve_step(rmu, dx, dy, ds, dz);
    }

    double ap = 1.0, ad = 1.0;
    if (mc > 0) {
      ap = std::min(1.0, 0.995 * max_step(s, ds));
      ad = std::min(1.0, 0.995 * max_step(z, dz));
    }
    x += ap * dx;
    if (mc > 0) {
      s += ap * ds;
      z += ad * dz;
    }
    if (me > 0) y += ad * dy;

    if (p0.objective_value(x) < -1e15 * obj_scale || !x.allFinite())
      throw solve_failure(solve_status::unbounded, "interior point: objective diverging");
  }

  // Expand back to the full variable set.
  primal_dual_solution out;
  out.x = xfix;
  for (int k = 0; k < n; ++k) out.x(keep[k]) = x(k);
  out.eq_duals = y;
  out.ineq_duals = mc > 0 ? Eigen::VectorXd(z.head(mg)) : Eigen::VectorXd::Zero(mg);
  out.lower_duals = Eigen::VectorXd::Zero(n0);
  out.upper_duals = Eigen::VectorXd::Zero(n0);
  for (size_t i = 0; i < lo_rows.size(); ++i)
    out.lower_duals(keep[lo_rows[i]]) = z(mg + static_cast<int>(i));
  for (size_t i = 0; i < hi_rows.size(); ++i)
    out.upper_duals(keep[hi_rows[i]]) = z(hi_base + static_cast<int>(i));
  // Duals of fixed variables from stationarity.
  Eigen::VectorXd grad0 = p0.cost_linear;
  if (p0.cost_quadratic.size() == n0)
    grad0 += 2.0 * (p0.cost_quadratic.array() * out.x.array()).matrix();
  Eigen::VectorXd resid = grad0;
  if (me > 0) resid -= p0.eq_coeffs.transpose() * out.eq_duals;
  if (mg > 0) resid += p0.ineq_coeffs.transpose() * out.ineq_duals;
  for (int j = 0; j < n0; ++j) {
    if (p0.lower(j) != p0.upper(j)) continue;
    out.lower_duals(j) = std::max(0.0, resid(j));
    out.upper_duals(j) = std::max(0.0, -resid(j));
  }
  out.objective = p0.objective_value(out.x);
  out.iterations = it;
  double pair_tol = 1e-6 * (1.0 + (mc > 0 ? inf_norm(z) : 0.0));
  out.degenerate = false;
  for (int i = 0; i < mc; ++i)
    if (s(i) < pair_tol && z(i) < pair_tol) out.degenerate = true;
  return out;
}

// Phase-1-only feasibility probe used before the IPM so infeasible QPs get
// the same certificate format as LPs.
void ensure_feasible(const convex_program& p, const solver_options& opt) {
  convex_program lp = p;
  lp.cost_linear.setZero();
  lp.cost_quadratic.resize(0);
  simplex s(lp);
  int cap = opt.max_iterations > 0 ? opt.max_iterations : 200 * (s.m + s.cols) + 5000;
  run_phase1(s, cap);
}

}  // namespace

primal_dual_solution solve(const convex_program& program, const solver_options& options) {
  program.validate();
  primal_dual_solution sol;
  if (program.is_linear()) {
    sol = solve_lp(program, options);
  } else {
    ensure_feasible(program, options);
    sol = solve_qp(program, options);
  }
  sol.kkt = check_kkt(program, sol);
  if (sol.kkt.max() > options.kkt_tolerance) {
    std::ostringstream os;
    os << "solution rejected: KKT residuals (stationarity " << sol.kkt.stationarity
       << ", primal " << sol.kkt.primal << ", complementarity " << sol.kkt.complementarity
       << ") exceed tolerance " << options.kkt_tolerance;
    throw solve_failure(solve_status::numerical_failure, os.str());
  }
  return sol;
}

}  // namespace ramplab
