// Shared error types and numeric defaults used across the library.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ramplab {

// Base class for all library errors.
class error : public std::runtime_error {
public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed inputs: bad dimensions, negative capacities, unknown ids, ...
class invalid_input : public error {
public:
  explicit invalid_input(const std::string& what) : error(what) {}
};

// Configuration file problems (missing fields, wrong types, bad values).
class config_error : public error {
public:
  explicit config_error(const std::string& what) : error(what) {}
};

enum class solve_status { optimal, infeasible, unbounded, numerical_failure };

// Optimization failure carrying a machine-readable status plus, for
// infeasible programs, the indices of a violated constraint subset
// (row indices into the program's combined [equalities; inequalities] list).
class solve_failure : public error {
public:
  solve_failure(solve_status status, const std::string& what,
                std::vector<int> violated_rows = {})
      : error(what), status(status), violated_rows(std::move(violated_rows)) {}

  solve_status status;
  std::vector<int> violated_rows;
};

// Raised when a market identity that should hold by construction is
// violated beyond tolerance (maps to CLI exit code 3).
class invariant_violation : public error {
public:
  explicit invariant_violation(const std::string& what) : error(what) {}
};

namespace defaults {
// Relative KKT residual accepted from the solver.
inline constexpr double kkt_tolerance = 1e-8;
// Tolerance for market identities checked downstream of the solver,
// relative to the money/power scale of the quantity under test.
inline constexpr double check_tolerance = 1e-6;
// Penalty price ($/MWh) on emergency slack injection and curtailment.
inline constexpr double slack_penalty = 10000.0;
}  // namespace defaults

}  // namespace ramplab
