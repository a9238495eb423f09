// Generator data shared by the dispatch, scenario, and settlement modules.
#pragma once

#include <optional>
#include <string>

#include "ramplab/common.hpp"

namespace ramplab {

// One dispatchable unit.  Costs are f(g) = marginal_cost * g +
// quadratic_cost * g^2 in $/h at output g MW.  Ramp limits are MW per
// interval; `revealed_*` are the limits submitted to the market when they
// differ from the true ones (truth-revelation experiments).  Market
// clearing always uses the revealed limits, cost truth-telling is assumed.
struct generator_spec {
  std::string id;
  int bus = 0;
  double marginal_cost = 0.0;
  double quadratic_cost = 0.0;
  double capacity = 0.0;
  double ramp_up = 0.0;
  double ramp_down = 0.0;
  std::optional<double> revealed_ramp_up;
  std::optional<double> revealed_ramp_down;

  double cleared_ramp_up() const { return revealed_ramp_up.value_or(ramp_up); }
  double cleared_ramp_down() const { return revealed_ramp_down.value_or(ramp_down); }

  double cost_at(double g) const { return marginal_cost * g + quadratic_cost * g * g; }
  double marginal_cost_at(double g) const { return marginal_cost + 2.0 * quadratic_cost * g; }

  void validate(int num_buses) const {
    if (id.empty()) throw invalid_input("generator: empty id");
    if (bus < 0 || bus >= num_buses)
      throw invalid_input("generator " + id + ": bus out of range");
    if (capacity < 0.0) throw invalid_input("generator " + id + ": negative capacity");
    if (quadratic_cost < 0.0)
      throw invalid_input("generator " + id + ": negative quadratic cost");
    if (ramp_up < 0.0 || ramp_down < 0.0 || cleared_ramp_up() < 0.0 || cleared_ramp_down() < 0.0)
      throw invalid_input("generator " + id + ": negative ramp limit");
  }
};

}  // namespace ramplab
