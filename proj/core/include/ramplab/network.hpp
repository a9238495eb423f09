// DC network model: fixed shift-factor matrix, directed line limits, and
// linear flows from net bus injections.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ramplab/common.hpp"

namespace ramplab {

// Net withdrawal/injection pattern for one interval, both in MW by bus.
struct injection {
  Eigen::VectorXd generation_by_bus;
  Eigen::VectorXd demand_by_bus;
};

// One line of a radial (tree) network.  Flow is measured from `from_bus`
// to `to_bus`; each direction carries its own MW limit.
struct radial_line {
  int from_bus = 0;
  int to_bus = 0;
  double limit_forward = 0.0;
  double limit_backward = 0.0;
};

// Shift factors for a radial network: row pair (2l, 2l+1) holds the
// +1/-1/0 sensitivities of line l's forward and reverse flow to bus
// injections.  Columns for the reference bus are zero.  Throws
// invalid_input for cyclic or disconnected topologies.
Eigen::MatrixXd radial_shift_factors(const std::vector<radial_line>& lines,
                                     int reference_bus, int num_buses);

// Transmission network with B physical lines expressed as 2B directed flow
// rows: flows(2l) is line l's forward flow, flows(2l+1) the reverse, and
// feasibility means flows <= line_limits componentwise.
class network {
public:
  // shift_factors: (2B x M), line_limits: (2B), both directions per line.
  network(int num_buses, Eigen::MatrixXd shift_factors, Eigen::VectorXd line_limits,
          std::vector<std::string> bus_labels = {});

  static network single_bus();
  static network radial(const std::vector<radial_line>& lines, int reference_bus,
                        int num_buses, std::vector<std::string> bus_labels = {});

  int num_buses() const { return num_buses_; }
  int num_flow_rows() const { return static_cast<int>(limits_.size()); }
  const Eigen::MatrixXd& shift_factors() const { return shift_; }
  const Eigen::VectorXd& line_limits() const { return limits_; }
  const std::vector<std::string>& bus_labels() const { return labels_; }
  int bus_index(const std::string& label) const;  // throws invalid_input

  // Directed flows S * (generation - demand); linear in the injection.
  Eigen::VectorXd branch_flows(const injection& inj) const;

private:
  int num_buses_ = 0;
  Eigen::MatrixXd shift_;
  Eigen::VectorXd limits_;
  std::vector<std::string> labels_;
};

}  // namespace ramplab
