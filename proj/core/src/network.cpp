#include "ramplab/network.hpp"

#include <algorithm>

namespace ramplab {

Eigen::MatrixXd radial_shift_factors(const std::vector<radial_line>& lines,
                                     int reference_bus, int num_buses) {
  const int nl = static_cast<int>(lines.size());
  if (num_buses <= 0) throw invalid_input("radial_shift_factors: no buses");
  if (reference_bus < 0 || reference_bus >= num_buses)
    throw invalid_input("radial_shift_factors: reference bus out of range");
  if (nl != num_buses - 1)
    throw invalid_input("radial_shift_factors: a radial network needs exactly "
                        "num_buses - 1 lines");

  std::vector<std::vector<std::pair<int, int>>> adj(num_buses);  // (neighbor, line)
  for (int l = 0; l < nl; ++l) {
    int u = lines[l].from_bus, v = lines[l].to_bus;
    if (u < 0 || u >= num_buses || v < 0 || v >= num_buses || u == v)
      throw invalid_input("radial_shift_factors: bad endpoints on line " + std::to_string(l));
    adj[u].push_back({v, l});
    adj[v].push_back({u, l});
  }

  // Walk the tree from the reference bus.  Cutting line l splits off the
  // subtree on its far side; the flow on l equals the summed net injection
  // of that subtree, signed by whether the far side holds the from-end.
  std::vector<int> parent(num_buses, -1), parent_line(num_buses, -1), order;
  std::vector<bool> seen(num_buses, false);
  order.reserve(num_buses);
  order.push_back(reference_bus);
  seen[reference_bus] = true;
  for (size_t i = 0; i < order.size(); ++i) {
    int cur = order[i];
    for (auto [nb, l] : adj[cur]) {
      if (seen[nb]) {
        if (parent_line[cur] != l)
          throw invalid_input("radial_shift_factors: topology contains a cycle");
        continue;
      }
      seen[nb] = true;
      parent[nb] = cur;
      parent_line[nb] = l;
      order.push_back(nb);
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw invalid_input("radial_shift_factors: network is disconnected");

  // Bus m sits on the far side of every line on its path to the reference;
  // at each step the child endpoint of the parent line is `cur` itself.
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2 * nl, num_buses);
  for (int m = 0; m < num_buses; ++m) {
    if (m == reference_bus) continue;
    for (int cur = m; cur != reference_bus; cur = parent[cur]) {
      int l = parent_line[cur];
      double sign = (lines[l].from_bus == cur) ? 1.0 : -1.0;
      s(2 * l, m) = sign;
      s(2 * l + 1, m) = -sign;
    }
  }
  return s;
}

network::network(int num_buses, Eigen::MatrixXd shift_factors,
                 Eigen::VectorXd line_limits, std::vector<std::string> bus_labels)
    : num_buses_(num_buses),
      shift_(std::move(shift_factors)),
      limits_(std::move(line_limits)),
      labels_(std::move(bus_labels)) {
  if (num_buses_ <= 0) throw invalid_input("network: need at least one bus");
  if (shift_.rows() != limits_.size())
    throw invalid_input("network: one limit per directed flow row required");
  if (shift_.rows() % 2 != 0)
    throw invalid_input("network: flow rows must come in direction pairs");
  if (shift_.rows() > 0 && shift_.cols() != num_buses_)
    throw invalid_input("network: shift factor columns != bus count");
  if ((limits_.array() < 0.0).any())
    throw invalid_input("network: negative line limit");
  if (labels_.empty()) {
    labels_.reserve(num_buses_);
    for (int m = 0; m < num_buses_; ++m) labels_.push_back("bus" + std::to_string(m + 1));
  }
  if (static_cast<int>(labels_.size()) != num_buses_)
    throw invalid_input("network: bus label count mismatch");
}

network network::single_bus() {
  return network(1, Eigen::MatrixXd::Zero(0, 1), Eigen::VectorXd::Zero(0));
}

network network::radial(const std::vector<radial_line>& lines, int reference_bus,
                        int num_buses, std::vector<std::string> bus_labels) {
  Eigen::MatrixXd s = radial_shift_factors(lines, reference_bus, num_buses);
  Eigen::VectorXd limits(2 * lines.size());
  for (size_t l = 0; l < lines.size(); ++l) {
    if (lines[l].limit_forward < 0.0 || lines[l].limit_backward < 0.0)
      throw invalid_input("network: negative limit on line " + std::to_string(l));
    limits(2 * l) = lines[l].limit_forward;
    limits(2 * l + 1) = lines[l].limit_backward;
  }
  return network(num_buses, std::move(s), std::move(limits), std::move(bus_labels));
}

int network::bus_index(const std::string& label) const {
  for (int m = 0; m < num_buses_; ++m)
    if (labels_[m] == label) return m;
  throw invalid_input("network: unknown bus label '" + label + "'");
}

Eigen::VectorXd network::branch_flows(const injection& inj) const {
  if (inj.generation_by_bus.size() != num_buses_ || inj.demand_by_bus.size() != num_buses_)
    throw invalid_input("branch_flows: injection vectors must have one entry per bus");
  if (num_flow_rows() == 0) return Eigen::VectorXd::Zero(0);
  return shift_ * (inj.generation_by_bus - inj.demand_by_bus);
}

}  // namespace ramplab
