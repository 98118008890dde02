#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "perfloss/anfis.hpp"
#include "perfloss/causal.hpp"
#include "perfloss/fuzzy.hpp"

namespace perfloss {

/// A component carrying a process, observed through one degradation
/// indicator. term_kinds runs parallel to the partition's terms.
struct SupportPort {
  std::string id;
  std::string indicator;
  FuzzyPartition partition;
  std::vector<SupportKind> term_kinds;
  double reset_value = 0.0;
  double degraded_capability = 50.0;  // percent delivered when fully degraded

  /// +1 when the failed side is at the top of the domain, -1 when at the bottom.
  int severity_direction() const;
};

struct FlowPort {
  std::string name;       // port name; output port names are the system's flow ids
  std::string flow;       // declared flow type
  std::string attribute;
  std::string unit;
  FuzzyPartition partition;
  double nominal = 100.0;
};

struct OutputPort {
  FlowPort port;
  AnfisModel model;  // inputs: input ports then supports, in declared order
};

struct ProcessNode {
  std::string id;
  std::vector<FlowPort> inputs;
  std::vector<SupportPort> supports;
  std::vector<OutputPort> outputs;
};

struct Edge {
  std::string from_node;
  std::string from_port;
  std::string to_node;
  std::string to_port;
};

struct BoundaryInput {
  enum class Kind { kFlow, kIndicator };

  std::string id;
  Kind kind = Kind::kFlow;
  std::size_t node = 0;
  std::size_t index = 0;  // input port or support index within the node
};

struct FlowRef {
  std::string id;
  std::size_t node = 0;
  std::size_t output = 0;
};

class SystemModel {
 public:
  const std::vector<ProcessNode>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  /// Declaration order: processes in order, input ports then supports.
  const std::vector<BoundaryInput>& boundary_inputs() const noexcept { return boundary_; }
  /// Every output flow in evaluation order.
  const std::vector<FlowRef>& flows() const noexcept { return flows_; }
  const std::vector<std::string>& boundary_outputs() const noexcept { return boundary_outputs_; }
  const std::vector<std::size_t>& order() const noexcept { return order_; }

  std::optional<std::size_t> boundary_index(std::string_view id) const;
  std::optional<std::size_t> node_index(std::string_view id) const;
  /// Upstream (node, output) feeding (node, input port), if connected.
  std::optional<std::pair<std::size_t, std::size_t>> source_of(std::size_t node,
                                                               std::size_t input) const;
  ProcessNode& node_mut(std::size_t i) { return nodes_.at(i); }

 private:
  friend SystemModel compose(std::vector<ProcessNode> nodes, std::vector<Edge> edges);

  std::vector<ProcessNode> nodes_;
  std::vector<Edge> edges_;
  std::vector<BoundaryInput> boundary_;
  std::vector<FlowRef> flows_;
  std::vector<std::string> boundary_outputs_;
  std::vector<std::size_t> order_;
  std::map<std::pair<std::size_t, std::size_t>, std::pair<std::size_t, std::size_t>> sources_;
};

/// Validates and wires processes into an acyclic flow graph.
SystemModel compose(std::vector<ProcessNode> nodes, std::vector<Edge> edges);

struct FlowValues {
  std::vector<std::string> ids;   // in evaluation order
  std::vector<double> values;

  double at(std::string_view id) const;
};

/// Evaluates every node in topological order. `boundary` follows
/// boundary_inputs() order.
FlowValues system_forward(const SystemModel& system, std::span<const double> boundary);
FlowValues system_forward(const SystemModel& system, const std::map<std::string, double>& boundary);

/// Model inputs for one node given upstream flow values and boundary values.
std::vector<double> node_inputs(const SystemModel& system, std::size_t node,
                                std::span<const double> boundary, const FlowValues& upstream);

}  // namespace perfloss
