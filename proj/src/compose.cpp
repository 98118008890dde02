#include "perfloss/compose.hpp"

#include <algorithm>
#include <set>

#include "perfloss/error.hpp"

namespace perfloss {

int SupportPort::severity_direction() const {
  std::optional<std::size_t> healthy, failed;
  for (std::size_t i = 0; i < term_kinds.size(); ++i) {
    if (term_kinds[i] == SupportKind::kHealthy && !healthy) healthy = i;
    if (term_kinds[i] == SupportKind::kFailed) failed = i;
  }
  if (healthy && failed) return *failed > *healthy ? 1 : -1;
  if (healthy) return *healthy == 0 ? 1 : -1;
  return 1;
}

std::optional<std::size_t> SystemModel::boundary_index(std::string_view id) const {
  for (std::size_t i = 0; i < boundary_.size(); ++i)
    if (boundary_[i].id == id) return i;
  return std::nullopt;
}

std::optional<std::size_t> SystemModel::node_index(std::string_view id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].id == id) return i;
  return std::nullopt;
}

std::optional<std::pair<std::size_t, std::size_t>> SystemModel::source_of(std::size_t node,
                                                                          std::size_t input) const {
  auto it = sources_.find({node, input});
  if (it == sources_.end()) return std::nullopt;
  return it->second;
}

SystemModel compose(std::vector<ProcessNode> nodes, std::vector<Edge> edges) {
  SystemModel sys;
  std::set<std::string> node_ids, flow_ids, support_ids;
  for (const auto& n : nodes) {
    if (!node_ids.insert(n.id).second)
      throw Error(ErrorCode::kInvalidArgument, "duplicate process '" + n.id + "'");
    std::set<std::string> ports;
    for (const auto& in : n.inputs)
      if (!ports.insert(in.name).second)
        throw Error(ErrorCode::kInvalidArgument, "process '" + n.id + "' repeats port '" + in.name + "'");
    for (const auto& s : n.supports) {
      if (!support_ids.insert(s.id).second)
        throw Error(ErrorCode::kInvalidArgument, "support '" + s.id + "' is used by two processes");
      if (s.term_kinds.size() != s.partition.size())
        throw Error(ErrorCode::kInvalidArgument, "support '" + s.id + "' has unclassified states");
    }
    if (n.outputs.empty())
      throw Error(ErrorCode::kInvalidArgument, "process '" + n.id + "' has no output");
    for (const auto& out : n.outputs) {
      if (!flow_ids.insert(out.port.name).second)
        throw Error(ErrorCode::kInvalidArgument, "flow '" + out.port.name + "' is produced twice");
      const auto& mi = out.model.inputs();
      if (mi.size() != n.inputs.size() + n.supports.size())
        throw Error(ErrorCode::kInvalidArgument,
                    "model of '" + n.id + "." + out.port.name + "' does not match the process ports");
      for (std::size_t k = 0; k < n.inputs.size(); ++k)
        if (mi[k].name != n.inputs[k].name)
          throw Error(ErrorCode::kInvalidArgument, "model of '" + n.id + "." + out.port.name +
                                                       "' expects input '" + mi[k].name + "'");
      for (std::size_t k = 0; k < n.supports.size(); ++k)
        if (mi[n.inputs.size() + k].name != n.supports[k].indicator)
          throw Error(ErrorCode::kInvalidArgument, "model of '" + n.id + "." + out.port.name +
                                                       "' expects indicator '" +
                                                       mi[n.inputs.size() + k].name + "'");
    }
  }
  sys.nodes_ = std::move(nodes);
  sys.edges_ = std::move(edges);
  const auto& ns = sys.nodes_;

  std::vector<std::set<std::size_t>> successors(ns.size());
  std::vector<std::size_t> indegree(ns.size(), 0);
  std::set<std::size_t> feeding;  // node*N+output pairs that feed an edge
  for (const auto& e : sys.edges_) {
    const std::string text = e.from_node + "." + e.from_port + " -> " + e.to_node + "." + e.to_port;
    auto from = sys.node_index(e.from_node);
    auto to = sys.node_index(e.to_node);
    if (!from || !to) throw Error(ErrorCode::kDanglingEdge, text + ": unknown process");
    const auto& fo = ns[*from].outputs;
    auto out_it = std::find_if(fo.begin(), fo.end(), [&](const OutputPort& o) { return o.port.name == e.from_port; });
    if (out_it == fo.end()) throw Error(ErrorCode::kDanglingEdge, text + ": no output port '" + e.from_port + "'");
    const auto& ti = ns[*to].inputs;
    auto in_it = std::find_if(ti.begin(), ti.end(), [&](const FlowPort& p) { return p.name == e.to_port; });
    if (in_it == ti.end()) throw Error(ErrorCode::kDanglingEdge, text + ": no input port '" + e.to_port + "'");
    if (out_it->port.attribute != in_it->attribute || out_it->port.unit != in_it->unit)
      throw Error(ErrorCode::kPortMismatch, text + ": '" + out_it->port.attribute + "' [" +
                                                out_it->port.unit + "] vs '" + in_it->attribute +
                                                "' [" + in_it->unit + "]");
    const std::size_t out_idx = static_cast<std::size_t>(out_it - fo.begin());
    const std::size_t in_idx = static_cast<std::size_t>(in_it - ti.begin());
    if (!sys.sources_.emplace(std::pair{*to, in_idx}, std::pair{*from, out_idx}).second)
      throw Error(ErrorCode::kInvalidArgument, text + ": input already connected");
    feeding.insert(*from * 4096 + out_idx);
    if (*from == *to) throw Error(ErrorCode::kCycleDetected, text + ": process feeds itself");
    if (successors[*from].insert(*to).second) ++indegree[*to];
  }

  // Kahn's algorithm, ties broken by process id.
  std::set<std::pair<std::string, std::size_t>> ready;
  for (std::size_t i = 0; i < ns.size(); ++i)
    if (indegree[i] == 0) ready.insert({ns[i].id, i});
  while (!ready.empty()) {
    const auto [id, i] = *ready.begin();
    ready.erase(ready.begin());
    sys.order_.push_back(i);
    for (auto s : successors[i])
      if (--indegree[s] == 0) ready.insert({ns[s].id, s});
  }
  if (sys.order_.size() != ns.size()) {
    std::string stuck;
    for (std::size_t i = 0; i < ns.size(); ++i)
      if (indegree[i] > 0) stuck += (stuck.empty() ? "" : ", ") + ns[i].id;
    throw Error(ErrorCode::kCycleDetected, "processes on a cycle: " + stuck);
  }

  std::set<std::string> ids(flow_ids);
  for (std::size_t n = 0; n < ns.size(); ++n) {
    for (std::size_t k = 0; k < ns[n].inputs.size(); ++k)
      if (!sys.sources_.contains({n, k}))
        sys.boundary_.push_back({ns[n].inputs[k].name, BoundaryInput::Kind::kFlow, n, k});
    for (std::size_t k = 0; k < ns[n].supports.size(); ++k)
      sys.boundary_.push_back({ns[n].supports[k].indicator, BoundaryInput::Kind::kIndicator, n, k});
  }
  for (const auto& b : sys.boundary_)
    if (!ids.insert(b.id).second)
      throw Error(ErrorCode::kInvalidArgument, "boundary input '" + b.id + "' clashes with another name");

  for (auto n : sys.order_)
    for (std::size_t o = 0; o < ns[n].outputs.size(); ++o) {
      sys.flows_.push_back({ns[n].outputs[o].port.name, n, o});
      if (!feeding.contains(n * 4096 + o)) sys.boundary_outputs_.push_back(ns[n].outputs[o].port.name);
    }
  return sys;
}

double FlowValues::at(std::string_view id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return values[i];
  throw Error(ErrorCode::kUnknownTarget, "no flow '" + std::string(id) + "'");
}

std::vector<double> node_inputs(const SystemModel& system, std::size_t node,
                                std::span<const double> boundary, const FlowValues& upstream) {
  const auto& n = system.nodes().at(node);
  const auto& bnd = system.boundary_inputs();
  auto boundary_value = [&](BoundaryInput::Kind kind, std::size_t index) {
    for (std::size_t b = 0; b < bnd.size(); ++b)
      if (bnd[b].node == node && bnd[b].kind == kind && bnd[b].index == index) return boundary[b];
    throw Error(ErrorCode::kInvalidArgument, "unwired port on process '" + n.id + "'");
  };
  std::vector<double> x;
  x.reserve(n.inputs.size() + n.supports.size());
  for (std::size_t k = 0; k < n.inputs.size(); ++k) {
    if (auto src = system.source_of(node, k))
      x.push_back(upstream.at(system.nodes()[src->first].outputs[src->second].port.name));
    else
      x.push_back(boundary_value(BoundaryInput::Kind::kFlow, k));
  }
  for (std::size_t k = 0; k < n.supports.size(); ++k)
    x.push_back(boundary_value(BoundaryInput::Kind::kIndicator, k));
  return x;
}

FlowValues system_forward(const SystemModel& system, std::span<const double> boundary) {
  if (boundary.size() != system.boundary_inputs().size())
    throw Error(ErrorCode::kArityMismatch, "system expects " +
                                               std::to_string(system.boundary_inputs().size()) +
                                               " boundary values, got " + std::to_string(boundary.size()));
  FlowValues out;
  out.ids.reserve(system.flows().size());
  out.values.reserve(system.flows().size());
  for (auto n : system.order()) {
    const auto& node = system.nodes()[n];
    const auto x = node_inputs(system, n, boundary, out);
    for (const auto& o : node.outputs) {
      try {
        out.values.push_back(evaluate(o.model, x));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kAllRulesSilent) throw;
        throw Error(e.code(), "process '" + node.id + "', flow '" + o.port.name + "': " + e.message());
      }
      out.ids.push_back(o.port.name);
    }
  }
  return out;
}

FlowValues system_forward(const SystemModel& system, const std::map<std::string, double>& boundary) {
  std::vector<double> values;
  std::string missing;
  for (const auto& b : system.boundary_inputs()) {
    auto it = boundary.find(b.id);
    if (it == boundary.end())
      missing += (missing.empty() ? "" : ", ") + b.id;
    else
      values.push_back(it->second);
  }
  for (const auto& [id, v] : boundary)
    if (!system.boundary_index(id))
      throw Error(ErrorCode::kUnknownTarget, "'" + id + "' is not a boundary input");
  if (!missing.empty())
    throw Error(ErrorCode::kInvalidArgument, "missing boundary inputs: " + missing);
  return system_forward(system, values);
}

}  // namespace perfloss
