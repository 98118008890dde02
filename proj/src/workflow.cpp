#include "perfloss/workflow.hpp"

namespace perfloss {

SamplingPlan node_plan(const CompiledModel& model, std::size_t node, std::optional<std::uint64_t> seed) {
  SamplingPlan plan = model.training.plan;
  plan.axes = model.axes.at(node);
  if (seed) plan.seed = *seed;
  return plan;
}

std::vector<NodeDataset> synthesize_all(const CompiledModel& model, std::optional<std::uint64_t> seed) {
  std::vector<NodeDataset> out;
  const auto& sys = model.system;
  for (const auto& f : sys.flows()) {
    auto plan = node_plan(model, f.node, seed);
    // distinct streams per flow when the design is random or noisy
    plan.seed += f.node * 1000 + f.output;
    out.push_back({f.node, f.output, f.id, synthesize(sys.nodes()[f.node], f.output, plan)});
  }
  return out;
}

std::vector<NodeTraining> train_all(CompiledModel& model, const std::vector<NodeDataset>& datasets,
                                    const TrainConfig& config) {
  for (const auto& d : datasets)
    check_dataset(model.system.nodes().at(d.node).outputs.at(d.output).model, d.data);
  std::vector<NodeTraining> out;
  for (const auto& d : datasets) {
    auto& port = model.system.node_mut(d.node).outputs[d.output];
    auto result = train(port.model, d.data, config);
    result.model.set_trained(true);
    port.model = std::move(result.model);
    const double final_rmse = result.report.rmse.empty() ? rmse(port.model, d.data) : result.report.rmse.back();
    out.push_back({d.flow, std::move(result.report), final_rmse});
  }
  return out;
}

}  // namespace perfloss
