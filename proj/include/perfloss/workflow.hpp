#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "perfloss/model_file.hpp"

namespace perfloss {

/// Training data of one output model.
struct NodeDataset {
  std::size_t node = 0;
  std::size_t output = 0;
  std::string flow;
  TrainingDataset data;
};

/// The model's sampling plan with per-axis settings for one node.
SamplingPlan node_plan(const CompiledModel& model, std::size_t node,
                       std::optional<std::uint64_t> seed = std::nullopt);

/// One synthetic dataset per output flow, in evaluation order.
std::vector<NodeDataset> synthesize_all(const CompiledModel& model,
                                        std::optional<std::uint64_t> seed = std::nullopt);

struct NodeTraining {
  std::string flow;
  TrainingReport report;
  double rmse = 0.0;
};

/// Trains every output model that has a dataset and stores the result in
/// model.system. Datasets are checked against the model inputs first.
std::vector<NodeTraining> train_all(CompiledModel& model, const std::vector<NodeDataset>& datasets,
                                    const TrainConfig& config);

}  // namespace perfloss
