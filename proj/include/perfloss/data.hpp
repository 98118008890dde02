#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "perfloss/anfis.hpp"
#include "perfloss/compose.hpp"

namespace perfloss {

enum class SamplingDesign {
  kFactorial,  // Cartesian grid over every axis
  kSweep,      // one axis at a time through the nominal point
  kRandom,     // seeded uniform draws
};

std::string_view to_string(SamplingDesign design);
std::optional<SamplingDesign> parse_sampling_design(std::string_view text);

/// Sampling of one model input. An empty range means the partition domain;
/// explicit levels replace the evenly spaced grid.
struct AxisPlan {
  std::size_t count = 11;
  std::optional<double> lo;
  std::optional<double> hi;
  std::vector<double> levels;
};

struct SamplingPlan {
  SamplingDesign design = SamplingDesign::kFactorial;
  std::vector<AxisPlan> axes;  // one per model input; missing axes use `grid`
  std::size_t grid = 11;
  std::size_t samples = 500;   // random design only
  std::uint64_t seed = 1;
  double noise = 0.0;          // standard deviation, output units
};

/// The values an axis takes, in ascending order.
std::vector<double> axis_levels(const AxisPlan& axis, const FuzzyPartition& partition);

/// Reference performance of `output` on `node` for model inputs ordered as
/// the node's input ports then its supports. Capabilities follow each
/// support's term kinds and degraded capability.
double oracle_target(const ProcessNode& node, std::span<const double> inputs);

/// Nominal operating point of a node: flows at their nominal value and
/// indicators at their reset value.
std::vector<double> nominal_point(const ProcessNode& node);

TrainingDataset synthesize(const ProcessNode& node, std::size_t output, const SamplingPlan& plan);

void save_dataset(std::ostream& out, const TrainingDataset& data);
void save_dataset(const std::string& path, const TrainingDataset& data);
TrainingDataset load_dataset(std::istream& in, const std::string& source = "<stream>");
TrainingDataset load_dataset(const std::string& path);

/// Throws ArityMismatch unless the dataset columns fit the model inputs.
void check_dataset(const AnfisModel& model, const TrainingDataset& data);

}  // namespace perfloss
