#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "perfloss/fuzzy.hpp"

namespace perfloss {

/// (input index, term index) reference inside a rule clause.
struct Literal {
  std::size_t input = 0;
  std::size_t term = 0;

  auto operator<=>(const Literal&) const = default;
};

/// Conjunction of literals, at most one per input.
using Clause = std::vector<Literal>;

/// Disjunction of conjunctive clauses.
struct RuleAntecedent {
  std::vector<Clause> clauses;

  bool operator==(const RuleAntecedent&) const = default;
};

/// Takagi-Sugeno rule: f = sum_k coefficients[k] * x_k + bias.
struct FuzzyRule {
  RuleAntecedent antecedent;
  std::string output_term;
  std::vector<double> coefficients;
  double bias = 0.0;

  bool operator==(const FuzzyRule&) const = default;
};

struct ModelInput {
  std::string name;
  FuzzyPartition partition;

  bool operator==(const ModelInput&) const = default;
};

struct ModelOutput {
  std::string name;
  std::string unit;
  std::vector<std::string> terms;

  bool operator==(const ModelOutput&) const = default;
};

/// Five-layer adaptive network. One rule per output term.
class AnfisModel {
 public:
  AnfisModel(std::vector<ModelInput> inputs, ModelOutput output, std::vector<FuzzyRule> rules);

  const std::vector<ModelInput>& inputs() const noexcept { return inputs_; }
  const ModelOutput& output() const noexcept { return output_; }
  const std::vector<FuzzyRule>& rules() const noexcept { return rules_; }
  std::size_t input_count() const noexcept { return inputs_.size(); }
  std::size_t rule_count() const noexcept { return rules_.size(); }

  bool trained() const noexcept { return trained_; }
  void set_trained(bool trained) noexcept { trained_ = trained; }

  /// Consequent update; sizes must match.
  void set_consequent(std::size_t rule, std::span<const double> coefficients, double bias);
  /// Premise update; label set, domain and term order must be unchanged.
  void set_partition(std::size_t input, FuzzyPartition partition);

  bool operator==(const AnfisModel&) const = default;

 private:
  std::vector<ModelInput> inputs_;
  ModelOutput output_;
  std::vector<FuzzyRule> rules_;
  bool trained_ = false;
};

/// Layer-1 memberships, one vector of degrees per input.
using Memberships = std::vector<std::vector<double>>;

double clause_strength(const Clause& clause, const Memberships& degrees);
double rule_strength(const RuleAntecedent& antecedent, const Memberships& degrees);
/// Probabilistic sum a + b - ab.
double probabilistic_sum(double a, double b) noexcept;
/// Layer 3. Throws AllRulesSilent when the strengths sum to zero.
std::vector<double> normalize_strengths(std::span<const double> strengths);

struct ForwardTrace {
  std::vector<double> inputs;           // after clamping to each domain
  std::vector<std::size_t> clamped;     // indices of inputs that were clamped
  Memberships memberships;              // S1
  std::vector<double> strengths;        // S2
  std::vector<double> normalized;       // S3
  std::vector<double> consequents;      // f_j
  std::vector<double> weighted;         // S4
  double output = 0.0;                  // S5
};

ForwardTrace forward(const AnfisModel& model, std::span<const double> inputs);
double evaluate(const AnfisModel& model, std::span<const double> inputs);

/// Rows of (inputs, target). Column names are the model input names followed
/// by the target name.
struct TrainingDataset {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;

  std::size_t size() const noexcept { return targets.size(); }
  std::size_t arity() const noexcept { return columns.empty() ? 0 : columns.size() - 1; }
  void add(std::vector<double> x, double y);
  bool operator==(const TrainingDataset&) const = default;
};

double rmse(const AnfisModel& model, const TrainingDataset& data);

struct LseResult {
  AnfisModel model;
  double rmse = 0.0;
  std::size_t rank = 0;
  std::vector<std::size_t> silent_rules;  // rules that never fire: DegenerateDesign
};

/// Least-squares fit of the consequent parameters with premises fixed.
/// Rank-deficient designs get the minimum-norm solution.
LseResult lse_fit_consequents(const AnfisModel& model, const TrainingDataset& data,
                              bool constant_only);

/// Free premise knots of every input, concatenated in input order. Inputs
/// whose partition is not a shared-knot chain contribute nothing.
std::vector<double> premise_parameters(const AnfisModel& model);
AnfisModel with_premise_parameters(const AnfisModel& model, std::span<const double> values);

/// Gradient of the mean squared error with respect to premise_parameters().
std::vector<double> premise_gradient(const AnfisModel& model, const TrainingDataset& data);

struct StepResult {
  AnfisModel model;
  double rmse_before = 0.0;
  double rmse_after = 0.0;  // consequents held fixed
};

/// One batch descent step on the premise knots. `rate` is the step length as
/// a fraction of each input's domain width, taken along the normalised
/// gradient direction.
StepResult gd_premise_step(const AnfisModel& model, const TrainingDataset& data, double rate);

enum class TrainingMode { kLseOnly, kHybrid };
enum class StopReason { kEpochBudget, kConverged };

struct TrainConfig {
  TrainingMode mode = TrainingMode::kLseOnly;
  int epochs = 500;
  double rmse_threshold = 1e-9;
  double learning_rate = 0.01;
  bool constant_only = true;
};

struct TrainingReport {
  int epochs_run = 0;
  std::vector<double> rmse;  // post-LSE RMSE per epoch
  StopReason stop_reason = StopReason::kEpochBudget;
  double threshold = 0.0;
  std::size_t rejected_steps = 0;
  std::vector<std::size_t> silent_rules;
};

struct TrainResult {
  AnfisModel model;
  TrainingReport report;
};

TrainResult train(const AnfisModel& model, const TrainingDataset& data, const TrainConfig& config);

std::string_view to_string(TrainingMode mode);
std::string_view to_string(StopReason reason);

}  // namespace perfloss
