#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "perfloss/anfis.hpp"

namespace perfloss {

/// Quantitative HAZOP guide words plus OK for "no deviation".
enum class Deviation { kOk, kNo, kLess, kMore };
enum class FlowState { kNominal, kDegraded, kFailed };
enum class SupportKind { kHealthy, kDegraded, kFailed };
enum class RelationType { kR1, kR2, kR3, kR4, kR5, kR6, kR7 };

std::string_view to_string(Deviation d);
std::string_view to_string(FlowState s);
std::string_view to_string(SupportKind k);
std::string_view to_string(RelationType t);
std::optional<Deviation> parse_deviation(std::string_view text);
std::optional<SupportKind> parse_support_kind(std::string_view text);

FlowState flow_state(Deviation d) noexcept;
/// 0 nominal, 1 partial (LESS/MORE), 2 complete loss (NO).
int severity(Deviation d) noexcept;

struct SupportState {
  SupportKind kind = SupportKind::kHealthy;
  std::string mode;  // term label on the support's indicator partition

  bool operator==(const SupportState&) const = default;
};

/// Table-1 typology. Throws UnmappedCombination outside it.
RelationType classify_relation(FlowState input, SupportKind support, FlowState output);

struct Cause {
  enum class Kind { kFlowDeviation, kSupportMode };

  Kind kind = Kind::kFlowDeviation;
  std::string id;            // flow port or support id
  Deviation deviation = Deviation::kNo;  // for flow causes
  std::string mode;          // for support causes

  static Cause flow(std::string id, Deviation d) { return {Kind::kFlowDeviation, std::move(id), d, {}}; }
  static Cause support(std::string id, std::string mode) {
    return {Kind::kSupportMode, std::move(id), Deviation::kNo, std::move(mode)};
  }
};

struct HazopEntry {
  std::string flow;       // the output flow the deviation is observed on
  std::string attribute;  // e.g. "angular velocity"
  Deviation deviation = Deviation::kNo;
  std::vector<Cause> causes;
};

/// Vocabulary of one process output: its single input flow, its single
/// support and the output flow, each with their term sets.
struct RelationContext {
  std::string input_flow;
  std::vector<Deviation> input_terms;
  std::string support;
  std::vector<SupportState> support_states;
  std::string output_flow;
  std::vector<Deviation> output_terms;
};

/// (any of inputs) AND (any of supports) -> output
struct CausalRelation {
  std::vector<Deviation> inputs;
  std::vector<SupportState> supports;
  Deviation output = Deviation::kOk;
  RelationType type = RelationType::kR1;

  bool operator==(const CausalRelation&) const = default;
};

/// Instantiates the generic relations from HAZOP rows, adding the nominal
/// relation and the failure-propagation closures. Sorted by type, then by
/// input and support order.
std::vector<CausalRelation> instantiate_relations(std::span<const HazopEntry> entries,
                                                  const RelationContext& context);

/// Literal on variable 0 (input flow) or 1 (support), by term label.
struct LabelLiteral {
  std::size_t variable = 0;
  std::string label;

  auto operator<=>(const LabelLiteral&) const = default;
};
using LabelClause = std::vector<LabelLiteral>;

struct RuleSpec {
  Deviation output = Deviation::kOk;
  std::vector<LabelClause> clauses;
  std::vector<RelationType> sources;

  bool operator==(const RuleSpec&) const = default;
};

/// Groups relations by consequent and simplifies each group into one
/// disjunctive rule. Rules come out in OK, LESS, NO, MORE order.
std::vector<RuleSpec> merge_rules(std::span<const CausalRelation> relations,
                                  const RelationContext& context);

/// Converts merged specs into ANFIS rules over inputs (input flow, support),
/// with zero consequents.
std::vector<FuzzyRule> to_fuzzy_rules(std::span<const RuleSpec> specs,
                                      const FuzzyPartition& input_partition,
                                      const FuzzyPartition& support_partition);

std::string format_relation(const CausalRelation& relation, const RelationContext& context);
std::string format_rule(const RuleSpec& rule, const RelationContext& context);

struct RulebaseDiagnostics {
  std::vector<std::string> uncovered;       // term combinations no clause covers
  std::vector<std::string> missing_terms;   // output terms without a rule
  std::vector<std::string> unreachable;     // clauses absorbed by another clause
  bool complete() const noexcept { return uncovered.empty(); }
  bool ok() const noexcept { return uncovered.empty() && missing_terms.empty(); }
};

RulebaseDiagnostics validate_rulebase(std::span<const FuzzyRule> rules,
                                      std::span<const ModelInput> inputs,
                                      std::span<const std::string> output_terms);

}  // namespace perfloss
