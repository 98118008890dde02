#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "perfloss/anfis.hpp"
#include "perfloss/causal.hpp"
#include "perfloss/compose.hpp"
#include "perfloss/data.hpp"
#include "perfloss/error.hpp"

namespace perfloss {

/// One term line: either an explicit shape (tri, trap) or an anchor
/// (peak, plateau, atleast, atmost).
struct TermSpec {
  std::string label;
  std::string kind;
  std::vector<double> values;
  std::size_t line = 0;
};

struct SampleSpec {
  std::vector<double> levels;
  std::optional<std::size_t> count;
};

struct FlowDecl {
  std::string id;
  std::string attribute;
  std::string unit;
  double lo = 0.0;
  double hi = 0.0;
  double nominal = 100.0;
  std::vector<TermSpec> terms;
  SampleSpec sample;
  std::size_t line = 0;
};

struct SupportDecl {
  std::string id;
  std::string indicator;
  std::string unit;
  double lo = 0.0;
  double hi = 0.0;
  double reset = 0.0;
  double degraded_capability = 50.0;
  std::vector<TermSpec> terms;
  std::vector<SupportKind> kinds;  // parallel to terms, in listed order
  SampleSpec sample;
  std::size_t line = 0;
};

struct PortDecl {
  std::string name;
  std::string flow;
  std::size_t line = 0;
};

struct HazopRow {
  Deviation deviation = Deviation::kNo;
  std::vector<std::pair<std::string, std::string>> causes;  // (label, id)
  std::size_t line = 0;
};

struct HazopDecl {
  std::string output;
  std::vector<HazopRow> rows;
  std::size_t line = 0;
};

/// rule <output> <TERM> <- A(x) & B(y) | C(z)
struct RuleDecl {
  std::string output;
  std::string term;
  std::vector<std::vector<std::pair<std::string, std::string>>> clauses;  // (label, variable)
  std::size_t line = 0;
};

struct ProcessDecl {
  std::string id;
  std::vector<PortDecl> inputs;
  std::vector<std::pair<std::string, std::size_t>> supports;  // (id, line)
  std::vector<PortDecl> outputs;
  std::vector<HazopDecl> hazops;
  std::vector<RuleDecl> rules;
  std::size_t line = 0;
};

struct ConnectDecl {
  Edge edge;
  std::size_t line = 0;
};

struct PremiseDecl {
  std::string input;
  std::string label;
  std::string kind;
  std::vector<double> values;
  std::size_t line = 0;
};

struct ConsequentDecl {
  std::string term;
  double bias = 0.0;
  std::vector<double> coefficients;
  std::size_t line = 0;
};

/// Trained parameters of one output model.
struct ParamsDecl {
  std::string node;
  std::string output;
  std::vector<PremiseDecl> premises;
  std::vector<ConsequentDecl> consequents;
  std::size_t line = 0;
  std::size_t end_line = 0;
};

struct TrainingDecl {
  TrainConfig config;
  SamplingPlan plan;
  std::size_t line = 0;
};

struct ModelDocument {
  std::string source;
  std::string name;
  std::vector<FlowDecl> flows;
  std::vector<SupportDecl> supports;
  std::vector<ProcessDecl> processes;
  std::vector<ConnectDecl> connects;
  std::vector<ParamsDecl> params;
  TrainingDecl training;
  std::vector<std::string> lines;  // raw text, for rewriting
};

/// Syntax only. Throws ParseError naming the line.
ModelDocument parse_model(std::istream& in, const std::string& source = "<stream>");
ModelDocument parse_model_file(const std::string& path);

struct Diagnostic {
  std::size_t line = 0;
  ErrorCode code = ErrorCode::kValidation;
  std::string message;
  bool warning = false;  // reported, but does not make the model invalid
};

bool has_errors(const std::vector<Diagnostic>& diagnostics);

std::string format_diagnostic(const std::string& source, const Diagnostic& d);

/// Rules of one output model as compiled from its HAZOP table.
struct CompiledOutput {
  std::size_t node = 0;
  std::size_t output = 0;
  bool from_hazop = false;
  RelationContext context;
  std::vector<CausalRelation> relations;
  std::vector<RuleSpec> rules;
};

struct CompiledModel {
  std::string name;
  SystemModel system;
  std::vector<CompiledOutput> outputs;
  TrainingDecl training;
  /// Per node, per model input: sampling axis declared on the flow or support.
  std::vector<std::vector<AxisPlan>> axes;
};

/// Every structural check: partitions, rule bases, references, graph.
std::vector<Diagnostic> validate_model(const ModelDocument& doc);

/// Validates, then builds. Throws Validation with all diagnostics when the
/// document is not clean.
CompiledModel build_model(const ModelDocument& doc);

/// Per output flow: the instantiated relations and the merged rules.
std::string rule_report(const CompiledModel& model);

/// Source text with every params block replaced by the parameters of the
/// trained models in `system`.
void save_model(std::ostream& out, const ModelDocument& doc, const SystemModel& system);
void save_model_file(const std::string& path, const ModelDocument& doc, const SystemModel& system);

}  // namespace perfloss
