#include "perfloss/causal.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "perfloss/error.hpp"

namespace perfloss {

std::string_view to_string(Deviation d) {
  switch (d) {
    case Deviation::kOk: return "OK";
    case Deviation::kNo: return "NO";
    case Deviation::kLess: return "LESS";
    case Deviation::kMore: return "MORE";
  }
  return "?";
}

std::string_view to_string(FlowState s) {
  switch (s) {
    case FlowState::kNominal: return "nominal";
    case FlowState::kDegraded: return "degraded";
    case FlowState::kFailed: return "failed";
  }
  return "?";
}

std::string_view to_string(SupportKind k) {
  switch (k) {
    case SupportKind::kHealthy: return "healthy";
    case SupportKind::kDegraded: return "degraded";
    case SupportKind::kFailed: return "failed";
  }
  return "?";
}

std::string_view to_string(RelationType t) {
  static constexpr std::string_view names[] = {"R1", "R2", "R3", "R4", "R5", "R6", "R7"};
  return names[static_cast<int>(t)];
}

std::optional<Deviation> parse_deviation(std::string_view text) {
  if (text == "OK") return Deviation::kOk;
  if (text == "NO") return Deviation::kNo;
  if (text == "LESS") return Deviation::kLess;
  if (text == "MORE") return Deviation::kMore;
  return std::nullopt;
}

std::optional<SupportKind> parse_support_kind(std::string_view text) {
  if (text == "healthy") return SupportKind::kHealthy;
  if (text == "degraded") return SupportKind::kDegraded;
  if (text == "failed") return SupportKind::kFailed;
  return std::nullopt;
}

FlowState flow_state(Deviation d) noexcept {
  switch (d) {
    case Deviation::kOk: return FlowState::kNominal;
    case Deviation::kNo: return FlowState::kFailed;
    default: return FlowState::kDegraded;
  }
}

int severity(Deviation d) noexcept { return static_cast<int>(flow_state(d)); }

RelationType classify_relation(FlowState input, SupportKind support, FlowState output) {
  using F = FlowState;
  using S = SupportKind;
  if (input == F::kFailed && output == F::kFailed) return RelationType::kR6;
  if (support == S::kFailed && output == F::kFailed && input != F::kFailed) return RelationType::kR7;
  if (input == F::kNominal && support == S::kHealthy && output == F::kNominal) return RelationType::kR1;
  if (input == F::kDegraded && support == S::kHealthy && output == F::kDegraded) return RelationType::kR2;
  if (input == F::kNominal && support == S::kDegraded && output == F::kDegraded) return RelationType::kR3;
  if (input == F::kDegraded && support == S::kDegraded && output == F::kDegraded) return RelationType::kR4;
  if (input == F::kDegraded && support == S::kDegraded && output == F::kFailed) return RelationType::kR5;
  throw Error(ErrorCode::kUnmappedCombination,
              std::string("(input ") + std::string(to_string(input)) + ", support " +
                  std::string(to_string(support)) + ", output " + std::string(to_string(output)) +
                  ") is not a causal relation type");
}

namespace {

bool contains(const std::vector<Deviation>& v, Deviation d) {
  return std::find(v.begin(), v.end(), d) != v.end();
}

// Canonical display order of input deviations and rules.
int order_of(Deviation d) {
  switch (d) {
    case Deviation::kOk: return 0;
    case Deviation::kLess: return 1;
    case Deviation::kNo: return 2;
    case Deviation::kMore: return 3;
  }
  return 4;
}

std::vector<SupportState> ordered_states(const RelationContext& ctx) {
  std::vector<SupportState> out;
  for (auto kind : {SupportKind::kHealthy, SupportKind::kDegraded, SupportKind::kFailed})
    for (const auto& s : ctx.support_states)
      if (s.kind == kind) out.push_back(s);
  return out;
}

std::size_t state_rank(const RelationContext& ctx, const std::string& mode) {
  const auto states = ordered_states(ctx);
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i].mode == mode) return i;
  return states.size();
}

const SupportState& find_state(const RelationContext& ctx, const Cause& cause) {
  if (cause.id != ctx.support)
    throw Error(ErrorCode::kUnknownSupport, "'" + cause.id + "' is not the support of '" +
                                                ctx.output_flow + "'");
  for (const auto& s : ctx.support_states)
    if (s.mode == cause.mode) {
      if (s.kind == SupportKind::kHealthy)
        throw Error(ErrorCode::kInvalidArgument,
                    "healthy state '" + s.mode + "' cannot be a deviation cause");
      return s;
    }
  throw Error(ErrorCode::kUnknownSupport,
              "support '" + ctx.support + "' has no mode '" + cause.mode + "'");
}

}  // namespace

std::vector<CausalRelation> instantiate_relations(std::span<const HazopEntry> entries,
                                                  const RelationContext& ctx) {
  std::vector<SupportState> healthy;
  for (const auto& s : ctx.support_states)
    if (s.kind == SupportKind::kHealthy) healthy.push_back(s);
  if (healthy.empty())
    throw Error(ErrorCode::kInvalidArgument, "support '" + ctx.support + "' has no healthy state");
  if (!contains(ctx.input_terms, Deviation::kOk) || !contains(ctx.output_terms, Deviation::kOk))
    throw Error(ErrorCode::kInvalidArgument,
                "flows '" + ctx.input_flow + "' and '" + ctx.output_flow + "' need an OK term");

  std::vector<CausalRelation> out;
  auto add = [&out](CausalRelation rel) {
    if (std::find(out.begin(), out.end(), rel) == out.end()) out.push_back(std::move(rel));
  };

  add({{Deviation::kOk}, healthy, Deviation::kOk, RelationType::kR1});

  bool no_input_cause = false;
  std::vector<SupportState> failed_modes;
  for (const auto& entry : entries) {
    if (entry.flow != ctx.output_flow)
      throw Error(ErrorCode::kUnknownFlow,
                  "HAZOP row on '" + entry.flow + "' does not belong to '" + ctx.output_flow + "'");
    if (!contains(ctx.output_terms, entry.deviation))
      throw Error(ErrorCode::kMissingOutputTerm,
                  "'" + ctx.output_flow + "' has no term " + std::string(to_string(entry.deviation)));
    if (entry.causes.empty())
      throw Error(ErrorCode::kInvalidArgument, "HAZOP row " + std::string(to_string(entry.deviation)) +
                                                   " on '" + entry.flow + "' lists no cause");
    const FlowState out_state = flow_state(entry.deviation);

    std::vector<Deviation> partial_inputs;
    std::vector<SupportState> degraded;
    for (const auto& cause : entry.causes) {
      if (cause.kind == Cause::Kind::kFlowDeviation) {
        if (cause.id != ctx.input_flow)
          throw Error(ErrorCode::kUnknownFlow,
                      "'" + cause.id + "' is not an input flow of '" + ctx.output_flow + "'");
        if (cause.id == ctx.output_flow)
          throw Error(ErrorCode::kInvalidArgument, "a flow cannot cause its own deviation");
        if (!contains(ctx.input_terms, cause.deviation))
          throw Error(ErrorCode::kUnknownFlow, "'" + cause.id + "' has no term " +
                                                   std::string(to_string(cause.deviation)));
        const auto type = classify_relation(flow_state(cause.deviation), SupportKind::kHealthy, out_state);
        if (type == RelationType::kR6) {
          no_input_cause = true;
          continue;
        }
        add({{cause.deviation}, healthy, entry.deviation, type});
        partial_inputs.push_back(cause.deviation);
      } else {
        const auto& state = find_state(ctx, cause);
        const auto type = classify_relation(FlowState::kNominal, state.kind, out_state);
        if (type == RelationType::kR7) {
          if (std::find(failed_modes.begin(), failed_modes.end(), state) == failed_modes.end())
            failed_modes.push_back(state);
          continue;
        }
        add({{Deviation::kOk}, {state}, entry.deviation, type});
        degraded.push_back(state);
      }
    }
    // Joint input deviation and support degradation in one row.
    for (auto d : partial_inputs)
      for (const auto& s : degraded)
        add({{d}, {s}, entry.deviation, classify_relation(flow_state(d), s.kind, out_state)});
  }

  if (no_input_cause) {
    if (!contains(ctx.output_terms, Deviation::kNo))
      throw Error(ErrorCode::kMissingOutputTerm, "'" + ctx.output_flow + "' has no NO term");
    add({{Deviation::kNo}, ordered_states(ctx), Deviation::kNo, RelationType::kR6});
  }
  for (const auto& f : failed_modes) {
    std::vector<Deviation> inputs{Deviation::kOk};
    for (auto d : {Deviation::kLess, Deviation::kMore})
      if (contains(ctx.input_terms, d)) inputs.push_back(d);
    add({inputs, {f}, Deviation::kNo, RelationType::kR7});
  }

  std::stable_sort(out.begin(), out.end(), [&ctx](const CausalRelation& a, const CausalRelation& b) {
    if (a.type != b.type) return a.type < b.type;
    if (a.inputs.front() != b.inputs.front()) return order_of(a.inputs.front()) < order_of(b.inputs.front());
    return state_rank(ctx, a.supports.front().mode) < state_rank(ctx, b.supports.front().mode);
  });
  return out;
}

std::vector<RuleSpec> merge_rules(std::span<const CausalRelation> relations,
                                  const RelationContext& ctx) {
  using Cell = std::pair<Deviation, std::string>;
  std::map<Cell, Deviation> claim;
  std::map<Deviation, std::vector<Cell>> groups;
  std::map<Deviation, std::set<RelationType>> sources;

  auto cell_text = [&ctx](const Cell& c) {
    return std::string(to_string(c.first)) + "(" + ctx.input_flow + ") & " + c.second + "(" +
           ctx.support + ")";
  };

  for (const auto& rel : relations) {
    if (!contains(ctx.output_terms, rel.output))
      throw Error(ErrorCode::kMissingOutputTerm, "'" + ctx.output_flow + "' has no term " +
                                                     std::string(to_string(rel.output)));
    for (auto d : rel.inputs)
      for (const auto& s : rel.supports) {
        Cell cell{d, s.mode};
        auto [it, inserted] = claim.emplace(cell, rel.output);
        if (!inserted && it->second != rel.output)
          throw Error(ErrorCode::kInconsistentRelations,
                      cell_text(cell) + " leads to both " + std::string(to_string(it->second)) +
                          " and " + std::string(to_string(rel.output)) + "(" + ctx.output_flow + ")");
        if (inserted) groups[rel.output].push_back(cell);
      }
    sources[rel.output].insert(rel.type);
  }

  for (auto term : ctx.output_terms)
    if (!groups.contains(term))
      throw Error(ErrorCode::kMissingOutputTerm,
                  "no causal relation concludes " + std::string(to_string(term)) + "(" +
                      ctx.output_flow + ")");

  const auto states = ordered_states(ctx);
  std::vector<Deviation> input_order = ctx.input_terms;
  std::sort(input_order.begin(), input_order.end(),
            [](Deviation a, Deviation b) { return order_of(a) < order_of(b); });

  // A literal can be dropped when at least two of its sibling cells already
  // conclude this output and every remaining sibling is either unclaimed or
  // concludes something strictly more severe.
  auto droppable = [&](Deviation out, const std::vector<Cell>& siblings) {
    int inside = 0;
    for (const auto& c : siblings) {
      auto it = claim.find(c);
      if (it == claim.end()) continue;
      if (it->second == out)
        ++inside;
      else if (severity(it->second) <= severity(out))
        return false;
    }
    return inside >= 2;
  };

  std::vector<RuleSpec> rules;
  std::vector<Deviation> rule_order{Deviation::kOk, Deviation::kLess, Deviation::kNo, Deviation::kMore};
  for (auto out : rule_order) {
    auto g = groups.find(out);
    if (g == groups.end()) continue;
    std::set<LabelClause> clauses;
    for (const auto& [dev, mode] : g->second) {
      std::vector<Cell> along_support, along_input;
      for (const auto& s : states) along_support.push_back({dev, s.mode});
      for (auto d : input_order) along_input.push_back({d, mode});
      const bool drop_support = droppable(out, along_support);
      const bool drop_input = droppable(out, along_input);
      if (drop_support) clauses.insert({{0, std::string(to_string(dev))}});
      if (drop_input) clauses.insert({{1, mode}});
      if (!drop_support && !drop_input)
        clauses.insert({{0, std::string(to_string(dev))}, {1, mode}});
    }
    // Absorption: drop any clause that contains another clause.
    std::vector<LabelClause> kept;
    for (const auto& c : clauses) {
      bool absorbed = false;
      for (const auto& other : clauses)
        if (other != c && std::includes(c.begin(), c.end(), other.begin(), other.end())) absorbed = true;
      if (!absorbed) kept.push_back(c);
    }
    auto rank = [&](const LabelLiteral& lit) -> std::size_t {
      if (lit.variable == 0) return order_of(*parse_deviation(lit.label));
      return state_rank(ctx, lit.label);
    };
    std::sort(kept.begin(), kept.end(), [&](const LabelClause& a, const LabelClause& b) {
      if (a.size() != b.size()) return a.size() < b.size();
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].variable != b[i].variable) return a[i].variable < b[i].variable;
        if (rank(a[i]) != rank(b[i])) return rank(a[i]) < rank(b[i]);
      }
      return false;
    });
    RuleSpec spec{out, std::move(kept), {}};
    spec.sources.assign(sources[out].begin(), sources[out].end());
    rules.push_back(std::move(spec));
  }
  return rules;
}

std::vector<FuzzyRule> to_fuzzy_rules(std::span<const RuleSpec> specs,
                                      const FuzzyPartition& input_partition,
                                      const FuzzyPartition& support_partition) {
  std::vector<FuzzyRule> out;
  for (const auto& spec : specs) {
    FuzzyRule rule;
    rule.output_term = std::string(to_string(spec.output));
    for (const auto& lc : spec.clauses) {
      Clause clause;
      for (const auto& lit : lc) {
        const auto& part = lit.variable == 0 ? input_partition : support_partition;
        auto idx = part.index_of(lit.label);
        if (!idx)
          throw Error(ErrorCode::kInvalidArgument,
                      "partition '" + part.variable() + "' has no term '" + lit.label + "'");
        clause.push_back({lit.variable, *idx});
      }
      rule.antecedent.clauses.push_back(std::move(clause));
    }
    out.push_back(std::move(rule));
  }
  return out;
}

namespace {

std::string join_alternatives(const std::vector<std::string>& items) {
  if (items.size() == 1) return items.front();
  std::string s = "(";
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? " | " : "") + items[i];
  return s + ")";
}

std::string tags(const std::vector<RelationType>& types) {
  std::string s = "[";
  for (std::size_t i = 0; i < types.size(); ++i) s += (i ? ", " : "") + std::string(to_string(types[i]));
  return s + "]";
}

}  // namespace

std::string format_relation(const CausalRelation& rel, const RelationContext& ctx) {
  std::vector<std::string> ins, sups;
  for (auto d : rel.inputs) ins.push_back(std::string(to_string(d)) + "(" + ctx.input_flow + ")");
  for (const auto& s : rel.supports) sups.push_back(s.mode + "(" + ctx.support + ")");
  return join_alternatives(ins) + " & " + join_alternatives(sups) + " -> " +
         std::string(to_string(rel.output)) + "(" + ctx.output_flow + ")  [" +
         std::string(to_string(rel.type)) + "]";
}

std::string format_rule(const RuleSpec& rule, const RelationContext& ctx) {
  std::string s;
  for (std::size_t i = 0; i < rule.clauses.size(); ++i) {
    if (i) s += " | ";
    const auto& clause = rule.clauses[i];
    for (std::size_t j = 0; j < clause.size(); ++j) {
      if (j) s += " & ";
      s += clause[j].label + "(" + (clause[j].variable == 0 ? ctx.input_flow : ctx.support) + ")";
    }
  }
  return s + " -> " + std::string(to_string(rule.output)) + "(" + ctx.output_flow + ")  " +
         tags(rule.sources);
}

RulebaseDiagnostics validate_rulebase(std::span<const FuzzyRule> rules,
                                      std::span<const ModelInput> inputs,
                                      std::span<const std::string> output_terms) {
  RulebaseDiagnostics d;
  for (const auto& term : output_terms) {
    const bool has = std::any_of(rules.begin(), rules.end(),
                                 [&term](const FuzzyRule& r) { return r.output_term == term; });
    if (!has) d.missing_terms.push_back(term);
  }

  auto clause_text = [&inputs](const Clause& c) {
    std::string s;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (i) s += " & ";
      s += inputs[c[i].input].partition.term(c[i].term).label + "(" + inputs[c[i].input].name + ")";
    }
    return s;
  };

  for (const auto& rule : rules) {
    const auto& cl = rule.antecedent.clauses;
    for (std::size_t a = 0; a < cl.size(); ++a)
      for (std::size_t b = 0; b < cl.size(); ++b) {
        if (a == b || cl[b].size() >= cl[a].size()) continue;
        auto sa = cl[a], sb = cl[b];
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        if (std::includes(sa.begin(), sa.end(), sb.begin(), sb.end())) {
          d.unreachable.push_back(rule.output_term + ": '" + clause_text(cl[a]) +
                                  "' is absorbed by '" + clause_text(cl[b]) + "'");
          break;
        }
      }
  }

  std::size_t combos = 1;
  for (const auto& in : inputs) combos *= in.partition.size();
  std::vector<std::size_t> idx(inputs.size(), 0);
  for (std::size_t n = 0; n < combos; ++n) {
    bool covered = false;
    for (const auto& rule : rules) {
      for (const auto& clause : rule.antecedent.clauses) {
        if (std::all_of(clause.begin(), clause.end(),
                        [&idx](const Literal& l) { return idx[l.input] == l.term; })) {
          covered = true;
          break;
        }
      }
      if (covered) break;
    }
    if (!covered) {
      std::string s;
      for (std::size_t k = 0; k < inputs.size(); ++k)
        s += (k ? ", " : "") + inputs[k].name + "=" + inputs[k].partition.term(idx[k]).label;
      d.uncovered.push_back(s);
    }
    for (std::size_t k = inputs.size(); k-- > 0;) {
      if (++idx[k] < inputs[k].partition.size()) break;
      idx[k] = 0;
    }
  }
  return d;
}

}  // namespace perfloss
