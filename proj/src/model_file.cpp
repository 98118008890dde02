#include "perfloss/model_file.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "text.hpp"

namespace perfloss {

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::kParseError, source + ":" + std::to_string(line) + ": " + msg);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::size_t arity_of(std::string_view kind) {
  if (kind == "tri") return 3;
  if (kind == "trap") return 4;
  if (kind == "plateau") return 2;
  if (kind == "peak" || kind == "atleast" || kind == "atmost") return 1;
  return 0;
}

bool is_anchor(std::string_view kind) { return kind != "tri" && kind != "trap"; }

// LABEL(id)
std::optional<std::pair<std::string, std::string>> parse_literal(std::string_view text) {
  text = trim(text);
  const auto open = text.find('(');
  if (open == std::string_view::npos || open == 0 || text.size() < open + 3 || text.back() != ')')
    return std::nullopt;
  auto label = trim(text.substr(0, open));
  auto id = trim(text.substr(open + 1, text.size() - open - 2));
  if (label.empty() || id.empty()) return std::nullopt;
  return std::pair{std::string(label), std::string(id)};
}

// node.port
std::optional<std::pair<std::string, std::string>> parse_endpoint(std::string_view text) {
  const auto dot = text.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) return std::nullopt;
  return std::pair{std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
}

class Parser {
 public:
  Parser(std::istream& in, std::string source) : in_(in) { doc_.source = std::move(source); }

  ModelDocument run() {
    std::string raw;
    while (std::getline(in_, raw)) {
      if (!raw.empty() && raw.back() == '\r') raw.pop_back();
      doc_.lines.push_back(raw);
      ++line_;
      auto words = tokenize(strip_comment(raw));
      if (!words) error("unterminated quote");
      if (words->empty()) continue;
      w_ = std::move(*words);
      switch (ctx_) {
        case Ctx::kTop: top(); break;
        case Ctx::kFlow: flow_line(); break;
        case Ctx::kSupport: support_line(); break;
        case Ctx::kProcess: process_line(); break;
        case Ctx::kHazop: hazop_line(raw); break;
        case Ctx::kParams: params_line(); break;
      }
    }
    if (ctx_ != Ctx::kTop) fail(doc_.source, block_line_, "block is never closed with 'end'");
    return std::move(doc_);
  }

 private:
  enum class Ctx { kTop, kFlow, kSupport, kProcess, kHazop, kParams };

  [[noreturn]] void error(const std::string& msg) const { fail(doc_.source, line_, msg); }

  double number(std::size_t i) const {
    if (i >= w_.size()) error("'" + w_[0] + "' is missing a number");
    auto v = parse_number(w_[i]);
    if (!v) error("'" + w_[i] + "' is not a finite number");
    return *v;
  }

  std::size_t count(std::size_t i) const {
    const double v = number(i);
    if (v < 1 || v != std::floor(v) || v > 1e7) error("'" + w_[i] + "' is not a positive count");
    return static_cast<std::size_t>(v);
  }

  void need(std::size_t n, const std::string& usage) const {
    if (w_.size() != n) error("expected: " + usage);
  }

  void open(Ctx ctx) {
    ctx_ = ctx;
    block_line_ = line_;
  }

  void top() {
    const auto& k = w_[0];
    if (k == "model") {
      need(2, "model <name>");
      if (!doc_.name.empty()) error("model name given twice");
      doc_.name = w_[1];
    } else if (k == "flow") {
      if (w_.size() < 2) error("flow needs an id");
      FlowDecl f;
      f.id = w_[1];
      f.line = line_;
      bool unit = false, domain = false;
      for (std::size_t i = 2; i < w_.size();) {
        const auto& key = w_[i];
        if (key == "unit" && i + 1 < w_.size()) {
          f.unit = w_[i + 1];
          unit = true;
          i += 2;
        } else if (key == "domain") {
          f.lo = number(i + 1);
          f.hi = number(i + 2);
          domain = true;
          i += 3;
        } else if (key == "nominal") {
          f.nominal = number(i + 1);
          i += 2;
        } else if (key == "attribute" && i + 1 < w_.size()) {
          f.attribute = w_[i + 1];
          i += 2;
        } else {
          error("unknown flow key '" + key + "'");
        }
      }
      if (!unit || !domain) error("flow '" + f.id + "' needs 'unit' and 'domain'");
      doc_.flows.push_back(std::move(f));
      open(Ctx::kFlow);
    } else if (k == "support") {
      if (w_.size() < 2) error("support needs an id");
      SupportDecl s;
      s.id = w_[1];
      s.line = line_;
      bool indicator = false, unit = false, domain = false, reset = false;
      for (std::size_t i = 2; i < w_.size();) {
        const auto& key = w_[i];
        if (key == "indicator" && i + 1 < w_.size()) {
          s.indicator = w_[i + 1];
          indicator = true;
          i += 2;
        } else if (key == "unit" && i + 1 < w_.size()) {
          s.unit = w_[i + 1];
          unit = true;
          i += 2;
        } else if (key == "domain") {
          s.lo = number(i + 1);
          s.hi = number(i + 2);
          domain = true;
          i += 3;
        } else if (key == "reset") {
          s.reset = number(i + 1);
          reset = true;
          i += 2;
        } else if (key == "cdeg") {
          s.degraded_capability = number(i + 1);
          i += 2;
        } else {
          error("unknown support key '" + key + "'");
        }
      }
      if (!indicator || !unit || !domain || !reset)
        error("support '" + s.id + "' needs 'indicator', 'unit', 'domain' and 'reset'");
      doc_.supports.push_back(std::move(s));
      open(Ctx::kSupport);
    } else if (k == "process") {
      need(2, "process <id>");
      ProcessDecl p;
      p.id = w_[1];
      p.line = line_;
      doc_.processes.push_back(std::move(p));
      open(Ctx::kProcess);
    } else if (k == "connect") {
      need(4, "connect <node>.<port> -> <node>.<port>");
      auto from = parse_endpoint(w_[1]);
      auto to = parse_endpoint(w_[3]);
      if (w_[2] != "->" || !from || !to) error("expected: connect <node>.<port> -> <node>.<port>");
      doc_.connects.push_back({{from->first, from->second, to->first, to->second}, line_});
    } else if (k == "training") {
      training();
    } else if (k == "params") {
      need(2, "params <node>.<port>");
      auto at = parse_endpoint(w_[1]);
      if (!at) error("expected: params <node>.<port>");
      ParamsDecl p;
      p.node = at->first;
      p.output = at->second;
      p.line = line_;
      doc_.params.push_back(std::move(p));
      open(Ctx::kParams);
    } else {
      error("unknown keyword '" + k + "'");
    }
  }

  void training() {
    auto& t = doc_.training;
    t.line = line_;
    for (std::size_t i = 1; i < w_.size();) {
      const auto& key = w_[i];
      if (key == "linear") {
        t.config.constant_only = false;
        ++i;
        continue;
      }
      if (i + 1 >= w_.size()) error("training key '" + key + "' needs a value");
      const auto& val = w_[i + 1];
      if (key == "mode") {
        if (val == "lse_only") t.config.mode = TrainingMode::kLseOnly;
        else if (val == "hybrid") t.config.mode = TrainingMode::kHybrid;
        else error("mode must be lse_only or hybrid");
      } else if (key == "epochs") {
        const double v = number(i + 1);
        if (v < 0 || v != std::floor(v) || v > 1e7) error("epochs must be a non-negative integer");
        t.config.epochs = static_cast<int>(v);
      } else if (key == "threshold") {
        t.config.rmse_threshold = number(i + 1);
        if (t.config.rmse_threshold < 0) error("threshold must be >= 0");
      } else if (key == "rate") {
        t.config.learning_rate = number(i + 1);
        if (t.config.learning_rate < 0) error("rate must be >= 0");
      } else if (key == "seed") {
        const double v = number(i + 1);
        if (v < 0 || v != std::floor(v)) error("seed must be a non-negative integer");
        t.plan.seed = static_cast<std::uint64_t>(v);
      } else if (key == "grid") {
        t.plan.grid = count(i + 1);
      } else if (key == "samples") {
        t.plan.samples = count(i + 1);
      } else if (key == "design") {
        auto d = parse_sampling_design(val);
        if (!d) error("design must be factorial, sweep or random");
        t.plan.design = *d;
      } else if (key == "noise") {
        t.plan.noise = number(i + 1);
        if (t.plan.noise < 0) error("noise must be >= 0");
      } else {
        error("unknown training key '" + key + "'");
      }
      i += 2;
    }
  }

  bool sample(SampleSpec& s) {
    if (w_[0] != "sample") return false;
    if (w_.size() >= 3 && w_[1] == "levels") {
      for (std::size_t i = 2; i < w_.size(); ++i) s.levels.push_back(number(i));
    } else if (w_.size() == 3 && w_[1] == "count") {
      s.count = count(2);
    } else {
      error("expected: sample levels <v>... | sample count <n>");
    }
    return true;
  }

  TermSpec term(std::size_t label_at, std::size_t kind_at) {
    TermSpec t;
    t.label = w_[label_at];
    t.line = line_;
    if (kind_at >= w_.size()) error("term '" + t.label + "' needs a shape");
    t.kind = w_[kind_at];
    const auto n = arity_of(t.kind);
    if (n == 0) error("unknown term shape '" + t.kind + "' (tri, trap, peak, plateau, atleast, atmost)");
    if (w_.size() != kind_at + 1 + n)
      error("'" + t.kind + "' takes " + std::to_string(n) + " number(s)");
    for (std::size_t i = 0; i < n; ++i) t.values.push_back(number(kind_at + 1 + i));
    return t;
  }

  void flow_line() {
    auto& f = doc_.flows.back();
    if (w_[0] == "end") {
      need(1, "end");
      ctx_ = Ctx::kTop;
    } else if (!sample(f.sample)) {
      f.terms.push_back(term(0, 1));
    }
  }

  void support_line() {
    auto& s = doc_.supports.back();
    if (w_[0] == "end") {
      need(1, "end");
      ctx_ = Ctx::kTop;
    } else if (!sample(s.sample)) {
      if (w_.size() < 2) error("expected: <label> healthy|degraded|failed <shape> <numbers>");
      auto kind = parse_support_kind(w_[1]);
      if (!kind) error("'" + w_[1] + "' is not healthy, degraded or failed");
      s.terms.push_back(term(0, 2));
      s.kinds.push_back(*kind);
    }
  }

  PortDecl port(const std::string& what) {
    if (w_.size() == 2) return {w_[1], w_[1], line_};
    if (w_.size() == 4 && w_[2] == "flow") return {w_[1], w_[3], line_};
    error("expected: " + what + " <port> [flow <id>]");
  }

  void process_line() {
    auto& p = doc_.processes.back();
    const auto& k = w_[0];
    if (k == "end") {
      need(1, "end");
      ctx_ = Ctx::kTop;
    } else if (k == "input") {
      p.inputs.push_back(port("input"));
    } else if (k == "output") {
      p.outputs.push_back(port("output"));
    } else if (k == "support") {
      need(2, "support <id>");
      p.supports.emplace_back(w_[1], line_);
    } else if (k == "hazop") {
      need(2, "hazop <output port>");
      p.hazops.push_back({w_[1], {}, line_});
      ctx_ = Ctx::kHazop;
    } else if (k == "rule") {
      rule_line();
    } else {
      error("unknown process keyword '" + k + "'");
    }
  }

  std::string rest_after_arrow() const {
    const auto& raw = strip_comment(doc_.lines.back());
    const auto pos = raw.find("<-");
    if (pos == std::string::npos) error("expected '<-'");
    return raw.substr(pos + 2);
  }

  void rule_line() {
    if (w_.size() < 5 || w_[3] != "<-") error("expected: rule <output> <TERM> <- A(x) & B(y) | C(z)");
    RuleDecl r;
    r.output = w_[1];
    r.term = w_[2];
    r.line = line_;
    const std::string rest = rest_after_arrow();
    for (auto alt : split(rest, '|')) {
      std::vector<std::pair<std::string, std::string>> clause;
      for (auto lit : split(alt, '&')) {
        auto l = parse_literal(lit);
        if (!l) error("'" + std::string(lit) + "' is not of the form LABEL(variable)");
        clause.push_back(*l);
      }
      r.clauses.push_back(std::move(clause));
    }
    doc_.processes.back().rules.push_back(std::move(r));
  }

  void hazop_line(const std::string&) {
    if (w_[0] == "end") {
      need(1, "end");
      ctx_ = Ctx::kProcess;
      return;
    }
    if (w_.size() < 3 || w_[1] != "<-") error("expected: <DEVIATION> <- CAUSE(id) | CAUSE(id)");
    auto dev = parse_deviation(w_[0]);
    if (!dev || *dev == Deviation::kOk) error("'" + w_[0] + "' is not one of NO, LESS, MORE");
    HazopRow row;
    row.deviation = *dev;
    row.line = line_;
    const std::string rest = rest_after_arrow();
    for (auto alt : split(rest, '|')) {
      auto l = parse_literal(alt);
      if (!l) error("'" + std::string(alt) + "' is not of the form CAUSE(id)");
      row.causes.push_back(*l);
    }
    doc_.processes.back().hazops.back().rows.push_back(std::move(row));
  }

  void params_line() {
    auto& p = doc_.params.back();
    const auto& k = w_[0];
    if (k == "end") {
      need(1, "end");
      p.end_line = line_;
      ctx_ = Ctx::kTop;
    } else if (k == "premise") {
      if (w_.size() < 4) error("expected: premise <input> <label> tri|trap <numbers>");
      auto t = term(2, 3);
      if (is_anchor(t.kind)) error("premise shapes are tri or trap");
      p.premises.push_back({w_[1], t.label, t.kind, t.values, line_});
    } else if (k == "consequent") {
      if (w_.size() < 3) error("expected: consequent <TERM> <bias> [coefficients]");
      ConsequentDecl c;
      c.term = w_[1];
      c.bias = number(2);
      for (std::size_t i = 3; i < w_.size(); ++i) c.coefficients.push_back(number(i));
      c.line = line_;
      p.consequents.push_back(std::move(c));
    } else {
      error("unknown params keyword '" + k + "'");
    }
  }

  std::istream& in_;
  ModelDocument doc_;
  std::vector<std::string> w_;
  std::size_t line_ = 0;
  std::size_t block_line_ = 0;
  Ctx ctx_ = Ctx::kTop;
};

// ---------------------------------------------------------------------------

struct FlowInfo {
  const FlowDecl* decl;
  std::optional<FuzzyPartition> partition;
};

struct SupportInfo {
  const SupportDecl* decl;
  std::optional<SupportPort> port;
};

class Builder {
 public:
  explicit Builder(const ModelDocument& doc) : doc_(doc) {}

  std::vector<Diagnostic> diagnostics;
  CompiledModel result;

  void run() {
    if (doc_.name.empty()) note(0, ErrorCode::kValidation, "missing 'model <name>' line");
    flows();
    supports();
    std::vector<ProcessNode> nodes;
    std::vector<std::vector<AxisPlan>> axes;
    std::vector<CompiledOutput> compiled;
    std::set<std::string> ids;
    for (const auto& p : doc_.processes) {
      if (!ids.insert(p.id).second) {
        note(p.line, ErrorCode::kValidation, "process '" + p.id + "' declared twice");
        continue;
      }
      if (auto node = process(p, compiled, nodes.size())) {
        axes.push_back(node_axes(p));
        nodes.push_back(std::move(*node));
      } else {
        broken_ = true;
      }
    }
    params(nodes);
    if (broken_) return;
    if (!connects(nodes)) return;
    std::vector<Edge> edges;
    for (const auto& c : doc_.connects) edges.push_back(c.edge);
    try {
      result.system = compose(std::move(nodes), std::move(edges));
    } catch (const Error& e) {
      note(doc_.connects.empty() ? 0 : doc_.connects.back().line, e.code(), e.message());
      return;
    }
    result.name = doc_.name;
    result.outputs = std::move(compiled);
    result.training = doc_.training;
    result.axes = std::move(axes);
  }

 private:
  void note(std::size_t line, ErrorCode code, std::string msg, bool warning = false) {
    diagnostics.push_back({line, code, std::move(msg), warning});
  }

  std::optional<FuzzyPartition> partition(const std::string& variable, const std::string& unit,
                                          double lo, double hi, const std::vector<TermSpec>& terms,
                                          std::size_t line) {
    if (terms.empty()) {
      note(line, ErrorCode::kValidation, "partition '" + variable + "' has no terms");
      return std::nullopt;
    }
    const bool anchors = is_anchor(terms.front().kind);
    for (const auto& t : terms)
      if (is_anchor(t.kind) != anchors) {
        note(t.line, ErrorCode::kValidation,
             "partition '" + variable + "' mixes anchors with explicit shapes");
        return std::nullopt;
      }
    try {
      std::optional<FuzzyPartition> p;
      if (anchors) {
        std::vector<Anchor> a;
        for (const auto& t : terms) {
          if (t.kind == "peak") a.push_back(Anchor::peak(t.label, t.values[0]));
          else if (t.kind == "plateau") a.push_back(Anchor::plateau(t.label, t.values[0], t.values[1]));
          else if (t.kind == "atleast") a.push_back(Anchor::at_least(t.label, t.values[0]));
          else a.push_back(Anchor::at_most(t.label, t.values[0]));
        }
        p = build_partition_from_anchors(variable, unit, lo, hi, a);
      } else {
        std::vector<Term> ts;
        for (const auto& t : terms) {
          const auto& v = t.values;
          ts.push_back({t.label, t.kind == "tri" ? MembershipFunction::triangular(v[0], v[1], v[2])
                                                 : MembershipFunction::trapezoidal(v[0], v[1], v[2], v[3])});
        }
        p = FuzzyPartition(variable, unit, lo, hi, std::move(ts));
      }
      const auto d = validate_strict_partition(*p);
      if (!d.passed) {
        note(line, ErrorCode::kValidation,
             "partition '" + variable + "' is not strict: memberships sum off by " +
                 format_short(d.max_deviation) + " at " + format_short(d.worst_x));
        return std::nullopt;
      }
      return p;
    } catch (const Error& e) {
      note(line, e.code(), "partition '" + variable + "': " + e.message());
      return std::nullopt;
    }
  }

  void flows() {
    for (const auto& f : doc_.flows) {
      if (flows_.contains(f.id)) {
        note(f.line, ErrorCode::kValidation, "flow '" + f.id + "' declared twice");
        continue;
      }
      flows_[f.id] = {&f, partition(f.id, f.unit, f.lo, f.hi, f.terms, f.line)};
      if (!(f.nominal >= f.lo && f.nominal <= f.hi))
        note(f.line, ErrorCode::kValidation, "nominal value of flow '" + f.id + "' lies outside its domain");
    }
  }

  void supports() {
    std::set<std::string> indicators;
    for (const auto& s : doc_.supports) {
      if (supports_.contains(s.id)) {
        note(s.line, ErrorCode::kValidation, "support '" + s.id + "' declared twice");
        continue;
      }
      auto& info = supports_[s.id];
      info.decl = &s;
      if (!indicators.insert(s.indicator).second)
        note(s.line, ErrorCode::kValidation, "indicator '" + s.indicator + "' is used twice");
      auto p = partition(s.indicator, s.unit, s.lo, s.hi, s.terms, s.line);
      bool ok = p.has_value();
      if (!(s.degraded_capability > 0.0 && s.degraded_capability < 100.0)) {
        note(s.line, ErrorCode::kValidation, "cdeg of '" + s.id + "' must lie strictly between 0 and 100");
        ok = false;
      }
      if (!(s.reset >= s.lo && s.reset <= s.hi)) {
        note(s.line, ErrorCode::kValidation, "reset value of '" + s.id + "' lies outside its domain");
        ok = false;
      }
      if (std::count(s.kinds.begin(), s.kinds.end(), SupportKind::kHealthy) != 1) {
        note(s.line, ErrorCode::kValidation, "support '" + s.id + "' needs exactly one healthy state");
        ok = false;
      }
      if (!ok) continue;
      SupportPort port{s.id, s.indicator, *p, {}, s.reset, s.degraded_capability};
      for (const auto& t : p->terms()) {
        std::size_t k = 0;
        while (s.terms[k].label != t.label) ++k;
        port.term_kinds.push_back(s.kinds[k]);
      }
      info.port = std::move(port);
    }
  }

  std::optional<FlowPort> flow_port(const PortDecl& decl) {
    auto it = flows_.find(decl.flow);
    if (it == flows_.end()) {
      note(decl.line, ErrorCode::kUnknownFlow, "no flow '" + decl.flow + "' is declared");
      return std::nullopt;
    }
    if (!it->second.partition) return std::nullopt;
    const auto& f = *it->second.decl;
    return FlowPort{decl.name, f.id, f.attribute, f.unit, *it->second.partition, f.nominal};
  }

  std::vector<AxisPlan> node_axes(const ProcessDecl& p) const {
    std::vector<AxisPlan> axes;
    auto axis = [&](const SampleSpec& s) {
      AxisPlan a;
      a.count = s.count.value_or(doc_.training.plan.grid);
      a.levels = s.levels;
      return a;
    };
    for (const auto& in : p.inputs) axes.push_back(axis(flows_.at(in.flow).decl->sample));
    for (const auto& [id, line] : p.supports) axes.push_back(axis(supports_.at(id).decl->sample));
    return axes;
  }

  std::optional<ProcessNode> process(const ProcessDecl& p, std::vector<CompiledOutput>& compiled,
                                     std::size_t node_index) {
    ProcessNode node;
    node.id = p.id;
    bool ok = true;
    std::set<std::string> names;
    for (const auto& in : p.inputs) {
      if (!names.insert(in.name).second) {
        note(in.line, ErrorCode::kValidation, "port '" + in.name + "' declared twice in '" + p.id + "'");
        ok = false;
      }
      if (auto port = flow_port(in)) node.inputs.push_back(std::move(*port));
      else ok = false;
    }
    for (const auto& [id, line] : p.supports) {
      auto it = supports_.find(id);
      if (it == supports_.end()) {
        note(line, ErrorCode::kUnknownSupport, "no support '" + id + "' is declared");
        ok = false;
      } else if (!it->second.port) {
        ok = false;
      } else {
        node.supports.push_back(*it->second.port);
      }
    }
    if (p.outputs.empty()) {
      note(p.line, ErrorCode::kValidation, "process '" + p.id + "' has no output");
      ok = false;
    }
    std::vector<FlowPort> outs;
    for (const auto& out : p.outputs) {
      if (!names.insert(out.name).second) {
        note(out.line, ErrorCode::kValidation, "port '" + out.name + "' declared twice in '" + p.id + "'");
        ok = false;
      }
      if (auto port = flow_port(out)) outs.push_back(std::move(*port));
      else ok = false;
    }
    for (const auto& h : p.hazops)
      if (std::none_of(p.outputs.begin(), p.outputs.end(), [&](const PortDecl& o) { return o.name == h.output; })) {
        note(h.line, ErrorCode::kUnknownFlow, "'" + h.output + "' is not an output of '" + p.id + "'");
        ok = false;
      }
    for (const auto& r : p.rules)
      if (std::none_of(p.outputs.begin(), p.outputs.end(), [&](const PortDecl& o) { return o.name == r.output; })) {
        note(r.line, ErrorCode::kUnknownFlow, "'" + r.output + "' is not an output of '" + p.id + "'");
        ok = false;
      }
    if (!ok) return std::nullopt;

    std::vector<ModelInput> inputs;
    for (const auto& in : node.inputs) inputs.push_back({in.name, in.partition});
    for (const auto& s : node.supports) inputs.push_back({s.indicator, s.partition});

    for (std::size_t o = 0; o < outs.size(); ++o) {
      auto& port = outs[o];
      const HazopDecl* hazop = nullptr;
      for (const auto& h : p.hazops)
        if (h.output == port.name) {
          if (hazop) {
            note(h.line, ErrorCode::kValidation, "second hazop table for '" + port.name + "'");
            ok = false;
          }
          hazop = &h;
        }
      std::vector<const RuleDecl*> declared;
      for (const auto& r : p.rules)
        if (r.output == port.name) declared.push_back(&r);
      const std::size_t line = hazop ? hazop->line : declared.empty() ? p.outputs[o].line : declared.front()->line;
      if (hazop && !declared.empty()) {
        note(line, ErrorCode::kValidation, "'" + port.name + "' has both a hazop table and rule lines");
        ok = false;
        continue;
      }
      if (!hazop && declared.empty()) {
        note(line, ErrorCode::kMissingOutputTerm, "'" + port.name + "' has neither a hazop table nor rules");
        ok = false;
        continue;
      }
      std::vector<FuzzyRule> rules;
      CompiledOutput co;
      co.node = node_index;
      co.output = o;
      if (hazop) {
        auto r = compile_hazop(p, node, port, *hazop, co);
        if (!r) {
          ok = false;
          continue;
        }
        rules = std::move(*r);
      } else {
        auto r = declared_rules(node, inputs, declared);
        if (!r) {
          ok = false;
          continue;
        }
        rules = std::move(*r);
      }
      std::vector<std::string> terms;
      for (const auto& t : port.partition.terms()) terms.push_back(t.label);
      const auto diag = validate_rulebase(rules, inputs, terms);
      for (const auto& m : diag.missing_terms) {
        note(line, ErrorCode::kMissingOutputTerm, "no rule concludes " + m + "(" + port.name + ")");
        ok = false;
      }
      for (const auto& u : diag.uncovered) {
        note(line, ErrorCode::kValidation, "rule base of '" + port.name + "' does not cover " + u);
        ok = false;
      }
      for (const auto& u : diag.unreachable)
        note(line, ErrorCode::kValidation, "rule base of '" + port.name + "': " + u, true);
      if (!diag.ok()) continue;
      try {
        AnfisModel model(inputs, ModelOutput{port.name, port.unit, terms}, std::move(rules));
        node.outputs.push_back({std::move(port), std::move(model)});
        compiled.push_back(std::move(co));
      } catch (const Error& e) {
        note(line, e.code(), e.message());
        ok = false;
      }
    }
    if (!ok) return std::nullopt;
    return node;
  }

  std::optional<std::vector<FuzzyRule>> compile_hazop(const ProcessDecl& p, const ProcessNode& node,
                                                      const FlowPort& out, const HazopDecl& h,
                                                      CompiledOutput& co) {
    if (node.inputs.size() != 1 || node.supports.size() != 1) {
      note(h.line, ErrorCode::kValidation,
           "hazop tables compile only for processes with one input flow and one support; "
           "give '" + p.id + "' explicit rule lines");
      return std::nullopt;
    }
    auto deviations = [&](const FuzzyPartition& part, const std::string& what) -> std::optional<std::vector<Deviation>> {
      std::vector<Deviation> v;
      for (const auto& t : part.terms()) {
        auto d = parse_deviation(t.label);
        if (!d) {
          note(h.line, ErrorCode::kValidation,
               "term '" + t.label + "' of " + what + " is not one of OK, NO, LESS, MORE");
          return std::nullopt;
        }
        v.push_back(*d);
      }
      return v;
    };
    const auto& in = node.inputs[0];
    const auto& sp = node.supports[0];
    auto in_terms = deviations(in.partition, "'" + in.name + "'");
    auto out_terms = deviations(out.partition, "'" + out.name + "'");
    if (!in_terms || !out_terms) return std::nullopt;

    RelationContext ctx;
    ctx.input_flow = in.name;
    ctx.input_terms = *in_terms;
    ctx.support = sp.id;
    for (std::size_t k = 0; k < sp.partition.size(); ++k)
      ctx.support_states.push_back({sp.term_kinds[k], sp.partition.term(k).label});
    ctx.output_flow = out.name;
    ctx.output_terms = *out_terms;

    std::vector<HazopEntry> entries;
    for (const auto& row : h.rows) {
      HazopEntry e{out.name, out.attribute, row.deviation, {}};
      for (const auto& [label, id] : row.causes) {
        if (id == sp.id) {
          e.causes.push_back(Cause::support(id, label));
        } else {
          auto d = parse_deviation(label);
          if (!d) {
            note(row.line, ErrorCode::kValidation, "'" + label + "(" + id + ")' is neither a deviation nor a mode of '" + sp.id + "'");
            return std::nullopt;
          }
          e.causes.push_back(Cause::flow(id, *d));
        }
      }
      entries.push_back(std::move(e));
    }
    try {
      co.from_hazop = true;
      co.context = ctx;
      co.relations = instantiate_relations(entries, ctx);
      co.rules = merge_rules(co.relations, ctx);
      return to_fuzzy_rules(co.rules, in.partition, sp.partition);
    } catch (const Error& e) {
      note(h.line, e.code(), "'" + p.id + "." + out.name + "': " + e.message());
      return std::nullopt;
    }
  }

  std::optional<std::vector<FuzzyRule>> declared_rules(const ProcessNode& node,
                                                       const std::vector<ModelInput>& inputs,
                                                       const std::vector<const RuleDecl*>& decls) {
    std::vector<FuzzyRule> rules;
    for (const auto* d : decls) {
      auto it = std::find_if(rules.begin(), rules.end(), [&](const FuzzyRule& r) { return r.output_term == d->term; });
      if (it == rules.end()) {
        rules.push_back({{}, d->term, {}, 0.0});
        it = rules.end() - 1;
      }
      for (const auto& c : d->clauses) {
        Clause clause;
        for (const auto& [label, var] : c) {
          std::optional<std::size_t> input;
          for (std::size_t k = 0; k < node.inputs.size(); ++k)
            if (node.inputs[k].name == var) input = k;
          for (std::size_t k = 0; k < node.supports.size(); ++k)
            if (node.supports[k].id == var || node.supports[k].indicator == var) input = node.inputs.size() + k;
          if (!input) {
            note(d->line, ErrorCode::kUnknownFlow, "'" + var + "' is not an input or support of '" + node.id + "'");
            return std::nullopt;
          }
          auto term = inputs[*input].partition.index_of(label);
          if (!term) {
            note(d->line, ErrorCode::kValidation, "'" + var + "' has no term '" + label + "'");
            return std::nullopt;
          }
          clause.push_back({*input, *term});
        }
        it->antecedent.clauses.push_back(std::move(clause));
      }
    }
    return rules;
  }

  void params(std::vector<ProcessNode>& nodes) {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& pd : doc_.params) {
      if (!seen.insert({pd.node, pd.output}).second) {
        note(pd.line, ErrorCode::kValidation, "second params block for '" + pd.node + "." + pd.output + "'");
        broken_ = true;
        continue;
      }
      auto nit = std::find_if(nodes.begin(), nodes.end(), [&](const ProcessNode& n) { return n.id == pd.node; });
      if (nit == nodes.end()) {
        if (!broken_) note(pd.line, ErrorCode::kUnknownTarget, "params for unknown process '" + pd.node + "'");
        broken_ = true;
        continue;
      }
      auto oit = std::find_if(nit->outputs.begin(), nit->outputs.end(),
                              [&](const OutputPort& o) { return o.port.name == pd.output; });
      if (oit == nit->outputs.end()) {
        note(pd.line, ErrorCode::kUnknownTarget, "'" + pd.output + "' is not an output of '" + pd.node + "'");
        broken_ = true;
        continue;
      }
      if (!apply_params(pd, oit->model)) broken_ = true;
    }
  }

  bool apply_params(const ParamsDecl& pd, AnfisModel& model) {
    const auto& inputs = model.inputs();
    std::map<std::string, std::vector<const PremiseDecl*>> by_input;
    for (const auto& pr : pd.premises) by_input[pr.input].push_back(&pr);
    for (const auto& [name, prs] : by_input) {
      auto it = std::find_if(inputs.begin(), inputs.end(), [&](const ModelInput& m) { return m.name == name; });
      if (it == inputs.end()) {
        note(prs.front()->line, ErrorCode::kUnknownTarget, "model '" + pd.output + "' has no input '" + name + "'");
        return false;
      }
      const auto& base = it->partition;
      if (prs.size() != base.size()) {
        note(prs.front()->line, ErrorCode::kValidation, "premises of '" + name + "' must list all " +
                                                            std::to_string(base.size()) + " terms");
        return false;
      }
      std::vector<TermSpec> specs;
      for (std::size_t k = 0; k < prs.size(); ++k) {
        if (prs[k]->label != base.term(k).label) {
          note(prs[k]->line, ErrorCode::kValidation, "premise " + std::to_string(k + 1) + " of '" + name +
                                                         "' must be '" + base.term(k).label + "'");
          return false;
        }
        specs.push_back({prs[k]->label, prs[k]->kind, prs[k]->values, prs[k]->line});
      }
      auto p = partition(base.variable(), base.unit(), base.lo(), base.hi(), specs, prs.front()->line);
      if (!p) return false;
      model.set_partition(static_cast<std::size_t>(it - inputs.begin()), std::move(*p));
    }
    std::set<std::string> given;
    for (const auto& c : pd.consequents) {
      const auto& rules = model.rules();
      auto it = std::find_if(rules.begin(), rules.end(), [&](const FuzzyRule& r) { return r.output_term == c.term; });
      if (it == rules.end()) {
        note(c.line, ErrorCode::kUnknownTarget, "model '" + pd.output + "' has no rule for '" + c.term + "'");
        return false;
      }
      if (!given.insert(c.term).second) {
        note(c.line, ErrorCode::kValidation, "consequent '" + c.term + "' given twice");
        return false;
      }
      if (!c.coefficients.empty() && c.coefficients.size() != model.input_count()) {
        note(c.line, ErrorCode::kArityMismatch, "consequent '" + c.term + "' needs " +
                                                    std::to_string(model.input_count()) + " coefficients");
        return false;
      }
      std::vector<double> coeffs = c.coefficients;
      coeffs.resize(model.input_count(), 0.0);
      model.set_consequent(static_cast<std::size_t>(it - rules.begin()), coeffs, c.bias);
    }
    if (given.size() != model.rule_count()) {
      note(pd.line, ErrorCode::kValidation, "params of '" + pd.node + "." + pd.output + "' must give every consequent");
      return false;
    }
    model.set_trained(true);
    return true;
  }

  bool connects(const std::vector<ProcessNode>& nodes) {
    bool ok = true;
    std::set<std::pair<std::string, std::string>> targets;
    for (const auto& c : doc_.connects) {
      const auto& e = c.edge;
      auto node = [&](const std::string& id) -> const ProcessNode* {
        for (const auto& n : nodes)
          if (n.id == id) return &n;
        return nullptr;
      };
      const auto* from = node(e.from_node);
      const auto* to = node(e.to_node);
      const std::string text = e.from_node + "." + e.from_port + " -> " + e.to_node + "." + e.to_port;
      if (!from || !to) {
        note(c.line, ErrorCode::kDanglingEdge, text + ": no process '" + (from ? e.to_node : e.from_node) + "'");
        ok = false;
        continue;
      }
      const FlowPort* out = nullptr;
      for (const auto& o : from->outputs)
        if (o.port.name == e.from_port) out = &o.port;
      const FlowPort* in = nullptr;
      for (const auto& i : to->inputs)
        if (i.name == e.to_port) in = &i;
      if (!out || !in) {
        note(c.line, ErrorCode::kDanglingEdge,
             text + ": no " + (out ? "input port '" + e.to_port : "output port '" + e.from_port) + "'");
        ok = false;
        continue;
      }
      if (out->attribute != in->attribute || out->unit != in->unit) {
        note(c.line, ErrorCode::kPortMismatch, text + ": '" + out->attribute + "' [" + out->unit + "] vs '" +
                                                   in->attribute + "' [" + in->unit + "]");
        ok = false;
      }
      if (!targets.insert({e.to_node, e.to_port}).second) {
        note(c.line, ErrorCode::kValidation, text + ": input already connected");
        ok = false;
      }
    }
    return ok;
  }

  const ModelDocument& doc_;
  std::map<std::string, FlowInfo> flows_;
  std::map<std::string, SupportInfo> supports_;
  bool broken_ = false;
};

void write_params(std::ostream& out, const ProcessNode& node, const OutputPort& o) {
  const auto& m = o.model;
  out << "params " << node.id << '.' << o.port.name << '\n';
  for (const auto& in : m.inputs())
    for (const auto& t : in.partition.terms()) {
      out << "  premise " << in.name << ' ' << t.label << ' '
          << (t.mf.shape() == MfShape::kTriangular ? "tri" : "trap");
      for (double v : t.mf.breakpoints()) out << ' ' << format_number(v);
      out << '\n';
    }
  for (const auto& r : m.rules()) {
    out << "  consequent " << r.output_term << ' ' << format_number(r.bias);
    if (std::any_of(r.coefficients.begin(), r.coefficients.end(), [](double c) { return c != 0.0; }))
      for (double c : r.coefficients) out << ' ' << format_number(c);
    out << '\n';
  }
  out << "end\n";
}

}  // namespace

ModelDocument parse_model(std::istream& in, const std::string& source) { return Parser(in, source).run(); }

ModelDocument parse_model_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return parse_model(f, path);
}

std::string format_diagnostic(const std::string& source, const Diagnostic& d) {
  std::string s = source;
  if (d.line) s += ":" + std::to_string(d.line);
  s += d.warning ? ": warning: " : ": ";
  return s + std::string(to_string(d.code)) + ": " + d.message;
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) { return !d.warning; });
}

std::vector<Diagnostic> validate_model(const ModelDocument& doc) {
  Builder b(doc);
  b.run();
  return std::move(b.diagnostics);
}

CompiledModel build_model(const ModelDocument& doc) {
  Builder b(doc);
  b.run();
  if (has_errors(b.diagnostics)) {
    std::string text;
    for (const auto& d : b.diagnostics)
      if (!d.warning) text += "\n  " + format_diagnostic(doc.source, d);
    throw Error(ErrorCode::kValidation, "model '" + doc.source + "' is invalid:" + text);
  }
  return std::move(b.result);
}

std::string rule_report(const CompiledModel& model) {
  std::ostringstream out;
  const auto& nodes = model.system.nodes();
  for (const auto& co : model.outputs) {
    const auto& node = nodes[co.node];
    const auto& o = node.outputs[co.output];
    out << "== " << node.id << '.' << o.port.name << " ==\n";
    if (co.from_hazop) {
      out << "causal relations:\n";
      for (const auto& r : co.relations) out << "  " << format_relation(r, co.context) << '\n';
      out << "rules:\n";
      for (const auto& r : co.rules) out << "  " << format_rule(r, co.context) << '\n';
    } else {
      out << "rules (declared):\n";
      const auto& inputs = o.model.inputs();
      for (const auto& r : o.model.rules()) {
        out << "  ";
        for (std::size_t c = 0; c < r.antecedent.clauses.size(); ++c) {
          if (c) out << " | ";
          const auto& cl = r.antecedent.clauses[c];
          for (std::size_t l = 0; l < cl.size(); ++l)
            out << (l ? " & " : "") << inputs[cl[l].input].partition.term(cl[l].term).label << '('
                << inputs[cl[l].input].name << ')';
        }
        out << " -> " << r.output_term << '(' << o.port.name << ")\n";
      }
    }
  }
  return out.str();
}

void save_model(std::ostream& out, const ModelDocument& doc, const SystemModel& system) {
  std::vector<bool> skip(doc.lines.size(), false);
  for (const auto& p : doc.params)
    for (std::size_t l = p.line; l <= p.end_line && l >= 1 && l <= skip.size(); ++l) skip[l - 1] = true;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < doc.lines.size(); ++i)
    if (!skip[i]) kept.push_back(doc.lines[i]);
  while (!kept.empty() && trim(kept.back()).empty()) kept.pop_back();
  for (const auto& l : kept) out << l << '\n';
  for (auto n : system.order()) {
    const auto& node = system.nodes()[n];
    for (const auto& o : node.outputs)
      if (o.model.trained()) {
        out << '\n';
        write_params(out, node, o);
      }
  }
}

void save_model_file(const std::string& path, const ModelDocument& doc, const SystemModel& system) {
  std::ostringstream buf;
  save_model(buf, doc, system);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  f << buf.str();
  if (!f) throw Error(ErrorCode::kIo, "failed writing '" + path + "'");
}

}  // namespace perfloss
