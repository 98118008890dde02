#include "perfloss/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>

#include "perfloss/error.hpp"
#include "text.hpp"

namespace perfloss {

std::string_view to_string(SamplingDesign design) {
  switch (design) {
    case SamplingDesign::kFactorial: return "factorial";
    case SamplingDesign::kSweep: return "sweep";
    case SamplingDesign::kRandom: return "random";
  }
  return "?";
}

std::optional<SamplingDesign> parse_sampling_design(std::string_view text) {
  if (text == "factorial") return SamplingDesign::kFactorial;
  if (text == "sweep") return SamplingDesign::kSweep;
  if (text == "random") return SamplingDesign::kRandom;
  return std::nullopt;
}

std::vector<double> axis_levels(const AxisPlan& axis, const FuzzyPartition& partition) {
  if (!axis.levels.empty()) {
    std::vector<double> v = axis.levels;
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  }
  const double lo = axis.lo.value_or(partition.lo());
  const double hi = axis.hi.value_or(partition.hi());
  if (axis.count == 0) throw Error(ErrorCode::kInvalidArgument, "axis count must be at least 1");
  if (axis.count == 1) return {lo};
  std::vector<double> v(axis.count);
  for (std::size_t i = 0; i < axis.count; ++i)
    v[i] = i + 1 == axis.count ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(axis.count - 1);
  return v;
}

namespace {

const FuzzyPartition& axis_partition(const ProcessNode& node, std::size_t i) {
  if (i < node.inputs.size()) return node.inputs[i].partition;
  return node.supports.at(i - node.inputs.size()).partition;
}

std::size_t input_count(const ProcessNode& node) { return node.inputs.size() + node.supports.size(); }

}  // namespace

double oracle_target(const ProcessNode& node, std::span<const double> inputs) {
  if (inputs.size() != input_count(node))
    throw Error(ErrorCode::kArityMismatch, "process '" + node.id + "' takes " +
                                               std::to_string(input_count(node)) + " inputs");
  double bottleneck = std::numeric_limits<double>::infinity();
  double excess = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < node.inputs.size(); ++i) {
    const auto& port = node.inputs[i];
    const double x = port.partition.clamp(inputs[i]);
    bottleneck = std::min(bottleneck, x);
    excess = std::min(excess, std::max(0.0, x - port.nominal));
  }
  if (node.inputs.empty()) excess = 0.0;
  double healthy = 1.0;
  for (std::size_t s = 0; s < node.supports.size(); ++s) {
    const auto& sp = node.supports[s];
    const auto f = fuzzify(sp.partition, inputs[node.inputs.size() + s]);
    double capability = 0.0, h = 0.0;
    for (std::size_t k = 0; k < f.degrees.size(); ++k) {
      switch (sp.term_kinds[k]) {
        case SupportKind::kHealthy:
          capability += 100.0 * f.degrees[k];
          h += f.degrees[k];
          break;
        case SupportKind::kDegraded: capability += sp.degraded_capability * f.degrees[k]; break;
        case SupportKind::kFailed: break;
      }
    }
    bottleneck = std::min(bottleneck, capability);
    healthy = std::min(healthy, h);
  }
  if (!std::isfinite(bottleneck)) return 100.0;
  return bottleneck + healthy * excess;
}

std::vector<double> nominal_point(const ProcessNode& node) {
  std::vector<double> x;
  for (const auto& p : node.inputs) x.push_back(p.nominal);
  for (const auto& s : node.supports) x.push_back(s.reset_value);
  return x;
}

TrainingDataset synthesize(const ProcessNode& node, std::size_t output, const SamplingPlan& plan) {
  const auto& out = node.outputs.at(output);
  const std::size_t n = input_count(node);
  std::vector<std::vector<double>> levels(n);
  for (std::size_t i = 0; i < n; ++i) {
    AxisPlan axis;
    axis.count = plan.grid;
    levels[i] = axis_levels(i < plan.axes.size() ? plan.axes[i] : axis, axis_partition(node, i));
  }

  std::vector<std::vector<double>> points;
  std::mt19937_64 rng(plan.seed);
  switch (plan.design) {
    case SamplingDesign::kFactorial: {
      std::vector<std::size_t> idx(n, 0);
      while (true) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = levels[i][idx[i]];
        points.push_back(std::move(x));
        std::size_t k = n;
        while (k > 0 && ++idx[k - 1] == levels[k - 1].size()) idx[--k] = 0;
        if (k == 0) break;
      }
      break;
    }
    case SamplingDesign::kSweep: {
      const auto nominal = nominal_point(node);
      std::set<std::vector<double>> seen{nominal};
      points.push_back(nominal);
      for (std::size_t i = 0; i < n; ++i)
        for (double v : levels[i]) {
          auto x = nominal;
          x[i] = v;
          if (seen.insert(x).second) points.push_back(std::move(x));
        }
      break;
    }
    case SamplingDesign::kRandom: {
      for (std::size_t r = 0; r < plan.samples; ++r) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& axis = i < plan.axes.size() ? plan.axes[i] : AxisPlan{};
          if (!axis.levels.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, levels[i].size() - 1);
            x[i] = levels[i][pick(rng)];
          } else {
            std::uniform_real_distribution<double> u(levels[i].front(), levels[i].back());
            x[i] = u(rng);
          }
        }
        points.push_back(std::move(x));
      }
      break;
    }
  }

  TrainingDataset data;
  for (const auto& in : out.model.inputs()) data.columns.push_back(in.name);
  data.columns.push_back(out.port.name);
  std::normal_distribution<double> noise(0.0, plan.noise > 0.0 ? plan.noise : 1.0);
  for (auto& x : points) {
    double y = oracle_target(node, x);
    if (plan.noise > 0.0) y += noise(rng);
    data.add(std::move(x), y);
  }
  return data;
}

void save_dataset(std::ostream& out, const TrainingDataset& data) {
  for (std::size_t i = 0; i < data.columns.size(); ++i) out << (i ? "," : "") << data.columns[i];
  out << '\n';
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (double v : data.inputs[r]) out << format_number(v) << ',';
    out << format_number(data.targets[r]) << '\n';
  }
}

void save_dataset(const std::string& path, const TrainingDataset& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  save_dataset(f, data);
  if (!f) throw Error(ErrorCode::kIo, "failed writing '" + path + "'");
}

TrainingDataset load_dataset(std::istream& in, const std::string& source) {
  TrainingDataset data;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto trimmed = trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto fields = split(trimmed, ',');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (!header) {
      if (fields.size() < 2)
        throw Error(ErrorCode::kParseError, where + "header needs input columns and a target column");
      for (const auto& f : fields) {
        if (f.empty()) throw Error(ErrorCode::kParseError, where + "empty column name");
        data.columns.emplace_back(f);
      }
      header = true;
      continue;
    }
    if (fields.size() != data.columns.size())
      throw Error(ErrorCode::kArityMismatch, where + "expected " + std::to_string(data.columns.size()) +
                                                 " fields, found " + std::to_string(fields.size()));
    std::vector<double> row;
    for (const auto& f : fields) {
      auto v = parse_number(f);
      if (!v) throw Error(ErrorCode::kParseError, where + "'" + std::string(f) + "' is not a finite number");
      row.push_back(*v);
    }
    const double y = row.back();
    row.pop_back();
    data.add(std::move(row), y);
  }
  if (!header) throw Error(ErrorCode::kParseError, source + ": missing header line");
  return data;
}

TrainingDataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return load_dataset(f, path);
}

void check_dataset(const AnfisModel& model, const TrainingDataset& data) {
  if (data.arity() != model.input_count())
    throw Error(ErrorCode::kArityMismatch, "dataset has " + std::to_string(data.arity()) +
                                               " input columns, model '" + model.output().name +
                                               "' takes " + std::to_string(model.input_count()));
  for (std::size_t i = 0; i < model.input_count(); ++i)
    if (data.columns[i] != model.inputs()[i].name)
      throw Error(ErrorCode::kArityMismatch, "dataset column '" + data.columns[i] +
                                                 "' does not match model input '" +
                                                 model.inputs()[i].name + "'");
}

}  // namespace perfloss
