#include "perfloss/anfis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

#include "perfloss/error.hpp"

namespace perfloss {

AnfisModel::AnfisModel(std::vector<ModelInput> inputs, ModelOutput output,
                       std::vector<FuzzyRule> rules)
    : inputs_(std::move(inputs)), output_(std::move(output)), rules_(std::move(rules)) {
  if (inputs_.empty()) throw Error(ErrorCode::kInvalidArgument, "model has no inputs");
  std::set<std::string> names;
  for (const auto& in : inputs_)
    if (!names.insert(in.name).second)
      throw Error(ErrorCode::kInvalidArgument, "duplicate model input '" + in.name + "'");
  std::set<std::string> out_terms(output_.terms.begin(), output_.terms.end());
  if (out_terms.size() != output_.terms.size() || out_terms.empty())
    throw Error(ErrorCode::kInvalidArgument,
                "output '" + output_.name + "' needs distinct, non-empty term labels");

  std::set<std::string> covered;
  for (auto& rule : rules_) {
    if (!out_terms.contains(rule.output_term))
      throw Error(ErrorCode::kInvalidArgument,
                  "rule targets unknown output term '" + rule.output_term + "'");
    if (!covered.insert(rule.output_term).second)
      throw Error(ErrorCode::kInvalidArgument,
                  "more than one rule for output term '" + rule.output_term + "'");
    if (rule.coefficients.empty()) rule.coefficients.assign(inputs_.size(), 0.0);
    if (rule.coefficients.size() != inputs_.size())
      throw Error(ErrorCode::kInvalidArgument, "rule '" + rule.output_term +
                                                   "' has the wrong number of coefficients");
    if (rule.antecedent.clauses.empty())
      throw Error(ErrorCode::kInvalidArgument, "rule '" + rule.output_term + "' has no clauses");
    std::set<Clause> seen;
    for (const auto& clause : rule.antecedent.clauses) {
      if (clause.empty())
        throw Error(ErrorCode::kInvalidArgument, "rule '" + rule.output_term + "' has an empty clause");
      std::set<std::size_t> used;
      for (const auto& lit : clause) {
        if (lit.input >= inputs_.size() || lit.term >= inputs_[lit.input].partition.size())
          throw Error(ErrorCode::kInvalidArgument,
                      "rule '" + rule.output_term + "' references a missing input term");
        if (!used.insert(lit.input).second)
          throw Error(ErrorCode::kInvalidArgument,
                      "rule '" + rule.output_term + "' has two literals on input '" +
                          inputs_[lit.input].name + "' in one clause");
      }
      auto sorted = clause;
      std::sort(sorted.begin(), sorted.end());
      if (!seen.insert(sorted).second)
        throw Error(ErrorCode::kInvalidArgument,
                    "rule '" + rule.output_term + "' repeats a clause");
    }
  }
  if (covered.size() != out_terms.size()) {
    for (const auto& t : output_.terms)
      if (!covered.contains(t))
        throw Error(ErrorCode::kMissingOutputTerm,
                    "output '" + output_.name + "' has no rule for term '" + t + "'");
  }
}

void AnfisModel::set_consequent(std::size_t rule, std::span<const double> coefficients,
                                double bias) {
  auto& r = rules_.at(rule);
  if (coefficients.size() != inputs_.size())
    throw Error(ErrorCode::kInvalidArgument, "consequent has the wrong number of coefficients");
  r.coefficients.assign(coefficients.begin(), coefficients.end());
  r.bias = bias;
}

void AnfisModel::set_partition(std::size_t input, FuzzyPartition partition) {
  const auto& old = inputs_.at(input).partition;
  if (old.size() != partition.size() || old.lo() != partition.lo() || old.hi() != partition.hi())
    throw Error(ErrorCode::kInvalidArgument,
                "replacement partition for '" + inputs_[input].name + "' changes its layout");
  for (std::size_t i = 0; i < old.size(); ++i)
    if (old.term(i).label != partition.term(i).label)
      throw Error(ErrorCode::kInvalidArgument,
                  "replacement partition for '" + inputs_[input].name + "' relabels a term");
  inputs_[input].partition = std::move(partition);
}

double probabilistic_sum(double a, double b) noexcept { return a + b * (1.0 - a); }

double clause_strength(const Clause& clause, const Memberships& degrees) {
  double s = 1.0;
  for (const auto& lit : clause) s *= degrees.at(lit.input).at(lit.term);
  return s;
}

double rule_strength(const RuleAntecedent& antecedent, const Memberships& degrees) {
  double s = 0.0;
  for (const auto& clause : antecedent.clauses)
    s = probabilistic_sum(s, clause_strength(clause, degrees));
  return s;
}

std::vector<double> normalize_strengths(std::span<const double> strengths) {
  double total = 0.0;
  for (double w : strengths) {
    if (!(w >= 0.0))
      throw Error(ErrorCode::kInvalidArgument, "rule strengths must be non-negative");
    total += w;
  }
  if (total <= 0.0)
    throw Error(ErrorCode::kAllRulesSilent, "no rule fires for this input");
  std::vector<double> out(strengths.begin(), strengths.end());
  for (double& w : out) w /= total;
  return out;
}

ForwardTrace forward(const AnfisModel& model, std::span<const double> inputs) {
  if (inputs.size() != model.input_count())
    throw Error(ErrorCode::kArityMismatch, "model '" + model.output().name + "' expects " +
                                               std::to_string(model.input_count()) +
                                               " inputs, got " + std::to_string(inputs.size()));
  ForwardTrace t;
  t.inputs.reserve(inputs.size());
  t.memberships.reserve(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!std::isfinite(inputs[k]))
      throw Error(ErrorCode::kInvalidArgument,
                  "input '" + model.inputs()[k].name + "' is not finite");
    auto f = fuzzify(model.inputs()[k].partition, inputs[k]);
    if (f.clamped) t.clamped.push_back(k);
    t.inputs.push_back(f.value);
    t.memberships.push_back(std::move(f.degrees));
  }
  for (const auto& rule : model.rules()) t.strengths.push_back(rule_strength(rule.antecedent, t.memberships));
  t.normalized = normalize_strengths(t.strengths);
  for (std::size_t j = 0; j < model.rule_count(); ++j) {
    const auto& rule = model.rules()[j];
    double f = rule.bias;
    for (std::size_t k = 0; k < t.inputs.size(); ++k) f += rule.coefficients[k] * t.inputs[k];
    t.consequents.push_back(f);
    t.weighted.push_back(t.normalized[j] * f);
  }
  t.output = std::accumulate(t.weighted.begin(), t.weighted.end(), 0.0);
  return t;
}

double evaluate(const AnfisModel& model, std::span<const double> inputs) {
  return forward(model, inputs).output;
}

void TrainingDataset::add(std::vector<double> x, double y) {
  if (!columns.empty() && x.size() != arity())
    throw Error(ErrorCode::kArityMismatch, "row has " + std::to_string(x.size()) +
                                               " inputs, dataset expects " +
                                               std::to_string(arity()));
  inputs.push_back(std::move(x));
  targets.push_back(y);
}

namespace {

void check_dataset(const AnfisModel& model, const TrainingDataset& data) {
  if (data.size() == 0)
    throw Error(ErrorCode::kEmptyDataset, "no training rows for '" + model.output().name + "'");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.inputs[i].size() != model.input_count())
      throw Error(ErrorCode::kArityMismatch,
                  "row " + std::to_string(i + 1) + " has " + std::to_string(data.inputs[i].size()) +
                      " inputs, model '" + model.output().name + "' expects " +
                      std::to_string(model.input_count()));
    if (!std::isfinite(data.targets[i]))
      throw Error(ErrorCode::kInvalidArgument, "row " + std::to_string(i + 1) + " has a non-finite target");
  }
}

struct InputChain {
  std::size_t input;
  std::size_t offset;
  KnotChain chain;
};

std::vector<InputChain> chains_of(const AnfisModel& model) {
  std::vector<InputChain> out;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < model.input_count(); ++k) {
    auto chain = KnotChain::from_partition(model.inputs()[k].partition);
    if (!chain || chain->free_count() == 0) continue;
    const std::size_t n = chain->free_count();
    out.push_back({k, offset, std::move(*chain)});
    offset += n;
  }
  return out;
}

}  // namespace

double rmse(const AnfisModel& model, const TrainingDataset& data) {
  check_dataset(model, data);
  double sse = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = evaluate(model, data.inputs[i]) - data.targets[i];
    sse += e * e;
  }
  return std::sqrt(sse / static_cast<double>(data.size()));
}

LseResult lse_fit_consequents(const AnfisModel& model, const TrainingDataset& data,
                              bool constant_only) {
  check_dataset(model, data);
  const std::size_t m = model.input_count();
  const std::size_t r = model.rule_count();
  const std::size_t per_rule = constant_only ? 1 : m + 1;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(data.size()),
                         static_cast<Eigen::Index>(r * per_rule));
  Eigen::VectorXd target(static_cast<Eigen::Index>(data.size()));
  std::vector<double> peak(r, 0.0);

  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto trace = forward(model, data.inputs[i]);
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < r; ++j) {
      const double wn = trace.normalized[j];
      peak[j] = std::max(peak[j], wn);
      const auto col = static_cast<Eigen::Index>(j * per_rule);
      if (!constant_only)
        for (std::size_t k = 0; k < m; ++k)
          design(row, col + static_cast<Eigen::Index>(k)) = wn * trace.inputs[k];
      design(row, col + static_cast<Eigen::Index>(per_rule - 1)) = wn;
    }
    target(row) = data.targets[i];
  }

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  const Eigen::VectorXd theta = cod.solve(target);

  AnfisModel fitted = model;
  std::vector<double> coeffs(m, 0.0);
  for (std::size_t j = 0; j < r; ++j) {
    const auto col = static_cast<Eigen::Index>(j * per_rule);
    if (!constant_only)
      for (std::size_t k = 0; k < m; ++k) coeffs[k] = theta(col + static_cast<Eigen::Index>(k));
    fitted.set_consequent(j, coeffs, theta(col + static_cast<Eigen::Index>(per_rule - 1)));
  }
  fitted.set_trained(true);

  const Eigen::VectorXd residual = design * theta - target;
  LseResult out{std::move(fitted), std::sqrt(residual.squaredNorm() / static_cast<double>(data.size())),
                static_cast<std::size_t>(cod.rank()), {}};
  for (std::size_t j = 0; j < r; ++j)
    if (peak[j] == 0.0) out.silent_rules.push_back(j);
  return out;
}

std::vector<double> premise_parameters(const AnfisModel& model) {
  std::vector<double> out;
  for (const auto& c : chains_of(model)) {
    auto v = c.chain.free_values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

AnfisModel with_premise_parameters(const AnfisModel& model, std::span<const double> values) {
  auto chains = chains_of(model);
  std::size_t total = 0;
  for (const auto& c : chains) total += c.chain.free_count();
  if (values.size() != total)
    throw Error(ErrorCode::kInvalidArgument, "premise vector has the wrong length");
  AnfisModel out = model;
  for (auto& c : chains) {
    c.chain.set_free_values(values.subspan(c.offset, c.chain.free_count()));
    out.set_partition(c.input, c.chain.apply(model.inputs()[c.input].partition));
  }
  return out;
}

std::vector<double> premise_gradient(const AnfisModel& model, const TrainingDataset& data) {
  check_dataset(model, data);
  const auto chains = chains_of(model);
  std::size_t nparams = 0;
  for (const auto& c : chains) nparams += c.chain.free_count();
  std::vector<double> grad(nparams, 0.0);
  if (nparams == 0) return grad;

  const std::size_t r = model.rule_count();
  std::vector<double> dmu;
  std::vector<double> dw(r * nparams);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto t = forward(model, data.inputs[i]);
    // d mu[input][term] / d theta, only for chained inputs.
    std::vector<std::vector<double>> dmu_by_input(model.input_count());
    for (const auto& c : chains) {
      const auto local = c.chain.membership_gradient(t.inputs[c.input]);
      const std::size_t nf = c.chain.free_count();
      auto& full = dmu_by_input[c.input];
      full.assign(model.inputs()[c.input].partition.size() * nparams, 0.0);
      for (std::size_t term = 0; term < model.inputs()[c.input].partition.size(); ++term)
        for (std::size_t p = 0; p < nf; ++p) full[term * nparams + c.offset + p] = local[term * nf + p];
    }

    std::fill(dw.begin(), dw.end(), 0.0);
    for (std::size_t j = 0; j < r; ++j) {
      const auto& clauses = model.rules()[j].antecedent.clauses;
      std::vector<double> strength;
      for (const auto& clause : clauses) strength.push_back(clause_strength(clause, t.memberships));
      for (std::size_t a = 0; a < clauses.size(); ++a) {
        // d(1 - prod(1 - c)) / d c_a
        double outer = 1.0;
        for (std::size_t b = 0; b < clauses.size(); ++b)
          if (b != a) outer *= 1.0 - strength[b];
        for (std::size_t l = 0; l < clauses[a].size(); ++l) {
          const auto& lit = clauses[a][l];
          if (dmu_by_input[lit.input].empty()) continue;
          double others = 1.0;
          for (std::size_t q = 0; q < clauses[a].size(); ++q)
            if (q != l) others *= t.memberships[clauses[a][q].input][clauses[a][q].term];
          const double scale = outer * others;
          const double* row = &dmu_by_input[lit.input][lit.term * nparams];
          for (std::size_t p = 0; p < nparams; ++p) dw[j * nparams + p] += scale * row[p];
        }
      }
    }

    const double total = std::accumulate(t.strengths.begin(), t.strengths.end(), 0.0);
    const double err = t.output - data.targets[i];
    for (std::size_t p = 0; p < nparams; ++p) {
      double num = 0.0;
      double den = 0.0;
      for (std::size_t j = 0; j < r; ++j) {
        num += dw[j * nparams + p] * t.consequents[j];
        den += dw[j * nparams + p];
      }
      const double dy = (num - t.output * den) / total;
      grad[p] += 2.0 * err * dy;
    }
  }
  for (double& g : grad) {
    g /= static_cast<double>(data.size());
    if (!std::isfinite(g))
      throw Error(ErrorCode::kNonFiniteGradient,
                  "premise gradient of '" + model.output().name + "' is not finite");
  }
  return grad;
}

StepResult gd_premise_step(const AnfisModel& model, const TrainingDataset& data, double rate) {
  StepResult out{model, rmse(model, data), 0.0};
  const auto chains = chains_of(model);
  if (rate == 0.0 || chains.empty()) {
    out.rmse_after = out.rmse_before;
    return out;
  }
  const auto grad = premise_gradient(model, data);
  std::vector<double> scaled(grad.size());
  std::vector<double> width(grad.size());
  for (const auto& c : chains)
    for (std::size_t p = 0; p < c.chain.free_count(); ++p)
      width[c.offset + p] = model.inputs()[c.input].partition.width();
  double norm = 0.0;
  for (std::size_t p = 0; p < grad.size(); ++p) {
    scaled[p] = grad[p] * width[p];
    norm += scaled[p] * scaled[p];
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    out.rmse_after = out.rmse_before;
    return out;
  }
  auto theta = premise_parameters(model);
  for (std::size_t p = 0; p < theta.size(); ++p) theta[p] -= rate * width[p] * scaled[p] / norm;
  out.model = with_premise_parameters(model, theta);
  out.rmse_after = rmse(out.model, data);
  return out;
}

TrainResult train(const AnfisModel& model, const TrainingDataset& data, const TrainConfig& config) {
  TrainResult out{model, {}};
  out.report.threshold = config.rmse_threshold;
  if (config.epochs <= 0) {
    out.report.stop_reason = StopReason::kEpochBudget;
    return out;
  }
  check_dataset(model, data);

  LseResult fit = lse_fit_consequents(model, data, config.constant_only);
  if (config.mode == TrainingMode::kLseOnly) {
    out.report.epochs_run = 1;
    out.report.rmse.push_back(fit.rmse);
    out.report.stop_reason = StopReason::kConverged;
    out.report.silent_rules = fit.silent_rules;
    out.model = std::move(fit.model);
    return out;
  }

  double rate = config.learning_rate;
  bool accepted_last = false;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    out.report.epochs_run = epoch;
    out.report.rmse.push_back(fit.rmse);
    if (epoch > 1 && accepted_last) {
      const double improvement = out.report.rmse[epoch - 2] - fit.rmse;
      if (improvement < config.rmse_threshold) {
        out.report.stop_reason = StopReason::kConverged;
        break;
      }
    }
    if (epoch == config.epochs) break;

    auto step = gd_premise_step(fit.model, data, rate);
    auto trial = lse_fit_consequents(step.model, data, config.constant_only);
    if (trial.rmse <= fit.rmse) {
      fit = std::move(trial);
      accepted_last = true;
    } else {
      rate *= 0.5;
      accepted_last = false;
      ++out.report.rejected_steps;
    }
  }
  out.report.silent_rules = fit.silent_rules;
  out.model = std::move(fit.model);
  return out;
}

std::string_view to_string(TrainingMode mode) {
  return mode == TrainingMode::kLseOnly ? "lse_only" : "hybrid";
}

std::string_view to_string(StopReason reason) {
  return reason == StopReason::kEpochBudget ? "epoch_budget" : "converged";
}

}  // namespace perfloss
