#include "perfloss/perfloss.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "perfloss/data.hpp"
#include "perfloss/model_file.hpp"
#include "perfloss/sim.hpp"
#include "perfloss/workflow.hpp"
#include "text.hpp"

struct pl_model {
  perfloss::ModelDocument doc;
  perfloss::CompiledModel compiled;
  std::map<std::string, perfloss::TrainingDataset> datasets;
};

namespace {

thread_local std::string last_error;

pl_status status_of(perfloss::ErrorCode code) { return static_cast<pl_status>(static_cast<int>(code) + 1); }

template <typename F>
pl_status guard(F&& f) {
  try {
    f();
    last_error.clear();
    return PL_OK;
  } catch (const perfloss::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    last_error = std::string("internal error: ") + e.what();
    return PL_ERR_INTERNAL;
  } catch (...) {
    last_error = "internal error";
    return PL_ERR_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw perfloss::Error(perfloss::ErrorCode::kInvalidArgument, what);
}

const perfloss::FlowRef& flow_ref(const pl_model* m, const std::string& flow) {
  for (const auto& f : m->compiled.system.flows())
    if (f.id == flow) return f;
  throw perfloss::Error(perfloss::ErrorCode::kUnknownTarget, "no output flow '" + flow + "'");
}

}  // namespace

extern "C" {

const char* pl_last_error(void) { return last_error.c_str(); }

const char* pl_status_name(pl_status status) {
  static thread_local std::string name;
  if (status == PL_OK) return "Ok";
  if (status == PL_ERR_INTERNAL) return "InternalError";
  const int i = static_cast<int>(status) - 1;
  if (i < 0 || i > static_cast<int>(perfloss::ErrorCode::kValidation)) return "Unknown";
  name = perfloss::to_string(static_cast<perfloss::ErrorCode>(i));
  return name.c_str();
}

void pl_string_free(char* s) { std::free(s); }

pl_status pl_validate_file(const char* path, char** report) {
  return guard([&] {
    require(path && report, "path and report are required");
    *report = nullptr;
    const auto doc = perfloss::parse_model_file(path);
    const auto diags = perfloss::validate_model(doc);
    std::string text;
    for (const auto& d : diags) text += perfloss::format_diagnostic(doc.source, d) + "\n";
    *report = dup(text);
    if (perfloss::has_errors(diags))
      throw perfloss::Error(perfloss::ErrorCode::kValidation,
                            "'" + std::string(path) + "' has " + std::to_string(diags.size()) + " problem(s)");
  });
}

pl_status pl_model_load(const char* path, pl_model** out) {
  return guard([&] {
    require(path && out, "path and out are required");
    *out = nullptr;
    auto m = std::make_unique<pl_model>();
    m->doc = perfloss::parse_model_file(path);
    m->compiled = perfloss::build_model(m->doc);
    *out = m.release();
  });
}

void pl_model_free(pl_model* model) { delete model; }

pl_status pl_model_rule_report(const pl_model* model, char** report) {
  return guard([&] {
    require(model && report, "model and report are required");
    *report = dup(perfloss::rule_report(model->compiled));
  });
}

size_t pl_model_boundary_count(const pl_model* model) {
  return model ? model->compiled.system.boundary_inputs().size() : 0;
}

const char* pl_model_boundary_name(const pl_model* model, size_t i) {
  if (!model || i >= model->compiled.system.boundary_inputs().size()) return nullptr;
  return model->compiled.system.boundary_inputs()[i].id.c_str();
}

size_t pl_model_flow_count(const pl_model* model) { return model ? model->compiled.system.flows().size() : 0; }

const char* pl_model_flow_name(const pl_model* model, size_t i) {
  if (!model || i >= model->compiled.system.flows().size()) return nullptr;
  return model->compiled.system.flows()[i].id.c_str();
}

pl_status pl_model_infer(const pl_model* model, const char* const* names, const double* values, size_t count,
                         double* flows_out) {
  return guard([&] {
    require(model && flows_out && (count == 0 || (names && values)), "null argument");
    std::map<std::string, double> boundary;
    for (size_t i = 0; i < count; ++i) {
      require(names[i] != nullptr, "null input name");
      if (!std::isfinite(values[i]))
        throw perfloss::Error(perfloss::ErrorCode::kInvalidArgument, std::string("'") + names[i] + "' is not finite");
      if (!boundary.emplace(names[i], values[i]).second)
        throw perfloss::Error(perfloss::ErrorCode::kInvalidArgument, std::string("'") + names[i] + "' given twice");
    }
    const auto flows = perfloss::system_forward(model->compiled.system, boundary);
    std::copy(flows.values.begin(), flows.values.end(), flows_out);
  });
}

pl_status pl_model_synthesize(const pl_model* model, const char* flow, const uint64_t* seed, const char* out_path) {
  return guard([&] {
    require(model && flow && out_path, "null argument");
    const auto& ref = flow_ref(model, flow);
    std::optional<std::uint64_t> s;
    if (seed) s = *seed;
    for (const auto& d : perfloss::synthesize_all(model->compiled, s))
      if (d.flow == ref.id) perfloss::save_dataset(out_path, d.data);
  });
}

pl_status pl_model_set_dataset(pl_model* model, const char* flow, const char* path) {
  return guard([&] {
    require(model && flow && path, "null argument");
    const auto& ref = flow_ref(model, flow);
    auto data = perfloss::load_dataset(path);
    perfloss::check_dataset(model->compiled.system.nodes()[ref.node].outputs[ref.output].model, data);
    model->datasets[ref.id] = std::move(data);
  });
}

void pl_train_options_init(pl_train_options* o) {
  if (!o) return;
  o->mode = PL_TRAIN_FROM_FILE;
  o->epochs = -1;
  o->threshold = std::nan("");
  o->rate = std::nan("");
  o->has_seed = 0;
  o->seed = 0;
  o->synthesize = 0;
}

pl_status pl_model_train(pl_model* model, const pl_train_options* options, char** report) {
  return guard([&] {
    require(model && options, "null argument");
    if (report) *report = nullptr;
    auto config = model->compiled.training.config;
    if (options->mode == PL_TRAIN_LSE_ONLY) config.mode = perfloss::TrainingMode::kLseOnly;
    if (options->mode == PL_TRAIN_HYBRID) config.mode = perfloss::TrainingMode::kHybrid;
    if (options->epochs >= 0) config.epochs = options->epochs;
    if (std::isfinite(options->threshold) && options->threshold >= 0) config.rmse_threshold = options->threshold;
    if (std::isfinite(options->rate) && options->rate >= 0) config.learning_rate = options->rate;

    std::optional<std::uint64_t> seed;
    if (options->has_seed) seed = options->seed;
    std::vector<perfloss::NodeDataset> sets;
    std::vector<perfloss::NodeDataset> synthetic;
    if (options->synthesize) synthetic = perfloss::synthesize_all(model->compiled, seed);
    std::string missing;
    for (std::size_t k = 0; k < model->compiled.system.flows().size(); ++k) {
      const auto& f = model->compiled.system.flows()[k];
      if (auto it = model->datasets.find(f.id); it != model->datasets.end())
        sets.push_back({f.node, f.output, f.id, it->second});
      else if (options->synthesize)
        sets.push_back(synthetic[k]);
      else
        missing += (missing.empty() ? "" : ", ") + f.id;
    }
    if (!missing.empty())
      throw perfloss::Error(perfloss::ErrorCode::kEmptyDataset, "no dataset for: " + missing);

    const auto results = perfloss::train_all(model->compiled, sets, config);
    if (report) {
      std::ostringstream out;
      for (const auto& r : results) {
        out << r.flow << ": rmse " << perfloss::format_short(r.rmse) << ", epochs " << r.report.epochs_run
            << ", " << perfloss::to_string(r.report.stop_reason);
        if (!r.report.silent_rules.empty()) {
          out << ", rules never firing:";
          for (auto j : r.report.silent_rules) out << ' ' << j + 1;
        }
        out << '\n';
      }
      *report = dup(out.str());
    }
  });
}

pl_status pl_model_save(const pl_model* model, const char* path) {
  return guard([&] {
    require(model && path, "null argument");
    perfloss::save_model_file(path, model->doc, model->compiled.system);
  });
}

pl_status pl_model_simulate(const pl_model* model, const char* scenario_path, const char* out_path) {
  return guard([&] {
    require(model && scenario_path && out_path, "null argument");
    const auto scenario = perfloss::parse_scenario_file(scenario_path);
    const auto result = perfloss::run_scenario(model->compiled.system, scenario);
    std::ostringstream buf;
    perfloss::write_csv(buf, result);
    if (std::strcmp(out_path, "-") == 0) {
      std::fwrite(buf.str().data(), 1, buf.str().size(), stdout);
      return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw perfloss::Error(perfloss::ErrorCode::kIo, "cannot write '" + std::string(out_path) + "'");
    f << buf.str();
    if (!f) throw perfloss::Error(perfloss::ErrorCode::kIo, "failed writing '" + std::string(out_path) + "'");
  });
}

}  // extern "C"
