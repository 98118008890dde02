// Command-line front end. Talks to the library only through the C API.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "perfloss/perfloss.h"

namespace {

int exit_code(pl_status s) {
  if (s == PL_OK) return 0;
  return s == PL_ERR_INTERNAL ? 2 : 1;
}

int report_failure(pl_status s) {
  std::cerr << "error: " << pl_last_error() << '\n';
  return exit_code(s);
}

struct ModelHandle {
  pl_model* ptr = nullptr;
  ~ModelHandle() { pl_model_free(ptr); }
};

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { pl_string_free(ptr); }
};

pl_status load(const std::string& path, ModelHandle& m) { return pl_model_load(path.c_str(), &m.ptr); }

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int cmd_validate(const std::string& model) {
  OwnedString report;
  const auto s = pl_validate_file(model.c_str(), &report.ptr);
  if (report.ptr) std::cout << report.ptr;
  if (s == PL_OK) {
    std::cout << model << ": ok\n";
    return 0;
  }
  return report_failure(s);
}

int cmd_compile(const std::string& model, const std::string& out) {
  ModelHandle m;
  if (auto s = load(model, m)) return report_failure(s);
  OwnedString report;
  if (auto s = pl_model_rule_report(m.ptr, &report.ptr)) return report_failure(s);
  if (out.empty() || out == "-") {
    std::cout << report.ptr;
  } else {
    std::FILE* f = std::fopen(out.c_str(), "wb");
    if (!f) {
      std::cerr << "error: cannot write '" << out << "'\n";
      return 1;
    }
    std::fputs(report.ptr, f);
    std::fclose(f);
  }
  return 0;
}

int cmd_synth(const std::string& model, const std::string& out, const std::string& flow,
              const std::optional<std::uint64_t>& seed) {
  ModelHandle m;
  if (auto s = load(model, m)) return report_failure(s);
  const std::uint64_t* sp = seed ? &*seed : nullptr;
  if (!flow.empty()) {
    if (auto s = pl_model_synthesize(m.ptr, flow.c_str(), sp, out.c_str())) return report_failure(s);
    std::cout << flow << " -> " << out << '\n';
    return 0;
  }
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) {
    std::cerr << "error: cannot create directory '" << out << "': " << ec.message() << '\n';
    return 1;
  }
  for (std::size_t i = 0; i < pl_model_flow_count(m.ptr); ++i) {
    const std::string name = pl_model_flow_name(m.ptr, i);
    const auto path = (std::filesystem::path(out) / (name + ".csv")).string();
    if (auto s = pl_model_synthesize(m.ptr, name.c_str(), sp, path.c_str())) return report_failure(s);
    std::cout << name << " -> " << path << '\n';
  }
  return 0;
}

struct TrainArgs {
  std::string out;
  bool synth = false;
  std::vector<std::string> data;
  std::string mode;
  int epochs = -1;
  double threshold = std::nan("");
  double rate = std::nan("");
};

int cmd_train(const std::string& model, const TrainArgs& a, const std::optional<std::uint64_t>& seed) {
  ModelHandle m;
  if (auto s = load(model, m)) return report_failure(s);
  for (const auto& d : a.data) {
    const auto eq = d.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "error: --data expects <flow>=<path>, got '" << d << "'\n";
      return 1;
    }
    if (auto s = pl_model_set_dataset(m.ptr, d.substr(0, eq).c_str(), d.substr(eq + 1).c_str()))
      return report_failure(s);
  }
  pl_train_options o;
  pl_train_options_init(&o);
  if (a.mode == "lse_only") o.mode = PL_TRAIN_LSE_ONLY;
  if (a.mode == "hybrid") o.mode = PL_TRAIN_HYBRID;
  o.epochs = a.epochs;
  o.threshold = a.threshold;
  o.rate = a.rate;
  o.synthesize = a.synth ? 1 : 0;
  if (seed) {
    o.has_seed = 1;
    o.seed = *seed;
  }
  OwnedString report;
  if (auto s = pl_model_train(m.ptr, &o, &report.ptr)) return report_failure(s);
  std::cout << report.ptr;
  if (auto s = pl_model_save(m.ptr, a.out.c_str())) return report_failure(s);
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

int cmd_infer(const std::string& model, const std::vector<std::string>& sets) {
  ModelHandle m;
  if (auto s = load(model, m)) return report_failure(s);
  std::vector<std::string> names;
  std::vector<double> values;
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    char* end = nullptr;
    const std::string v = eq == std::string::npos ? "" : kv.substr(eq + 1);
    const double x = std::strtod(v.c_str(), &end);
    if (eq == std::string::npos || eq == 0 || v.empty() || *end != '\0') {
      std::cerr << "error: --set expects <name>=<number>, got '" << kv << "'\n";
      return 1;
    }
    names.push_back(kv.substr(0, eq));
    values.push_back(x);
  }
  std::vector<const char*> cnames;
  for (const auto& n : names) cnames.push_back(n.c_str());
  std::vector<double> flows(pl_model_flow_count(m.ptr));
  if (auto s = pl_model_infer(m.ptr, cnames.data(), values.data(), names.size(), flows.data()))
    return report_failure(s);
  for (std::size_t i = 0; i < flows.size(); ++i)
    std::cout << pl_model_flow_name(m.ptr, i) << " = " << fmt6(flows[i]) << '\n';
  return 0;
}

int cmd_simulate(const std::string& model, const std::string& scenario, const std::string& out) {
  ModelHandle m;
  if (auto s = load(model, m)) return report_failure(s);
  if (auto s = pl_model_simulate(m.ptr, scenario.c_str(), out.c_str())) return report_failure(s);
  if (out != "-") std::cout << "wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Performance-loss models from HAZOP knowledge: build, train, evaluate, simulate"};
  app.require_subcommand(1);

  std::string model, out, flow, scenario;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  TrainArgs train;

  auto* validate = app.add_subcommand("validate", "Check a model file and report every problem");
  validate->add_option("--model", model, "Model file")->required();

  auto* compile = app.add_subcommand("compile-rules", "Print causal relations and merged rules per output flow");
  compile->add_option("--model", model, "Model file")->required();
  compile->add_option("--out", out, "Write the report here instead of stdout");

  auto* synth = app.add_subcommand("synth-data", "Write synthetic training data");
  synth->add_option("--model", model, "Model file")->required();
  synth->add_option("--out", out, "Output directory, or file when --flow is given")->required();
  synth->add_option("--flow", flow, "Only this output flow");
  synth->add_option("--seed", seed, "Sampling and noise seed");

  auto* tr = app.add_subcommand("train", "Train every output model and write the trained model file");
  tr->add_option("--model", model, "Model file")->required();
  tr->add_option("--out", train.out, "Trained model file")->required();
  tr->add_flag("--synth", train.synth, "Synthesize data for flows without --data");
  tr->add_option("--data", train.data, "Dataset as <flow>=<csv path>")->take_all();
  tr->add_option("--mode", train.mode, "lse_only or hybrid")->check(CLI::IsMember({"lse_only", "hybrid"}));
  tr->add_option("--epochs", train.epochs, "Epoch budget")->check(CLI::NonNegativeNumber);
  tr->add_option("--threshold", train.threshold, "Stop when RMSE improves less than this")->check(CLI::NonNegativeNumber);
  tr->add_option("--rate", train.rate, "Premise step length, fraction of the domain width")->check(CLI::NonNegativeNumber);
  tr->add_option("--seed", seed, "Synthesis seed");

  auto* infer = app.add_subcommand("infer", "Evaluate the system at one operating point");
  infer->add_option("--model", model, "Model file")->required();
  infer->add_option("--set", sets, "Boundary input as <name>=<value>")->take_all();

  auto* sim = app.add_subcommand("simulate", "Run a scenario and write the CSV time series");
  sim->add_option("--model", model, "Model file")->required();
  sim->add_option("--scenario", scenario, "Scenario file")->required();
  sim->add_option("--out", out, "CSV path, or - for stdout")->required();
  sim->add_option("--seed", seed, "Accepted for uniformity; simulation is deterministic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*validate) return cmd_validate(model);
    if (*compile) return cmd_compile(model, out);
    if (*synth) return cmd_synth(model, out, flow, seed);
    if (*tr) return cmd_train(model, train, seed);
    if (*infer) return cmd_infer(model, sets);
    if (*sim) return cmd_simulate(model, scenario, out);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
