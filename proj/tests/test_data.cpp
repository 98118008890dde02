#include <cmath>
#include <sstream>

#include "doctest.h"
#include "perfloss/anfis.hpp"
#include "perfloss/data.hpp"
#include "perfloss/error.hpp"
#include "test_util.hpp"

using namespace perfloss;
using testutil::error_code;

namespace {

const CompiledModel& telma() {
  static const CompiledModel m = testutil::load_fixture("telma.model");
  return m;
}

const ProcessNode& node(std::size_t i) { return telma().system.nodes()[i]; }

double oracle(std::size_t n, double a, double b) { return oracle_target(node(n), std::vector<double>{a, b}); }

}  // namespace

TEST_CASE("oracle corners") {
  CHECK(oracle(1, 100, 0.25) == 100.0);
  CHECK(oracle(1, 100, 4.5) == 50.0);
  for (double len : {0.0, 2.0, 4.5, 7.0, 12.0}) CHECK(oracle(1, 0, len) == 0.0);
  CHECK(oracle(1, 100, 9) == 0.0);
  CHECK(oracle(2, 100, 14) == 100.0);
  CHECK(oracle(2, 100, 2) == 0.0);
  CHECK(oracle(2, 100, 7.85) == 50.0);
  CHECK(oracle(0, 100, 0) == 100.0);
  CHECK(oracle(0, 100, 1) == 0.0);
  // half way up the lengthening ramp: 100 * 0.5 + 50 * 0.5
  CHECK(oracle(1, 100, 2.5) == doctest::Approx(75.0));
  CHECK(oracle(1, 60, 2.5) == 60.0);
}

TEST_CASE("MORE passes through only under a healthy support") {
  CHECK(oracle(1, 150, 0) == 150.0);
  CHECK(oracle(1, 200, 0.5) == 200.0);
  // lengthening caps the excess as it caps the nominal flow
  CHECK(oracle(1, 150, 4.5) == 50.0);
  CHECK(oracle(1, 150, 2.5) == doctest::Approx(75.0 + 0.5 * 50.0));
  CHECK(oracle(0, 150, 1) == 0.0);
}

TEST_CASE("oracle arity") {
  CHECK(error_code([] { oracle_target(node(1), std::vector<double>{1}); }) == ErrorCode::kArityMismatch);
}

TEST_CASE("oracle is monotone along every axis") {
  const int n = 81;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& nd = node(k);
    const auto& flow = nd.inputs[0].partition;
    const auto& sp = nd.supports[0];
    const int dir = sp.severity_direction();
    for (int i = 0; i < n; ++i) {
      const double x = flow.lo() + flow.width() * i / (n - 1);
      double prev = NAN;
      for (int j = 0; j < n; ++j) {
        // walk the indicator from healthy to failed
        const double t = static_cast<double>(j) / (n - 1);
        const double d = dir > 0 ? sp.partition.lo() + t * sp.partition.width() : sp.partition.hi() - t * sp.partition.width();
        const double y = oracle_target(nd, std::vector<double>{x, d});
        if (j) CHECK(y <= prev);
        prev = y;
      }
    }
    for (int j = 0; j < n; ++j) {
      const double d = sp.partition.lo() + sp.partition.width() * j / (n - 1);
      double prev = NAN;
      for (int i = 0; i < n; ++i) {
        const double x = flow.lo() + flow.width() * i / (n - 1);
        const double y = oracle_target(nd, std::vector<double>{x, d});
        if (i) CHECK(y >= prev);
        prev = y;
      }
    }
  }
}

TEST_CASE("severity direction") {
  CHECK(node(0).supports[0].severity_direction() == 1);
  CHECK(node(1).supports[0].severity_direction() == 1);
  CHECK(node(2).supports[0].severity_direction() == -1);
}

TEST_CASE("axis levels") {
  const auto& p = node(1).supports[0].partition;
  CHECK(axis_levels(AxisPlan{}, p).size() == 11);
  CHECK(axis_levels(AxisPlan{}, p).front() == 0.0);
  CHECK(axis_levels(AxisPlan{}, p).back() == 12.0);
  CHECK(axis_levels(AxisPlan{3, 2.0, 4.0, {}}, p) == std::vector<double>{2, 3, 4});
  CHECK(axis_levels(AxisPlan{1, {}, {}, {}}, p) == std::vector<double>{0});
  CHECK(axis_levels(AxisPlan{5, {}, {}, {3, 1, 3}}, p) == std::vector<double>{1, 3});
  CHECK(error_code([&] { axis_levels(AxisPlan{0, {}, {}, {}}, p); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("factorial grid of the belt") {
  SamplingPlan plan;
  plan.design = SamplingDesign::kFactorial;
  plan.grid = 11;
  const auto d = synthesize(node(1), 0, plan);
  CHECK(d.size() == 121);
  CHECK(d.columns == std::vector<std::string>{"Wom", "length_raise", "Wob"});
  int corners = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.inputs[i][0] == 0) {
      CHECK(d.targets[i] == 0.0);
      ++corners;
    }
    if (d.inputs[i][0] == 100 && d.inputs[i][1] == 0) CHECK(d.targets[i] == 100.0);
    CHECK(d.targets[i] == oracle_target(node(1), d.inputs[i]));
  }
  CHECK(corners == 11);
  // last axis runs fastest
  CHECK(d.inputs[1] == std::vector<double>{0, 1.2});
}

TEST_CASE("sweep starts at the nominal point") {
  SamplingPlan plan;
  plan.design = SamplingDesign::kSweep;
  const auto d = synthesize(node(1), 0, plan);
  CHECK(d.inputs.front() == nominal_point(node(1)));
  CHECK(d.targets.front() == 100.0);
  CHECK(d.size() == 21);
  for (const auto& x : d.inputs) CHECK((x[0] == 100 || x[1] == 0));
}

TEST_CASE("random design is a pure function of the seed") {
  SamplingPlan plan;
  plan.design = SamplingDesign::kRandom;
  plan.samples = 300;
  plan.seed = 42;
  const auto a = synthesize(node(2), 0, plan);
  const auto b = synthesize(node(2), 0, plan);
  CHECK(a == b);
  CHECK(a.size() == 300);
  plan.seed = 43;
  CHECK_FALSE(synthesize(node(2), 0, plan) == a);
  for (const auto& x : a.inputs) {
    CHECK(x[0] >= 0);
    CHECK(x[0] <= 200);
    CHECK(x[1] >= 0);
    CHECK(x[1] <= 16);
  }
}

TEST_CASE("explicit levels restrict random draws") {
  const auto& motor = node(0);
  SamplingPlan plan;
  plan.design = SamplingDesign::kRandom;
  plan.samples = 200;
  plan.axes = {AxisPlan{}, AxisPlan{11, {}, {}, {0, 1}}};
  const auto d = synthesize(motor, 0, plan);
  for (const auto& x : d.inputs) CHECK((x[1] == 0 || x[1] == 1));
}

TEST_CASE("noise stays within the statistical bound") {
  SamplingPlan plan;
  plan.design = SamplingDesign::kRandom;
  plan.samples = 2000;
  plan.seed = 9;
  plan.noise = 0.5;
  const auto noisy = synthesize(node(1), 0, plan);
  CHECK(noisy == synthesize(node(1), 0, plan));
  double sum = 0, sq = 0;
  int outside = 0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const double e = noisy.targets[i] - oracle_target(node(1), noisy.inputs[i]);
    sum += e;
    sq += e * e;
    if (std::abs(e) > 3 * plan.noise) ++outside;
  }
  const double n = static_cast<double>(noisy.size());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(sd == doctest::Approx(0.5).epsilon(0.1));
  // about 0.27 % expected beyond 3 sigma
  CHECK(outside <= static_cast<int>(0.01 * n));
  CHECK(outside < 15);
}

TEST_CASE("CSV round trip is exact") {
  SamplingPlan plan;
  plan.design = SamplingDesign::kRandom;
  plan.samples = 50;
  plan.noise = 0.3;
  const auto d = synthesize(node(2), 0, plan);
  std::stringstream buf;
  save_dataset(buf, d);
  CHECK(load_dataset(buf) == d);
}

TEST_CASE("dataset parsing errors name the line") {
  std::istringstream bad("Wom,length_raise,Wob\n1,2,3\n\n# note\n1,x,3\n");
  CHECK(error_code([&] { load_dataset(bad, "d.csv"); }) == ErrorCode::kParseError);
  std::istringstream bad2("Wom,length_raise,Wob\n1,2,3\n1,x,3\n");
  CHECK(testutil::error_text([&] { load_dataset(bad2, "d.csv"); }).find("d.csv:3:") != std::string::npos);
  std::istringstream short_row("a,b,y\n1,2\n");
  CHECK(error_code([&] { load_dataset(short_row); }) == ErrorCode::kArityMismatch);
  std::istringstream inf_row("a,b,y\n1,inf,2\n");
  CHECK(error_code([&] { load_dataset(inf_row); }) == ErrorCode::kParseError);
  CHECK(error_code([] { load_dataset(std::string("/nonexistent/file.csv")); }) == ErrorCode::kIo);
}

TEST_CASE("header-only file loads empty and fails at training") {
  std::istringstream header("Wom,length_raise,Wob\n");
  const auto d = load_dataset(header);
  CHECK(d.size() == 0);
  CHECK(d.columns.size() == 3);
  const auto& model = node(1).outputs[0].model;
  CHECK(error_code([&] { train(model, d, TrainConfig{}); }) == ErrorCode::kEmptyDataset);
}

TEST_CASE("datasets are checked against model inputs") {
  const auto& model = node(1).outputs[0].model;
  SamplingPlan plan;
  auto d = synthesize(node(1), 0, plan);
  CHECK_NOTHROW(check_dataset(model, d));
  d.columns[1] = "Ra";
  CHECK(error_code([&] { check_dataset(model, d); }) == ErrorCode::kArityMismatch);
  CHECK(error_code([&] { check_dataset(model, synthesize(node(0), 0, plan)); }) == ErrorCode::kArityMismatch);
}

TEST_CASE("sampling design names") {
  for (auto d : {SamplingDesign::kFactorial, SamplingDesign::kSweep, SamplingDesign::kRandom})
    CHECK(parse_sampling_design(to_string(d)) == d);
  CHECK_FALSE(parse_sampling_design("latin").has_value());
}
