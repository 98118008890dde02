#include <random>

#include "doctest.h"
#include "perfloss/compose.hpp"
#include "perfloss/error.hpp"
#include "test_util.hpp"

using namespace perfloss;
using testutil::error_code;

namespace {

const CompiledModel& telma() {
  static const CompiledModel m = testutil::trained_telma();
  return m;
}

std::vector<std::string> ids(const std::vector<BoundaryInput>& b) {
  std::vector<std::string> out;
  for (const auto& x : b) out.push_back(x.id);
  return out;
}

// Copy of a single-output node with its support and output renamed apart.
ProcessNode renamed(const ProcessNode& n, const std::string& id) {
  auto copy = n;
  copy.id = id;
  for (auto& s : copy.supports) {
    s.id += "_" + id;
    s.indicator += "_" + id;
  }
  auto& out = copy.outputs.at(0);
  out.port.name = id + "_out";
  auto inputs = out.model.inputs();
  for (std::size_t k = copy.inputs.size(); k < inputs.size(); ++k) inputs[k].name += "_" + id;
  out.model = AnfisModel(inputs, out.model.output(), out.model.rules());
  return copy;
}

}  // namespace

TEST_CASE("TELMA chain boundaries") {
  const auto& sys = telma().system;
  CHECK(ids(sys.boundary_inputs()) == std::vector<std::string>{"power", "S", "length_raise", "Ra"});
  CHECK(sys.boundary_outputs() == std::vector<std::string>{"QStrip"});
  REQUIRE(sys.flows().size() == 3);
  CHECK(sys.flows()[0].id == "Wom");
  CHECK(sys.flows()[1].id == "Wob");
  CHECK(sys.flows()[2].id == "QStrip");
  CHECK(sys.order() == std::vector<std::size_t>{0, 1, 2});
  CHECK(sys.source_of(1, 0) == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK_FALSE(sys.source_of(0, 0).has_value());
}

TEST_CASE("single node without edges") {
  const auto& belt = telma().system.nodes()[1];
  const auto sys = compose({belt}, {});
  CHECK(ids(sys.boundary_inputs()) == std::vector<std::string>{"Wom", "length_raise"});
  CHECK(sys.boundary_outputs() == std::vector<std::string>{"Wob"});
}

TEST_CASE("cycles are rejected") {
  const auto& belt = telma().system.nodes()[1];
  const auto a = renamed(belt, "a"), b = renamed(belt, "b");
  CHECK(error_code([&] { compose({a, b}, {{"a", "a_out", "b", "Wom"}, {"b", "b_out", "a", "Wom"}}); }) ==
        ErrorCode::kCycleDetected);
  CHECK(error_code([&] { compose({a}, {{"a", "a_out", "a", "Wom"}}); }) == ErrorCode::kCycleDetected);
}

TEST_CASE("bad edges") {
  const auto& n = telma().system.nodes();
  CHECK(error_code([&] { compose({n[0], n[1]}, {{"motor", "Wom", "pump", "Wom"}}); }) == ErrorCode::kDanglingEdge);
  CHECK(error_code([&] { compose({n[0], n[1]}, {{"motor", "Wom", "belt", "nope"}}); }) == ErrorCode::kDanglingEdge);
  // strip flow into an angular velocity port
  CHECK(error_code([&] { compose({n[1], n[2]}, {{"roller", "QStrip", "belt", "Wom"}}); }) == ErrorCode::kPortMismatch);
  const auto other = renamed(n[0], "motor2");
  CHECK(error_code([&] {
          compose({n[0], other, n[1]}, {{"motor", "Wom", "belt", "Wom"}, {"motor2", "motor2_out", "belt", "Wom"}});
        }) == ErrorCode::kInvalidArgument);
  CHECK(error_code([&] { compose({n[0], n[0]}, {}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("declaration order does not change evaluation order semantics") {
  const auto& n = telma().system.nodes();
  const auto sys = compose({n[2], n[1], n[0]}, {{"motor", "Wom", "belt", "Wom"}, {"belt", "Wob", "roller", "Wob"}});
  CHECK(sys.flows()[0].id == "Wom");
  CHECK(sys.flows()[2].id == "QStrip");
  const std::map<std::string, double> at{{"power", 80}, {"S", 0}, {"length_raise", 2}, {"Ra", 9}};
  CHECK(system_forward(sys, at).at("QStrip") == system_forward(telma().system, at).at("QStrip"));
}

TEST_CASE("system forward equals node by node evaluation") {
  const auto& sys = telma().system;
  const auto& n = sys.nodes();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> p(0, 200), s(0, 1), len(0, 12), ra(0, 16);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> b{p(rng), s(rng), len(rng), ra(rng)};
    const auto flows = system_forward(sys, b);
    const double wom = evaluate(n[0].outputs[0].model, std::vector<double>{b[0], b[1]});
    const double wob = evaluate(n[1].outputs[0].model, std::vector<double>{wom, b[2]});
    const double q = evaluate(n[2].outputs[0].model, std::vector<double>{wob, b[3]});
    CHECK(flows.at("Wom") == wom);
    CHECK(flows.at("Wob") == wob);
    CHECK(flows.at("QStrip") == q);
    CHECK(system_forward(sys, b).values == flows.values);
  }
}

TEST_CASE("cutting an edge and feeding the recorded value reproduces downstream flows") {
  const auto& sys = telma().system;
  const auto& n = sys.nodes();
  const auto tail = compose({n[1], n[2]}, {{"belt", "Wob", "roller", "Wob"}});
  REQUIRE(ids(tail.boundary_inputs()) == std::vector<std::string>{"Wom", "length_raise", "Ra"});
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> p(0, 200), s(0, 1), len(0, 12), ra(0, 16);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> b{p(rng), s(rng), len(rng), ra(rng)};
    const auto full = system_forward(sys, b);
    const auto cut = system_forward(tail, std::vector<double>{full.at("Wom"), b[2], b[3]});
    CHECK(cut.at("Wob") == full.at("Wob"));
    CHECK(cut.at("QStrip") == full.at("QStrip"));
  }
}

TEST_CASE("named boundary values") {
  const auto& sys = telma().system;
  CHECK(error_code([&] { system_forward(sys, std::map<std::string, double>{{"power", 100}}); }) ==
        ErrorCode::kInvalidArgument);
  const auto msg = testutil::error_text([&] { system_forward(sys, std::map<std::string, double>{{"power", 100}}); });
  CHECK(msg.find("S, length_raise, Ra") != std::string::npos);
  CHECK(error_code([&] {
          system_forward(sys, std::map<std::string, double>{{"power", 100}, {"S", 0}, {"length_raise", 0}, {"Ra", 14}, {"x", 1}});
        }) == ErrorCode::kUnknownTarget);
  CHECK(error_code([&] { system_forward(sys, std::vector<double>{1, 2}); }) == ErrorCode::kArityMismatch);
}

TEST_CASE("trained TELMA operating points") {
  const auto& sys = telma().system;
  auto at = [&](double power, double s, double len, double ra) {
    return system_forward(sys, std::map<std::string, double>{{"power", power}, {"S", s}, {"length_raise", len}, {"Ra", ra}});
  };
  const auto nominal = at(100, 0, 0, 14);
  for (const char* f : {"Wom", "Wob", "QStrip"}) CHECK(nominal.at(f) == doctest::Approx(100).epsilon(0.02));
  const auto failed = at(100, 1, 0, 14);
  for (const char* f : {"Wom", "Wob", "QStrip"}) CHECK(std::abs(failed.at(f)) <= 2.0);

  const auto& belt = sys.nodes()[1].outputs[0].model;
  CHECK(evaluate(belt, std::vector<double>{100, 0.25}) == doctest::Approx(100).epsilon(0.02));
  // NO input vanishes the output while the belt is healthy or slipping
  CHECK(std::abs(evaluate(belt, std::vector<double>{0, 0.25})) <= 2.0);
  CHECK(std::abs(evaluate(belt, std::vector<double>{0, 10})) <= 2.0);
  // at the lengthening peak the LESS and NO rules tie, giving (b_NO + b_LESS) / 2
  CHECK(evaluate(belt, std::vector<double>{0, 4.5}) == doctest::Approx(25).epsilon(0.02));
}
