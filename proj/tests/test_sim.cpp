#include <sstream>

#include "doctest.h"
#include "perfloss/error.hpp"
#include "perfloss/sim.hpp"
#include "test_util.hpp"

using namespace perfloss;
using testutil::error_code;

namespace {

const CompiledModel& telma() {
  static const CompiledModel m = testutil::trained_telma();
  return m;
}

Scenario nominal_scenario(double horizon = 100, double dt = 10) {
  Scenario s;
  s.name = "flat";
  s.horizon = horizon;
  s.timestep = dt;
  s.initial = {{"power", 100}, {"S", 0}, {"length_raise", 0}, {"Ra", 14}};
  return s;
}

Scenario parse(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in, "s.scn");
}

}  // namespace

TEST_CASE("trajectory interpolation") {
  const Trajectory t{"x", {{0, 0}, {10, 8.5}}};
  CHECK(eval_trajectory(t, 5) == doctest::Approx(4.25));
  const std::vector<PauseInterval> pause{{2, 4}};
  CHECK(eval_trajectory(t, 5, pause) == doctest::Approx(2.55));
  CHECK(eval_trajectory(t, 50) == 8.5);
  CHECK(eval_trajectory(t, -1) == 0.0);
  // frozen inside the pause
  CHECK(eval_trajectory(t, 3, pause) == eval_trajectory(t, 2));
}

TEST_CASE("effective time subtracts the elapsed part of each pause") {
  const std::vector<PauseInterval> p{{2, 4}, {10, 15}};
  CHECK(effective_time(1, p) == 1);
  CHECK(effective_time(3, p) == 2);
  CHECK(effective_time(4, p) == 2);
  CHECK(effective_time(12, p) == 8);
  CHECK(effective_time(20, p) == 13);
}

TEST_CASE("constant inputs give constant outputs") {
  const auto r = run_scenario(telma().system, nominal_scenario());
  REQUIRE(r.rows.size() == 11);
  CHECK(r.columns == std::vector<std::string>{"time_s", "power", "S", "length_raise", "Ra", "Wom", "Wob", "QStrip",
                                             "process_stopped"});
  for (std::size_t c = 1; c < r.columns.size(); ++c)
    for (const auto& row : r.rows) CHECK(row[c] == r.rows[0][c]);
}

TEST_CASE("runs are bit-identical") {
  const auto sc = parse_scenario_file(testutil::fixture("scenario1.scn"));
  const auto a = run_scenario(telma().system, sc);
  const auto b = run_scenario(telma().system, sc);
  CHECK(a.rows == b.rows);
  std::ostringstream ca, cb;
  write_csv(ca, a);
  write_csv(cb, b);
  CHECK(ca.str() == cb.str());
}

TEST_CASE("pause bookkeeping and overhaul reset") {
  const auto sc = parse_scenario_file(testutil::fixture("scenario1.scn"));
  const auto r = run_scenario(telma().system, sc);
  const auto t = r.series("time_s");
  const auto stopped = r.series("process_stopped");
  const auto len = r.series("length_raise");
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double paused = std::clamp(t[k] - 500.0, 0.0, 50.0);
    CHECK(r.effective_time[k] == doctest::Approx(t[k] - paused));
    CHECK(stopped[k] == ((t[k] >= 500 && t[k] < 550) ? 1.0 : 0.0));
  }
  CHECK(len[55] == 0.0);  // t = 550, just restarted
  CHECK(len.back() == doctest::Approx(8.0 * 450 / 1000));
  CHECK(r.series("Ra").back() == doctest::Approx(14 - 4.0 * 950 / 1000));
}

TEST_CASE("zero-tick horizon") {
  const auto r = run_scenario(telma().system, nominal_scenario(5, 10));
  CHECK(r.rows.size() == 1);
  std::ostringstream out;
  write_csv(out, r);
  const auto text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(text.rfind("time_s,power", 0) == 0);
}

TEST_CASE("steps override trajectories from their time on") {
  auto sc = nominal_scenario(100, 10);
  sc.steps.push_back({50, "S", 1});
  const auto r = run_scenario(telma().system, sc);
  const auto s = r.series("S");
  const auto q = r.series("QStrip");
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK(s[k] == (k >= 5 ? 1.0 : 0.0));
    if (k >= 5) CHECK(std::abs(q[k]) <= 2.0);
    else CHECK(q[k] == doctest::Approx(100).epsilon(0.02));
  }
}

TEST_CASE("a step after an overhaul wins over the reset") {
  auto sc = nominal_scenario(100, 10);
  sc.trajectories.push_back({"length_raise", {{0, 0}, {100, 10}}});
  sc.initial.erase("length_raise");
  sc.maintenance.push_back({20, 10, "belt"});
  sc.steps.push_back({60, "length_raise", 3});
  const auto r = run_scenario(telma().system, sc);
  const auto len = r.series("length_raise");
  CHECK(len[1] == doctest::Approx(1));
  CHECK(len[3] == 0.0);          // reset at t = 30
  CHECK(len[5] == doctest::Approx(2));
  CHECK(len[6] == 3.0);          // step at t = 60
  CHECK(len[10] == 3.0);
}

TEST_CASE("CSV layout") {
  const auto r = run_scenario(telma().system, nominal_scenario(20, 10));
  std::ostringstream out;
  write_csv(out, r);
  CHECK(out.str() ==
        "time_s,power,S,length_raise,Ra,Wom,Wob,QStrip,process_stopped\n"
        "0,100,0,0,14,100,100,100,0\n"
        "10,100,0,0,14,100,100,100,0\n"
        "20,100,0,0,14,100,100,100,0\n");
}

TEST_CASE("scenario validation") {
  const auto& sys = telma().system;
  auto sc = nominal_scenario();
  sc.timestep = 0;
  CHECK(error_code([&] { validate_scenario(sys, sc); }) == ErrorCode::kValidation);
  sc = nominal_scenario();
  sc.horizon = -1;
  CHECK(error_code([&] { validate_scenario(sys, sc); }) == ErrorCode::kValidation);
  sc = nominal_scenario();
  sc.initial["pressure"] = 1;
  CHECK(error_code([&] { validate_scenario(sys, sc); }) == ErrorCode::kUnknownTarget);
  sc = nominal_scenario();
  sc.initial.erase("Ra");
  CHECK(error_code([&] { validate_scenario(sys, sc); }) == ErrorCode::kValidation);
  sc = nominal_scenario();
  sc.trajectories.push_back({"Ra", {{0, 14}, {0, 12}}});
  CHECK(error_code([&] { validate_scenario(sys, sc); }) == ErrorCode::kValidation);
  sc = nominal_scenario();
  sc.maintenance = {{10, 20, "belt"}, {20, 5, "roller"}};
  CHECK(error_code([&] { validate_scenario(sys, sc); }) == ErrorCode::kValidation);
  sc = nominal_scenario();
  sc.maintenance = {{10, 20, "gearbox"}};
  CHECK(error_code([&] { validate_scenario(sys, sc); }) == ErrorCode::kUnknownTarget);
  sc = nominal_scenario();
  sc.steps = {{10, "Wom", 3}};
  CHECK(error_code([&] { validate_scenario(sys, sc); }) == ErrorCode::kUnknownTarget);
  CHECK_NOTHROW(validate_scenario(sys, nominal_scenario()));
}

TEST_CASE("scenario file parsing") {
  const auto sc = parse(
      "# comment\n"
      "scenario demo\n"
      "horizon 100\n"
      "timestep 5   # trailing comment\n"
      "initial power 100\n"
      "trajectory Ra\n"
      "  0 14\n"
      "  100 10\n"
      "end\n"
      "step 40 S 1\n"
      "maintenance 50 belt duration 10\n"
      "maintenance 80 roller\n");
  CHECK(sc.name == "demo");
  CHECK(sc.horizon == 100);
  CHECK(sc.timestep == 5);
  CHECK(sc.initial.at("power") == 100);
  REQUIRE(sc.trajectories.size() == 1);
  CHECK(sc.trajectories[0].keyframes.size() == 2);
  REQUIRE(sc.steps.size() == 1);
  CHECK(sc.steps[0].target == "S");
  REQUIRE(sc.maintenance.size() == 2);
  CHECK(sc.maintenance[0].duration == 10);
  CHECK(sc.maintenance[1].duration == 0);

  CHECK(error_code([] { parse("horizon 10\n"); }) == ErrorCode::kParseError);
  CHECK(testutil::error_text([] { parse("horizon 10\ntimestep 1\nfrobnicate 3\n"); }).find("s.scn:3:") !=
        std::string::npos);
  CHECK(error_code([] { parse("horizon ten\ntimestep 1\n"); }) == ErrorCode::kParseError);
  CHECK(error_code([] { parse("horizon 10\ntimestep 1\ntrajectory Ra\n0 1\n"); }) == ErrorCode::kParseError);
  CHECK(error_code([] { parse_scenario_file("/nonexistent.scn"); }) == ErrorCode::kIo);
}
