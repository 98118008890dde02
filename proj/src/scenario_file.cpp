#include <fstream>
#include <istream>

#include "perfloss/error.hpp"
#include "perfloss/sim.hpp"
#include "text.hpp"

namespace perfloss {

Scenario parse_scenario(std::istream& in, const std::string& source) {
  Scenario sc;
  bool horizon = false, timestep = false;
  Trajectory* open = nullptr;
  std::size_t open_line = 0;
  std::string raw;
  std::size_t line = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorCode::kParseError, source + ":" + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    auto words = tokenize(raw);
    if (!words) fail("unterminated quote");
    const auto& w = *words;
    if (w.empty()) continue;
    auto num = [&](std::size_t i) {
      if (i >= w.size()) fail("'" + w[0] + "' is missing a number");
      auto v = parse_number(w[i]);
      if (!v) fail("'" + w[i] + "' is not a finite number");
      return *v;
    };
    if (open) {
      if (w[0] == "end" && w.size() == 1) {
        open = nullptr;
        continue;
      }
      if (w.size() != 2) fail("expected: <time> <value> or end");
      open->keyframes.push_back({num(0), num(1)});
      continue;
    }
    const auto& k = w[0];
    if (k == "scenario" && w.size() == 2) {
      sc.name = w[1];
    } else if (k == "horizon" && w.size() == 2) {
      sc.horizon = num(1);
      horizon = true;
    } else if (k == "timestep" && w.size() == 2) {
      sc.timestep = num(1);
      timestep = true;
    } else if (k == "initial" && w.size() == 3) {
      if (!sc.initial.emplace(w[1], num(2)).second) fail("initial value of '" + w[1] + "' given twice");
    } else if (k == "trajectory" && w.size() == 2) {
      sc.trajectories.push_back({w[1], {}});
      open = &sc.trajectories.back();
      open_line = line;
    } else if (k == "step" && w.size() == 4) {
      sc.steps.push_back({num(1), w[2], num(3)});
    } else if (k == "maintenance" && (w.size() == 3 || (w.size() == 5 && w[3] == "duration"))) {
      sc.maintenance.push_back({num(1), w.size() == 5 ? num(4) : 0.0, w[2]});
    } else {
      fail("unrecognised line; expected scenario, horizon, timestep, initial, trajectory, step or maintenance");
    }
  }
  if (open) {
    line = open_line;
    fail("trajectory is never closed with 'end'");
  }
  if (!horizon || !timestep) throw Error(ErrorCode::kParseError, source + ": 'horizon' and 'timestep' are required");
  return sc;
}

Scenario parse_scenario_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return parse_scenario(f, path);
}

}  // namespace perfloss
