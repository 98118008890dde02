#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "perfloss/compose.hpp"

namespace perfloss {

struct Keyframe {
  double time = 0.0;
  double value = 0.0;
};

/// Piecewise-linear exogenous evolution of one boundary input.
struct Trajectory {
  std::string target;
  std::vector<Keyframe> keyframes;
};

/// Half-open interval [start, end) during which trajectories are frozen.
struct PauseInterval {
  double start = 0.0;
  double end = 0.0;
};

/// Overhaul of a support: the process stops for `duration` seconds, then the
/// support's indicator restarts from its reset value.
struct MaintenanceEvent {
  double time = 0.0;
  double duration = 0.0;
  std::string support;
};

struct StepEvent {
  double time = 0.0;
  std::string target;
  double value = 0.0;
};

struct Scenario {
  std::string name;
  double horizon = 0.0;
  double timestep = 1.0;
  std::map<std::string, double> initial;
  std::vector<Trajectory> trajectories;
  std::vector<StepEvent> steps;
  std::vector<MaintenanceEvent> maintenance;
};

struct SimulationResult {
  /// time_s, boundary inputs, flows in evaluation order, process_stopped.
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<double> effective_time;

  std::size_t column(std::string_view name) const;
  std::vector<double> series(std::string_view name) const;
};

/// Wall time minus the part of every pause that lies before t.
double effective_time(double t, std::span<const PauseInterval> pauses);

/// Interpolates on effective time; holds the end values outside the keyframes.
double eval_trajectory(const Trajectory& trajectory, double t,
                       std::span<const PauseInterval> pauses = {});

/// Checks targets, keyframe order and event overlap. Throws on the first problem.
void validate_scenario(const SystemModel& system, const Scenario& scenario);

SimulationResult run_scenario(const SystemModel& system, const Scenario& scenario);

void write_csv(std::ostream& out, const SimulationResult& result);

/// Scenario text format. Throws ParseError naming the line.
Scenario parse_scenario(std::istream& in, const std::string& source = "<stream>");
Scenario parse_scenario_file(const std::string& path);

}  // namespace perfloss
