#include "perfloss/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "perfloss/error.hpp"
#include "text.hpp"

namespace perfloss {

std::size_t SimulationResult::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw Error(ErrorCode::kUnknownTarget, "no column '" + std::string(name) + "'");
}

std::vector<double> SimulationResult::series(std::string_view name) const {
  const auto c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

double effective_time(double t, std::span<const PauseInterval> pauses) {
  double paused = 0.0;
  for (const auto& p : pauses)
    if (t > p.start) paused += std::min(t, p.end) - p.start;
  return t - paused;
}

double eval_trajectory(const Trajectory& trajectory, double t, std::span<const PauseInterval> pauses) {
  const auto& k = trajectory.keyframes;
  if (k.empty()) throw Error(ErrorCode::kInvalidArgument, "trajectory '" + trajectory.target + "' is empty");
  const double te = effective_time(t, pauses);
  if (te <= k.front().time) return k.front().value;
  if (te >= k.back().time) return k.back().value;
  auto hi = std::upper_bound(k.begin(), k.end(), te,
                             [](double v, const Keyframe& f) { return v < f.time; });
  auto lo = hi - 1;
  const double u = (te - lo->time) / (hi->time - lo->time);
  return lo->value + u * (hi->value - lo->value);
}

namespace {

struct Resolved {
  std::vector<PauseInterval> pauses;
  // per boundary input
  std::vector<const Trajectory*> trajectory;
  std::vector<double> initial;
  std::vector<std::vector<const StepEvent*>> steps;
  std::vector<std::vector<const MaintenanceEvent*>> maintenance;
  std::vector<double> reset;
};

const SupportPort* find_support(const SystemModel& system, std::string_view id) {
  for (const auto& n : system.nodes())
    for (const auto& s : n.supports)
      if (s.id == id) return &s;
  return nullptr;
}

Resolved resolve(const SystemModel& system, const Scenario& sc) {
  if (!std::isfinite(sc.timestep) || sc.timestep <= 0.0)
    throw Error(ErrorCode::kValidation, "timestep must be positive");
  if (!std::isfinite(sc.horizon) || sc.horizon < 0.0)
    throw Error(ErrorCode::kValidation, "horizon must be non-negative");

  const auto& bnd = system.boundary_inputs();
  Resolved r;
  r.trajectory.assign(bnd.size(), nullptr);
  r.initial.assign(bnd.size(), std::nan(""));
  r.steps.resize(bnd.size());
  r.maintenance.resize(bnd.size());
  r.reset.assign(bnd.size(), 0.0);

  auto index = [&](const std::string& id, std::string_view what) {
    auto i = system.boundary_index(id);
    if (!i) throw Error(ErrorCode::kUnknownTarget, std::string(what) + " targets '" + id +
                                                       "', which is not a boundary input");
    return *i;
  };

  for (const auto& [id, v] : sc.initial) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kValidation, "initial value of '" + id + "' is not finite");
    r.initial[index(id, "initial value")] = v;
  }
  for (const auto& t : sc.trajectories) {
    const auto i = index(t.target, "trajectory");
    if (r.trajectory[i]) throw Error(ErrorCode::kValidation, "two trajectories for '" + t.target + "'");
    if (t.keyframes.empty()) throw Error(ErrorCode::kValidation, "trajectory '" + t.target + "' has no keyframes");
    for (std::size_t k = 0; k < t.keyframes.size(); ++k) {
      if (!std::isfinite(t.keyframes[k].time) || !std::isfinite(t.keyframes[k].value))
        throw Error(ErrorCode::kValidation, "trajectory '" + t.target + "' has a non-finite keyframe");
      if (k > 0 && !(t.keyframes[k].time > t.keyframes[k - 1].time))
        throw Error(ErrorCode::kValidation, "keyframe times of '" + t.target + "' must increase strictly");
    }
    r.trajectory[i] = &t;
  }
  for (const auto& s : sc.steps) {
    if (!std::isfinite(s.time) || !std::isfinite(s.value))
      throw Error(ErrorCode::kValidation, "step on '" + s.target + "' is not finite");
    r.steps[index(s.target, "step")].push_back(&s);
  }
  for (const auto& m : sc.maintenance) {
    const auto* sp = find_support(system, m.support);
    if (!sp) throw Error(ErrorCode::kUnknownTarget, "maintenance targets unknown support '" + m.support + "'");
    if (!std::isfinite(m.time) || !std::isfinite(m.duration) || m.duration < 0.0)
      throw Error(ErrorCode::kValidation, "maintenance of '" + m.support + "' needs a finite time and duration >= 0");
    const auto i = index(sp->indicator, "maintenance");
    r.maintenance[i].push_back(&m);
    r.reset[i] = sp->reset_value;
    if (m.duration > 0.0) r.pauses.push_back({m.time, m.time + m.duration});
  }
  std::vector<const MaintenanceEvent*> all;
  for (const auto& m : sc.maintenance) all.push_back(&m);
  std::sort(all.begin(), all.end(), [](auto* a, auto* b) { return a->time < b->time; });
  for (std::size_t k = 1; k < all.size(); ++k)
    if (all[k]->time < all[k - 1]->time + all[k - 1]->duration ||
        all[k]->time == all[k - 1]->time)
      throw Error(ErrorCode::kValidation, "maintenance of '" + all[k]->support + "' at " +
                                              format_short(all[k]->time) + " overlaps the previous stop");

  std::string missing;
  for (std::size_t i = 0; i < bnd.size(); ++i)
    if (std::isnan(r.initial[i]) && !r.trajectory[i]) missing += (missing.empty() ? "" : ", ") + bnd[i].id;
  if (!missing.empty()) throw Error(ErrorCode::kValidation, "no initial value for: " + missing);
  return r;
}

double base_value(const Resolved& r, std::size_t i, double t) {
  return r.trajectory[i] ? eval_trajectory(*r.trajectory[i], t, r.pauses) : r.initial[i];
}

double input_value(const Resolved& r, std::size_t i, double t) {
  const StepEvent* step = nullptr;
  for (const auto* s : r.steps[i])
    if (s->time <= t && (!step || s->time >= step->time)) step = s;
  const MaintenanceEvent* done = nullptr;
  for (const auto* m : r.maintenance[i])
    if (m->time + m->duration <= t && (!done || m->time > done->time)) done = m;
  if (done && (!step || step->time < done->time + done->duration))
    return r.reset[i] + base_value(r, i, t) - base_value(r, i, done->time);
  if (step) return step->value;
  return base_value(r, i, t);
}

}  // namespace

void validate_scenario(const SystemModel& system, const Scenario& scenario) { resolve(system, scenario); }

SimulationResult run_scenario(const SystemModel& system, const Scenario& scenario) {
  const Resolved r = resolve(system, scenario);
  const auto& bnd = system.boundary_inputs();

  SimulationResult out;
  out.columns.push_back("time_s");
  for (const auto& b : bnd) out.columns.push_back(b.id);
  for (const auto& f : system.flows()) out.columns.push_back(f.id);
  out.columns.push_back("process_stopped");

  const auto ticks = static_cast<std::size_t>(std::floor(scenario.horizon / scenario.timestep + 1e-9));
  std::vector<double> x(bnd.size());
  for (std::size_t k = 0; k <= ticks; ++k) {
    const double t = static_cast<double>(k) * scenario.timestep;
    for (std::size_t i = 0; i < bnd.size(); ++i) x[i] = input_value(r, i, t);
    FlowValues flows;
    try {
      flows = system_forward(system, x);
    } catch (const Error& e) {
      throw Error(e.code(), "tick " + std::to_string(k) + " (t=" + format_short(t) + "): " + e.message());
    }
    bool stopped = false;
    for (const auto& p : r.pauses) stopped = stopped || (t >= p.start && t < p.end);

    std::vector<double> row;
    row.reserve(out.columns.size());
    row.push_back(t);
    row.insert(row.end(), x.begin(), x.end());
    row.insert(row.end(), flows.values.begin(), flows.values.end());
    row.push_back(stopped ? 1.0 : 0.0);
    out.rows.push_back(std::move(row));
    out.effective_time.push_back(effective_time(t, r.pauses));
  }
  return out;
}

void write_csv(std::ostream& out, const SimulationResult& result) {
  for (std::size_t i = 0; i < result.columns.size(); ++i) out << (i ? "," : "") << result.columns[i];
  out << '\n';
  for (const auto& row : result.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_short(row[i]);
    out << '\n';
  }
}

}  // namespace perfloss
