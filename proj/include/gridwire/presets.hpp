#pragma once

// Built-in feeder, registry, topologies and attack plans for the scenario
// presets, plus the one-time droop gain calibration.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridwire/config.hpp"
#include "gridwire/grid.hpp"

namespace gridwire::presets {

enum class Scenario { s1, s2, s3a, s3b, s3c, s4 };

std::optional<Scenario> parse_scenario(std::string_view name);
std::string_view to_string(Scenario scenario);

/// Frozen output of calibrate_droop_gain() on default_grid(). The sweep is
/// reproduced by the test suite and by `gridwire calibrate`.
inline constexpr double kDroopGain = 373.0924;
inline constexpr double kCalibrationTargetHz = 71.0;

/// Feeder with the default inverter, generator, capacitor, switch and load
/// data. Every switch starts closed.
grid::GridState default_grid(double droop_gain = kDroopGain);
/// Default feeder with the retuned cap83 and Gen3 values.
grid::GridState tuned_grid(double droop_gain = kDroopGain);
/// Opens every breaker switch (virtual relays keep their state).
void island_all(grid::GridState& state);

/// One registry entry per measurement and setpoint exposed by default_grid().
PointRegistry default_registry();

Topology star_topology();
Topology ring_topology();

struct ScenarioRun {
  std::string name;
  Topology topology;
  PointRegistry registry;
  grid::GridState grid;
  AttackPlan plan;
};

/// s4 yields two runs (ring variants of s2 and s3b); every other scenario one.
std::vector<ScenarioRun> preset(Scenario scenario, double duration_s = 300.0);

AttackPlan s1_plan(double duration_s);
AttackPlan s2_plan(double duration_s);
AttackPlan s3_plan(Scenario variant, double duration_s);

struct CalibrationResult {
  double gain = 0.0;
  double settled_hz = 0.0;
  int iterations = 0;
};

/// Islands MG3 at t = 0 by opening its three boundary switches and returns
/// its frequency after `horizon_s` of simulation.
double islanded_mg3_frequency(const grid::GridState& base, double gain, double horizon_s = 180.0,
                              double dt_s = 0.1);

/// Bisects the droop gain until the islanded MG3 frequency hits `target_hz`.
CalibrationResult calibrate_droop_gain(const grid::GridState& base, double target_hz = kCalibrationTargetHz,
                                       double lo = 10.0, double hi = 5000.0, double tol = 1e-6);

}  // namespace gridwire::presets
