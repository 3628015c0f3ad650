#pragma once

// Lumped quasi-steady-state model of a feeder split into regions (the
// upstream grid plus microgrids) joined by boundary switches. Each island
// of regions carries one frequency driven by its power imbalance.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gridwire/config.hpp"

namespace gridwire::grid {

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kGridRegion = "grid";

enum class InverterKind { grid_following, grid_forming };

struct Inverter {
  std::string id;
  std::string microgrid;
  InverterKind kind = InverterKind::grid_following;
  double rated_w = 0.0;
  double pref_w = 0.0;
  double qref_var = 0.0;
  double p_out_w = 0.0;
  double q_out_var = 0.0;
  int recovery_steps = 5;
  /// Pre-disturbance operating point a grid-forming unit returns to.
  double dispatch_w = 0.0;
  double qref0_var = 0.0;
  /// Setpoint the output last reacted to.
  double applied_pref_w = 0.0;

  bool operator==(const Inverter&) const = default;
};

struct Generator {
  std::string id;
  std::string microgrid;
  double rated_w = 0.0;
  double p_delivered_w = 0.0;
  double q_delivered_var = 0.0;
  double droop_hz_per_w = 0.0;

  bool operator==(const Generator&) const = default;
};

struct Capacitor {
  std::string id;
  std::string microgrid;
  std::string phases;
  double nominal_v = 0.0;
  std::map<char, double> size_var_per_phase;

  double total_var() const;
  bool operator==(const Capacitor&) const = default;
};

enum class SwitchKind { breaker_switch, virtual_relay };

struct SwitchRelay {
  std::string id;
  std::string a;
  std::string b;
  SwitchKind kind = SwitchKind::breaker_switch;
  bool closed = true;
  /// Microgrid whose substation reports this switch.
  std::string owner;

  bool operator==(const SwitchRelay&) const = default;
};

struct Load {
  std::string id;
  std::string microgrid;
  double demand_w = 0.0;
  double shed_fraction = 0.0;
  std::optional<std::string> attached_relay;
  bool ufls = false;
  /// Inverter whose terminal voltage the current proxy follows.
  std::optional<std::string> feeder_inverter;

  double effective_w() const { return demand_w * (1.0 - shed_fraction); }
  bool operator==(const Load&) const = default;
};

struct IslandState {
  std::vector<std::string> members;
  double freq_hz = 60.0;
  double p_gen_w = 0.0;
  double p_load_w = 0.0;
  double q_support_var = 0.0;

  bool operator==(const IslandState&) const = default;
};

struct GridParams {
  double nominal_freq_hz = 60.0;
  double droop_gain = 1.0;
  double tau_f_s = 5.0;
  double f_shed_hz = 59.0;
  double shed_step = 0.05;
  /// Reactive support that doubles the deviation divisor.
  double q_reference_var = 500e3;
  /// Integral restoration time constant of the generators' secondary control.
  double secondary_time_s = 60.0;
  /// Secondary control is locked out when |f - nominal| exceeds this band.
  double governor_band_hz = 5.0;
  double nominal_v = 2401.7771;
  double ripple_period_s = 2.9;
  double ripple_ratio = 0.005;
  double ripple_attack_gain = 4.0;
  /// Per-unit voltage change per unit of qref/rated on the feeding inverter.
  double q_voltage_sensitivity = 0.01;

  bool operator==(const GridParams&) const = default;
};

struct GridState {
  std::vector<std::string> regions;
  std::vector<Inverter> inverters;
  std::vector<Generator> generators;
  std::vector<Capacitor> capacitors;
  std::vector<SwitchRelay> switches;
  std::vector<Load> loads;
  std::vector<IslandState> islands;
  double time_s = 0.0;
  GridParams params;

  const Inverter* inverter(std::string_view id) const;
  const Generator* generator(std::string_view id) const;
  const SwitchRelay* relay(std::string_view id) const;
  const Load* load(std::string_view id) const;
  const IslandState& island_of(std::string_view region) const;
  /// Microgrid (or region) a device or region id belongs to, if any.
  std::optional<std::string> owner_of(std::string_view node_id) const;

  bool operator==(const GridState&) const = default;
};

/// Connected components of the region graph over closed breaker switches.
/// Members are sorted and components ordered by their first member.
std::vector<std::vector<std::string>> compute_islands(const std::vector<std::string>& regions,
                                                      const std::vector<SwitchRelay>& switches);

/// Validates the device set and builds the initial island list.
void initialize(GridState& state);

GridState step(const GridState& state, double dt_s);
void step_in_place(GridState& state, double dt_s);

void apply_setpoint(GridState& state, const PointKey& key, double value);

double read_point(const GridState& state, const PointKey& key);
std::map<PointKey, double> read_points(const GridState& state, const PointRegistry& registry);
double load_current(const GridState& state, std::string_view load_id);

/// Frequency an island relaxes toward given its present balance.
double target_frequency(const GridState& state, const IslandState& island);

}  // namespace gridwire::grid
