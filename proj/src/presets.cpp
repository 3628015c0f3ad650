#include "gridwire/presets.hpp"

#include <cmath>

#include <fmt/format.h>

namespace gridwire::presets {

namespace {

using grid::InverterKind;
using grid::SwitchKind;

constexpr double kGeneratorDroop = 0.05;  // 5% on 60 Hz

grid::Generator generator(std::string id, std::string mg, double rated, double p, double q) {
  return grid::Generator{std::move(id), std::move(mg), rated, p, q, kGeneratorDroop * 60.0 / rated};
}

grid::Inverter inverter(std::string id, std::string mg, InverterKind kind, double rated, double pref) {
  grid::Inverter inv;
  inv.id = std::move(id);
  inv.microgrid = std::move(mg);
  inv.kind = kind;
  inv.rated_w = rated;
  inv.pref_w = pref;
  return inv;
}

grid::Capacitor capacitor(std::string id, std::string phases, double per_phase) {
  grid::Capacitor cap{std::move(id), "mg3", phases, 2401.7771, {}};
  for (char ph : phases) {
    cap.size_var_per_phase[ph] = per_phase;
  }
  return cap;
}

AttackPlan base_plan(AttackScenario scenario, double duration_s) {
  AttackPlan plan;
  plan.scenario = scenario;
  plan.start_s = std::min(120.0, duration_s / 2.0);
  plan.end_s = duration_s;
  plan.attacker_count = 1;
  plan.attacker_node = "hub";
  plan.seed = 42;
  return plan;
}

}  // namespace

std::optional<Scenario> parse_scenario(std::string_view name) {
  for (Scenario s : {Scenario::s1, Scenario::s2, Scenario::s3a, Scenario::s3b, Scenario::s3c, Scenario::s4}) {
    if (to_string(s) == name) {
      return s;
    }
  }
  return std::nullopt;
}

std::string_view to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::s1: return "s1";
    case Scenario::s2: return "s2";
    case Scenario::s3a: return "s3a";
    case Scenario::s3b: return "s3b";
    case Scenario::s3c: return "s3c";
    case Scenario::s4: return "s4";
  }
  return "?";
}

grid::GridState default_grid(double droop_gain) {
  grid::GridState s;
  s.regions = {"grid", "mg1", "mg2", "mg3"};
  s.params.droop_gain = droop_gain;

  s.inverters = {
      inverter("inv51", "mg1", InverterKind::grid_forming, 400e3, 210e3),
      inverter("inv42", "mg1", InverterKind::grid_following, 600e3, 450e3),
      inverter("inv101", "mg2", InverterKind::grid_following, 180e3, 126e3),
      inverter("inv105", "mg2", InverterKind::grid_forming, 600e3, 300e3),
      inverter("inv76", "mg3", InverterKind::grid_following, 120e3, 84e3),
      inverter("inv80", "mg3", InverterKind::grid_forming, 100e3, 70e3),
  };
  s.generators = {
      generator("gen1", "mg1", 10e6, 30e3, 3000),
      generator("gen2", "mg1", 1e6, 25e3, 8333),
      generator("gen3", "mg3", 450e3, 50e3, 16667),
      generator("gen4", "mg2", 600e3, 50e3, 16667),
  };
  s.capacitors = {
      capacitor("cap83", "ABC", 200e3),
      capacitor("cap88", "A", 50e3),
      capacitor("cap90", "B", 50e3),
      capacitor("cap92", "C", 50e3),
  };
  s.switches = {
      {"sw60to160", "grid", "mg2", SwitchKind::breaker_switch, true, "mg2"},
      {"sw18to135", "grid", "mg1", SwitchKind::breaker_switch, true, "mg1"},
      {"sw97to197", "mg2", "mg3", SwitchKind::breaker_switch, true, "mg2"},
      {"sw54to94", "grid", "mg3", SwitchKind::breaker_switch, true, "mg3"},
      {"sw151to300", "mg1", "mg2", SwitchKind::breaker_switch, true, "mg1"},
      {"sw76to86", "mg3", "mg3", SwitchKind::virtual_relay, true, "mg3"},
  };
  // Each microgrid's local load matches its inverter and generator output,
  // except MG3 whose generator exports to the rest of the feeder.
  s.loads = {
      {"load42", "mg1", 450e3, 0.0, std::nullopt, false, "inv42"},
      {"load_mg1", "mg1", 265e3, 0.0, std::nullopt, false, std::nullopt},
      {"load_mg2", "mg2", 476e3, 0.0, std::nullopt, false, std::nullopt},
      {"load_mg3", "mg3", 107.8e3, 0.0, std::nullopt, true, std::nullopt},
      {"load86", "mg3", 46.2e3, 0.0, "sw76to86", true, std::nullopt},
  };
  grid::initialize(s);
  return s;
}

grid::GridState tuned_grid(double droop_gain) {
  grid::GridState s = default_grid(droop_gain);
  for (auto& cap : s.capacitors) {
    if (cap.id == "cap83") {
      for (auto& [phase, size] : cap.size_var_per_phase) size = 600e3;
    }
  }
  for (auto& gen : s.generators) {
    if (gen.id == "gen3") {
      gen = generator("gen3", "mg3", 300e3, 20e3, 16667);
    }
  }
  grid::initialize(s);
  return s;
}

void island_all(grid::GridState& state) {
  for (const auto& sw : state.switches) {
    if (sw.kind == SwitchKind::breaker_switch) {
      grid::apply_setpoint(state, PointKey{sw.id, "state"}, 0.0);
    }
  }
}

PointRegistry default_registry() {
  grid::GridState s = default_grid();
  std::vector<PointEntry> entries;
  auto analog = [&](const std::string& node, const std::string& point, const std::string& unit, bool writable) {
    double value = std::round(grid::read_point(s, PointKey{node, point}) * 1000.0) / 1000.0;
    entries.push_back(PointEntry{{node, point}, PointKind::analog, unit, value, writable});
  };
  for (const std::string mg : {"mg1", "mg2", "mg3"}) {
    for (const auto& inv : s.inverters) {
      if (inv.microgrid != mg) continue;
      analog(inv.id, "Pref", "W", true);
      analog(inv.id, "Qref", "VAr", true);
      analog(inv.id, "Pout", "W", false);
      analog(inv.id, "Qout", "VAr", false);
    }
    for (const auto& gen : s.generators) {
      if (gen.microgrid == mg) analog(gen.id, "Pout", "W", false);
    }
    for (const auto& load : s.loads) {
      if (load.microgrid == mg && load.feeder_inverter) analog(load.id, "current", "A", false);
    }
    analog(mg, "freq", "Hz", false);
    for (const auto& sw : s.switches) {
      if (sw.owner == mg) {
        entries.push_back(PointEntry{{sw.id, "state"}, PointKind::binary, "", sw.closed ? 1.0 : 0.0, true});
      }
    }
  }
  return PointRegistry(std::move(entries));
}

Topology star_topology() { return default_star_topology(); }

Topology ring_topology() {
  Topology t;
  t.nodes = {
      {"cc", NodeKind::control_center}, {"r1", NodeKind::router},       {"r2", NodeKind::router},
      {"r3", NodeKind::router},         {"r4", NodeKind::router},       {"sub1", NodeKind::substation},
      {"sub2", NodeKind::substation},   {"sub3", NodeKind::substation},
  };
  t.links = {
      {"cc", "r1", LinkKind::p2p, 2.0, 0.0},   {"r1", "r2", LinkKind::csma, 1.0, 0.0},
      {"r2", "r3", LinkKind::csma, 1.0, 0.0},  {"r3", "r4", LinkKind::csma, 1.0, 0.0},
      {"r4", "r1", LinkKind::csma, 1.0, 0.0},  {"sub1", "r2", LinkKind::p2p, 2.0, 0.0},
      {"sub2", "r3", LinkKind::p2p, 2.0, 0.0}, {"sub3", "r4", LinkKind::p2p, 2.0, 0.0},
  };
  validate(t);
  return t;
}

AttackPlan s1_plan(double duration_s) {
  AttackPlan plan = base_plan(AttackScenario::data_modification, duration_s);
  plan.victim = "cc";
  plan.edits = {{{"inv42", "Qref"}, -50e3}};
  return plan;
}

AttackPlan s2_plan(double duration_s) {
  AttackPlan plan = base_plan(AttackScenario::setpoint_modification, duration_s);
  plan.victim = "sub1";
  plan.edits = {{{"inv42", "Pref"}, 350e3}, {{"inv51", "Pref"}, 110e3}};
  plan.toggle = true;
  return plan;
}

AttackPlan s3_plan(Scenario variant, double duration_s) {
  AttackPlan plan = base_plan(AttackScenario::command_injection, duration_s);
  plan.victim = "sub3";
  plan.edits = {{{"sw60to160", "state"}, 0.0}, {{"sw54to94", "state"}, 0.0}, {{"sw97to197", "state"}, 0.0}};
  if (variant == Scenario::s3c) {
    plan.edits.push_back({{"sw76to86", "state"}, 0.0});
  }
  return plan;
}

std::vector<ScenarioRun> preset(Scenario scenario, double duration_s) {
  PointRegistry registry = default_registry();
  switch (scenario) {
    case Scenario::s1:
      return {{"s1", star_topology(), registry, default_grid(), s1_plan(duration_s)}};
    case Scenario::s2: {
      grid::GridState g = default_grid();
      island_all(g);
      return {{"s2", star_topology(), registry, g, s2_plan(duration_s)}};
    }
    case Scenario::s3a:
      return {{"s3a", star_topology(), registry, default_grid(), s3_plan(scenario, duration_s)}};
    case Scenario::s3b:
    case Scenario::s3c:
      return {{std::string(to_string(scenario)), star_topology(), registry, tuned_grid(),
               s3_plan(scenario, duration_s)}};
    case Scenario::s4: {
      auto runs = preset(Scenario::s2, duration_s);
      auto s3b = preset(Scenario::s3b, duration_s);
      runs.push_back(std::move(s3b.front()));
      runs[0].plan.attacker_node = "r2";
      runs[1].plan.attacker_node = "r4";
      for (auto& run : runs) {
        run.topology = ring_topology();
      }
      return runs;
    }
  }
  throw ConfigError(fmt::format("unknown scenario"));
}

}  // namespace gridwire::presets
