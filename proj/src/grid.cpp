#include "gridwire/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <fmt/format.h>

namespace gridwire::grid {

namespace {

template <typename T>
const T* find_by_id(const std::vector<T>& items, std::string_view id) {
  for (const auto& item : items) {
    if (item.id == id) {
      return &item;
    }
  }
  return nullptr;
}

template <typename T>
T* find_by_id(std::vector<T>& items, std::string_view id) {
  for (auto& item : items) {
    if (item.id == id) {
      return &item;
    }
  }
  return nullptr;
}

bool contains(const std::vector<std::string>& v, std::string_view s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

bool has_grid(const IslandState& island) { return contains(island.members, kGridRegion); }

struct Balance {
  double p_gen = 0.0;
  double p_load = 0.0;
  double q_support = 0.0;
  double rated = 0.0;
};

Balance balance_of(const GridState& s, const std::vector<std::string>& members) {
  Balance b;
  for (const auto& inv : s.inverters) {
    if (contains(members, inv.microgrid)) {
      b.p_gen += inv.p_out_w;
      b.rated += inv.rated_w;
    }
  }
  for (const auto& gen : s.generators) {
    if (contains(members, gen.microgrid)) {
      b.p_gen += gen.p_delivered_w;
      b.rated += gen.rated_w;
    }
  }
  for (const auto& load : s.loads) {
    if (contains(members, load.microgrid)) {
      b.p_load += load.effective_w();
    }
  }
  for (const auto& cap : s.capacitors) {
    if (contains(members, cap.microgrid)) {
      b.q_support += cap.total_var();
    }
  }
  return b;
}

void rebuild_islands(GridState& s) {
  auto parts = compute_islands(s.regions, s.switches);
  std::vector<IslandState> next;
  next.reserve(parts.size());
  for (auto& members : parts) {
    IslandState island;
    island.members = std::move(members);
    if (has_grid(island) || s.islands.empty()) {
      island.freq_hz = s.params.nominal_freq_hz;
    } else {
      island.freq_hz = s.island_of(island.members.front()).freq_hz;
    }
    next.push_back(std::move(island));
  }
  s.islands = std::move(next);
  for (auto& island : s.islands) {
    Balance b = balance_of(s, island.members);
    island.p_gen_w = b.p_gen;
    island.p_load_w = b.p_load;
    island.q_support_var = b.q_support;
  }
}

double support_factor(const GridParams& p, double q_support) { return 1.0 + q_support / p.q_reference_var; }

}  // namespace

double Capacitor::total_var() const {
  double total = 0.0;
  for (const auto& [phase, size] : size_var_per_phase) {
    total += size;
  }
  return total;
}

const Inverter* GridState::inverter(std::string_view id) const { return find_by_id(inverters, id); }
const Generator* GridState::generator(std::string_view id) const { return find_by_id(generators, id); }
const SwitchRelay* GridState::relay(std::string_view id) const { return find_by_id(switches, id); }
const Load* GridState::load(std::string_view id) const { return find_by_id(loads, id); }

const IslandState& GridState::island_of(std::string_view region) const {
  for (const auto& island : islands) {
    if (contains(island.members, region)) {
      return island;
    }
  }
  throw GridError(fmt::format("region '{}' is not part of any island", region));
}

std::optional<std::string> GridState::owner_of(std::string_view node_id) const {
  if (contains(regions, node_id)) {
    return std::string(node_id);
  }
  if (auto* inv = inverter(node_id)) return inv->microgrid;
  if (auto* gen = generator(node_id)) return gen->microgrid;
  if (auto* sw = relay(node_id)) return sw->owner;
  if (auto* l = load(node_id)) return l->microgrid;
  if (auto* cap = find_by_id(capacitors, node_id)) return cap->microgrid;
  return std::nullopt;
}

std::vector<std::vector<std::string>> compute_islands(const std::vector<std::string>& regions,
                                                      const std::vector<SwitchRelay>& switches) {
  std::vector<std::size_t> parent(regions.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  auto index = [&](const std::string& r) -> std::optional<std::size_t> {
    auto it = std::find(regions.begin(), regions.end(), r);
    if (it == regions.end()) return std::nullopt;
    return static_cast<std::size_t>(it - regions.begin());
  };
  auto root = [&](std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  for (const auto& sw : switches) {
    if (sw.kind != SwitchKind::breaker_switch || !sw.closed) {
      continue;
    }
    auto a = index(sw.a);
    auto b = index(sw.b);
    if (a && b) {
      auto ra = root(*a);
      auto rb = root(*b);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }
  std::map<std::size_t, std::vector<std::string>> groups;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    groups[root(i)].push_back(regions[i]);
  }
  std::vector<std::vector<std::string>> out;
  for (auto& [r, members] : groups) {
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void initialize(GridState& state) {
  std::set<std::string> ids;
  auto claim = [&](const std::string& id) {
    if (!ids.insert(id).second) {
      throw GridError(fmt::format("duplicate device id '{}'", id));
    }
  };
  auto need_region = [&](const std::string& region, const std::string& who) {
    if (!contains(state.regions, region)) {
      throw GridError(fmt::format("device '{}' references unknown region '{}'", who, region));
    }
  };
  for (const auto& r : state.regions) claim(r);
  for (auto& inv : state.inverters) {
    claim(inv.id);
    need_region(inv.microgrid, inv.id);
    if (inv.pref_w > inv.rated_w || inv.pref_w < 0.0) {
      throw GridError(fmt::format("inverter '{}' Pref {} outside [0, {}]", inv.id, inv.pref_w, inv.rated_w));
    }
    if (inv.recovery_steps < 1) {
      throw GridError(fmt::format("inverter '{}' recovery_steps must be at least 1", inv.id));
    }
    inv.p_out_w = inv.pref_w;
    inv.q_out_var = inv.qref_var;
    inv.dispatch_w = inv.pref_w;
    inv.qref0_var = inv.qref_var;
    inv.applied_pref_w = inv.pref_w;
  }
  for (const auto& gen : state.generators) {
    claim(gen.id);
    need_region(gen.microgrid, gen.id);
    if (gen.p_delivered_w > gen.rated_w) {
      throw GridError(fmt::format("generator '{}' delivers more than its rating", gen.id));
    }
  }
  for (const auto& cap : state.capacitors) {
    claim(cap.id);
    need_region(cap.microgrid, cap.id);
    for (const auto& [phase, size] : cap.size_var_per_phase) {
      if (cap.phases.find(phase) == std::string::npos || size <= 0.0) {
        throw GridError(fmt::format("capacitor '{}' has an invalid entry for phase {}", cap.id, phase));
      }
    }
  }
  for (const auto& sw : state.switches) {
    claim(sw.id);
    need_region(sw.owner, sw.id);
    if (sw.kind == SwitchKind::breaker_switch) {
      need_region(sw.a, sw.id);
      need_region(sw.b, sw.id);
    }
  }
  for (auto& load : state.loads) {
    claim(load.id);
    need_region(load.microgrid, load.id);
    if (load.attached_relay && !state.relay(*load.attached_relay)) {
      throw GridError(fmt::format("load '{}' attached to unknown relay '{}'", load.id, *load.attached_relay));
    }
    if (load.feeder_inverter && !state.inverter(*load.feeder_inverter)) {
      throw GridError(fmt::format("load '{}' fed by unknown inverter '{}'", load.id, *load.feeder_inverter));
    }
    load.shed_fraction = std::clamp(load.shed_fraction, 0.0, 1.0);
  }
  state.islands.clear();
  rebuild_islands(state);
}

double target_frequency(const GridState& state, const IslandState& island) {
  const auto& p = state.params;
  if (has_grid(island)) {
    return p.nominal_freq_hz;
  }
  Balance b = balance_of(state, island.members);
  if (b.rated <= 0.0) {
    return p.nominal_freq_hz;
  }
  return p.nominal_freq_hz +
         p.droop_gain * (b.p_gen - b.p_load) / (b.rated * support_factor(p, b.q_support));
}

void step_in_place(GridState& s, double dt) {
  if (!(dt > 0.0)) {
    throw GridError(fmt::format("grid step needs dt > 0, got {}", dt));
  }
  const auto& p = s.params;
  s.time_s += dt;

  for (auto& inv : s.inverters) {
    if (inv.pref_w != inv.applied_pref_w) {
      inv.p_out_w = inv.pref_w;
      inv.applied_pref_w = inv.pref_w;
    } else if (inv.kind == InverterKind::grid_forming) {
      double rho = std::pow(0.01, 1.0 / inv.recovery_steps);
      inv.p_out_w = inv.dispatch_w + (inv.p_out_w - inv.dispatch_w) * rho;
    } else {
      inv.p_out_w = inv.pref_w;
    }
    inv.p_out_w = std::clamp(inv.p_out_w, 0.0, inv.rated_w);
    inv.q_out_var = inv.qref_var;
  }

  for (auto& load : s.loads) {
    if (load.attached_relay) {
      if (!s.relay(*load.attached_relay)->closed) {
        load.shed_fraction = 1.0;
      }
    }
  }

  double decay = std::exp(-dt / p.tau_f_s);
  for (auto& island : s.islands) {
    if (has_grid(island)) {
      island.freq_hz = p.nominal_freq_hz;
      continue;
    }
    double f_star = target_frequency(s, island);
    island.freq_hz = f_star + (island.freq_hz - f_star) * decay;

    double deviation = island.freq_hz - p.nominal_freq_hz;
    if (std::abs(deviation) <= p.governor_band_hz) {
      Balance b = balance_of(s, island.members);
      double total = -deviation * b.rated * support_factor(p, b.q_support) / (p.droop_gain * p.secondary_time_s) * dt;
      double weight_sum = 0.0;
      for (const auto& gen : s.generators) {
        if (contains(island.members, gen.microgrid) && gen.droop_hz_per_w > 0.0) {
          weight_sum += 1.0 / gen.droop_hz_per_w;
        }
      }
      for (auto& gen : s.generators) {
        if (contains(island.members, gen.microgrid) && gen.droop_hz_per_w > 0.0) {
          double share = (1.0 / gen.droop_hz_per_w) / weight_sum;
          gen.p_delivered_w = std::clamp(gen.p_delivered_w + total * share, 0.0, gen.rated_w);
        }
      }
    }

    if (island.freq_hz < p.f_shed_hz) {
      for (auto& load : s.loads) {
        if (load.ufls && contains(island.members, load.microgrid)) {
          load.shed_fraction = std::min(1.0, load.shed_fraction + p.shed_step);
        }
      }
    }
  }

  for (auto& island : s.islands) {
    Balance b = balance_of(s, island.members);
    island.p_gen_w = b.p_gen;
    island.p_load_w = b.p_load;
    island.q_support_var = b.q_support;
  }
}

GridState step(const GridState& state, double dt_s) {
  GridState next = state;
  step_in_place(next, dt_s);
  return next;
}

void apply_setpoint(GridState& s, const PointKey& key, double value) {
  if (auto* inv = find_by_id(s.inverters, key.node_id)) {
    if (key.point_id == "Pref") {
      if (value < 0.0 || value > inv->rated_w) {
        throw GridError(fmt::format("{} = {} outside [0, {}]", key.str(), value, inv->rated_w));
      }
      inv->pref_w = value;
      return;
    }
    if (key.point_id == "Qref") {
      inv->qref_var = value;
      return;
    }
  } else if (auto* sw = find_by_id(s.switches, key.node_id)) {
    if (key.point_id == "state") {
      if (value != 0.0 && value != 1.0) {
        throw GridError(fmt::format("{} must be 0 or 1, got {}", key.str(), value));
      }
      bool closed = value == 1.0;
      if (sw->closed != closed) {
        sw->closed = closed;
        rebuild_islands(s);
      }
      return;
    }
  } else if (!s.owner_of(key.node_id)) {
    throw GridError(fmt::format("unknown grid node '{}'", key.node_id));
  }
  // Known node, but the point is absent or a measurement.
  read_point(s, key);
  throw GridError(fmt::format("point {} is read-only", key.str()));
}

double load_current(const GridState& s, std::string_view load_id) {
  const Load* load = s.load(load_id);
  if (!load) {
    throw GridError(fmt::format("unknown load '{}'", load_id));
  }
  const auto& p = s.params;
  double demand = load->effective_w();
  double v_pu = 1.0;
  double disturbance = 0.0;
  if (load->feeder_inverter) {
    const Inverter* inv = s.inverter(*load->feeder_inverter);
    v_pu += p.q_voltage_sensitivity * inv->qref_var / inv->rated_w;
    disturbance = (std::abs(inv->pref_w - inv->dispatch_w) + std::abs(inv->qref_var - inv->qref0_var)) / inv->rated_w;
  }
  double base = demand / (p.nominal_v * v_pu);
  double amp = p.ripple_ratio * (demand / p.nominal_v) * (1.0 + p.ripple_attack_gain * disturbance);
  return base + amp * std::sin(2.0 * std::numbers::pi * s.time_s / p.ripple_period_s);
}

double read_point(const GridState& s, const PointKey& key) {
  const auto& point = key.point_id;
  if (contains(s.regions, key.node_id)) {
    if (point == "freq") return s.island_of(key.node_id).freq_hz;
  } else if (auto* inv = s.inverter(key.node_id)) {
    if (point == "Pref") return inv->pref_w;
    if (point == "Qref") return inv->qref_var;
    if (point == "Pout") return inv->p_out_w;
    if (point == "Qout") return inv->q_out_var;
  } else if (auto* gen = s.generator(key.node_id)) {
    if (point == "Pout") return gen->p_delivered_w;
    if (point == "Qout") return gen->q_delivered_var;
  } else if (auto* sw = s.relay(key.node_id)) {
    if (point == "state") return sw->closed ? 1.0 : 0.0;
  } else if (auto* load = s.load(key.node_id)) {
    if (point == "current") return load_current(s, key.node_id);
    if (point == "demand") return load->effective_w();
    if (point == "shed") return load->shed_fraction;
  }
  throw GridError(fmt::format("grid has no point {}", key.str()));
}

std::map<PointKey, double> read_points(const GridState& state, const PointRegistry& registry) {
  std::map<PointKey, double> out;
  for (const auto& entry : registry.entries()) {
    out.emplace(entry.key, read_point(state, entry.key));
  }
  return out;
}

}  // namespace gridwire::grid
