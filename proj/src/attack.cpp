#include "gridwire/attack.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace gridwire::attack {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

bool injects(AttackScenario s) {
  return s == AttackScenario::setpoint_modification || s == AttackScenario::command_injection ||
         s == AttackScenario::custom;
}

}  // namespace

std::size_t get_index(const PointRegistry& registry, const PointKey& key) {
  auto idx = registry.index_of(key);
  if (!idx) {
    throw AttackError(fmt::format("point {} is not in the registry", key.str()));
  }
  return *idx;
}

bool coin(std::uint64_t seed, std::uint64_t poll_counter, std::size_t edit) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(poll_counter ^ splitmix64(edit)));
  return (h >> 63) != 0;
}

std::vector<double> toggle_value(const MitmState& state, std::uint64_t poll_counter) {
  std::vector<double> values;
  values.reserve(state.edits.size());
  for (std::size_t i = 0; i < state.edits.size(); ++i) {
    const auto& e = state.edits[i];
    bool attack = !state.toggle || coin(state.seed, poll_counter, i);
    values.push_back(attack ? e.attack_value : e.default_value);
  }
  return values;
}

MitmState make_state(const AttackPlan& plan, const PointRegistry& registry, net::Address victim) {
  MitmState s;
  s.victim_addr = victim;
  s.start_s = plan.start_s;
  s.end_s = plan.end_s;
  s.toggle = plan.toggle;
  s.seed = plan.seed;
  for (const auto& edit : plan.edits) {
    std::size_t idx = get_index(registry, edit.key);
    const auto& entry = registry.at(idx);
    s.edits.push_back(ActiveEdit{idx, edit.key, entry.kind, edit.value, entry.default_value});
  }
  return s;
}

std::optional<dnp3::Bytes> rewrite_response(const MitmState& state, const std::vector<double>& values,
                                            std::span<const std::uint8_t> payload, const PointRegistry& registry) {
  try {
    dnp3::Message msg = dnp3::decode_message(payload);
    dnp3::AppMessage app = dnp3::decode_app(msg.app, registry);
    if (app.function != dnp3::FunctionCode::response) {
      return std::nullopt;
    }
    for (std::size_t i = 0; i < state.edits.size(); ++i) {
      const auto& e = state.edits[i];
      if (auto it = app.analog.find(e.key); it != app.analog.end()) {
        it->second = values[i];
      }
      if (auto it = app.binary.find(e.key); it != app.binary.end()) {
        it->second = values[i] != 0.0;
      }
    }
    msg.app = dnp3::encode_app(app, registry);
    return dnp3::encode_message(msg);
  } catch (const dnp3::FrameError&) {
    return std::nullopt;
  } catch (const dnp3::AppError&) {
    return std::nullopt;
  }
}

std::vector<dnp3::Bytes> inject_command(std::span<const std::uint8_t> request,
                                        const std::vector<InjectedCommand>& cmds, const PointRegistry& registry) {
  dnp3::Message original = dnp3::decode_message(request);
  auto [function, seq] = dnp3::peek_app(original.app);
  if (!dnp3::is_request(function)) {
    throw AttackError("command injection needs a request to ride on");
  }
  std::vector<dnp3::Bytes> out;
  if (!cmds.empty()) {
    dnp3::AppMessage op;
    op.function = dnp3::FunctionCode::direct_operate;
    op.seq = static_cast<std::uint8_t>((seq + 15) & 0x0F);
    for (const auto& cmd : cmds) {
      const PointEntry* entry = registry.find(cmd.target);
      if (!entry) {
        throw AttackError(fmt::format("injected point {} is not registered", cmd.target.str()));
      }
      if (!entry->writable) {
        throw AttackError(fmt::format("injected point {} is not writable", cmd.target.str()));
      }
      if (entry->kind == PointKind::binary) {
        op.binary[cmd.target] = cmd.value != 0.0;
      } else {
        op.analog[cmd.target] = cmd.value;
      }
    }
    dnp3::Message msg = original;
    msg.transport_seq = static_cast<std::uint8_t>((original.transport_seq + 63) & 0x3F);
    msg.app = dnp3::encode_app(op, registry);
    out.push_back(dnp3::encode_message(msg));
  }
  bool piggyback = cmds.empty() || std::any_of(cmds.begin(), cmds.end(), [](const auto& c) { return c.piggyback; });
  if (piggyback) {
    out.emplace_back(request.begin(), request.end());
  }
  return out;
}

Mitm::Mitm(const AttackPlan& plan, const PointRegistry& registry, const net::Network& network, std::string node)
    : plan_(plan), registry_(registry), node_(std::move(node)) {
  net::Address victim = 0;
  if (auto parsed = net::parse_address(plan.victim)) {
    victim = *parsed;
  } else {
    victim = network.address_of(plan.victim);
  }
  state_ = make_state(plan, registry, victim);
  if (plan.dest_override) {
    auto parsed = net::parse_address(*plan.dest_override);
    dest_override_ = parsed ? *parsed : network.address_of(*plan.dest_override);
  }
  for (const auto& e : state_.edits) {
    last_injected_.push_back(e.default_value);
  }
}

net::Verdict Mitm::capture_packet(const net::PacketRecord& record) const {
  if (record.time_s < state_.start_s || record.time_s > state_.end_s) {
    return net::Verdict::pass;
  }
  bool matches = record.l3_dst == state_.victim_addr ||
                 (plan_.scenario == AttackScenario::custom && record.l3_src == state_.victim_addr);
  return matches ? net::Verdict::consume : net::Verdict::pass;
}

net::Verdict Mitm::on_packet(const net::PacketRecord& record, net::Network& network) {
  if (capture_packet(record) == net::Verdict::pass) {
    return net::Verdict::pass;
  }
  state_.is_destination = true;
  std::optional<dnp3::FunctionCode> function;
  try {
    function = dnp3::peek_app(dnp3::decode_message(record.payload).app).first;
  } catch (const std::exception& e) {
    spdlog::debug("attacker {} cannot parse packet {}: {}", node_, record.packet_id, e.what());
  }
  if (!function) {
    events_.push_back({record.time_s, node_, "forward_unparsed", "", 0.0, 0.0});
    pass_through(record, network, record.payload);
  } else if (*function == dnp3::FunctionCode::response) {
    handle_response(record, network);
  } else if (*function == dnp3::FunctionCode::read_poll && injects(plan_.scenario) &&
             record.l3_dst == state_.victim_addr) {
    handle_request(record, network);
  } else {
    pass_through(record, network, record.payload);
  }
  state_.is_destination = false;
  return net::Verdict::consume;
}

void Mitm::pass_through(const net::PacketRecord& record, net::Network& network, const dnp3::Bytes& payload) {
  net::Address dst = dest_override_.value_or(record.l3_dst);
  network.reinject(node_, record.l3_src, dst, payload, record.time_s);
}

void Mitm::handle_request(const net::PacketRecord& record, net::Network& network) {
  ++poll_counter_;
  std::vector<double> values = toggle_value(state_, poll_counter_);
  std::vector<InjectedCommand> cmds;
  for (std::size_t i = 0; i < state_.edits.size(); ++i) {
    if (values[i] != last_injected_[i]) {
      cmds.push_back(InjectedCommand{state_.edits[i].key, values[i], true});
      events_.push_back({record.time_s, node_, "inject", state_.edits[i].key.str(), last_injected_[i], values[i]});
      last_injected_[i] = values[i];
    }
  }
  std::vector<dnp3::Bytes> out;
  try {
    out = inject_command(record.payload, cmds, registry_);
  } catch (const std::exception& e) {
    spdlog::warn("attacker {} injection failed: {}", node_, e.what());
    out = {record.payload};
  }
  for (const auto& payload : out) {
    pass_through(record, network, payload);
  }
}

void Mitm::handle_response(const net::PacketRecord& record, net::Network& network) {
  bool lie = plan_.scenario == AttackScenario::data_modification;
  bool hide = plan_.scenario == AttackScenario::custom && record.l3_src == state_.victim_addr;
  if (!lie && !hide) {
    pass_through(record, network, record.payload);
    return;
  }
  std::vector<double> values;
  if (lie) {
    ++poll_counter_;
    values = toggle_value(state_, poll_counter_);
  } else {
    for (const auto& e : state_.edits) values.push_back(e.default_value);
  }
  auto rewritten = rewrite_response(state_, values, record.payload, registry_);
  if (!rewritten) {
    events_.push_back({record.time_s, node_, "forward_unparsed", "", 0.0, 0.0});
    pass_through(record, network, record.payload);
    return;
  }
  dnp3::AppMessage before = dnp3::decode_app(dnp3::decode_message(record.payload).app, registry_);
  for (std::size_t i = 0; i < state_.edits.size(); ++i) {
    const auto& e = state_.edits[i];
    std::optional<double> old;
    if (auto it = before.analog.find(e.key); it != before.analog.end()) old = it->second;
    if (auto it = before.binary.find(e.key); it != before.binary.end()) old = it->second ? 1.0 : 0.0;
    if (old) {
      events_.push_back({record.time_s, node_, "rewrite", e.key.str(), *old, dnp3::quantize(values[i])});
    }
  }
  pass_through(record, network, *rewritten);
}

std::vector<std::string> attacker_nodes(const AttackPlan& plan, const net::Network& network) {
  std::vector<std::string> out;
  if (plan.attacker_count <= 0) {
    return out;
  }
  const Topology& topo = network.topology();
  if (!topo.find(plan.attacker_node)) {
    throw ConfigError(fmt::format("attacker node '{}' is not in the topology", plan.attacker_node));
  }
  out.push_back(plan.attacker_node);
  std::set<std::string> extra;
  const std::string& cc = topo.control_center().id;
  for (const auto& sub : topo.substations()) {
    auto p = network.path(cc, sub);
    for (std::size_t i = 1; i + 1 < p.size(); ++i) {
      NodeKind kind = topo.find(p[i])->kind;
      if ((kind == NodeKind::router || kind == NodeKind::attacker) && p[i] != plan.attacker_node) {
        extra.insert(p[i]);
      }
    }
  }
  for (const auto& node : extra) {
    if (static_cast<int>(out.size()) >= plan.attacker_count) break;
    out.push_back(node);
  }
  if (static_cast<int>(out.size()) < plan.attacker_count) {
    spdlog::warn("only {} of {} requested attacker positions exist on control paths", out.size(),
                 plan.attacker_count);
  }
  return out;
}

}  // namespace gridwire::attack
