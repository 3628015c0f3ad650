#include "gridwire/federates.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace gridwire {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kPollEpsilon = 1e-9;

std::vector<std::uint8_t> pack(const json& j) { return json::to_cbor(j); }
json unpack(const std::vector<std::uint8_t>& bytes) { return json::from_cbor(bytes); }

}  // namespace

std::uint16_t link_address(const Topology& topology, std::string_view node) {
  for (std::size_t i = 0; i < topology.nodes.size(); ++i) {
    if (topology.nodes[i].id == node) {
      return static_cast<std::uint16_t>(i + 1);
    }
  }
  return 0;
}

void Federate::log(double t, std::string type, ordered_json fields) {
  events_.push_back(LogEvent{t, name(), events_.size(), std::move(type), std::move(fields)});
}

// ---------------------------------------------------------------- grid side

GridFederate::GridFederate(grid::GridState state, PointRegistry registry, double dt_s, double duration_s)
    : state_(std::move(state)), registry_(std::move(registry)), dt_(dt_s), duration_(duration_s) {
  // Fail early on points the model cannot serve.
  grid::read_points(state_, registry_);
}

void GridFederate::record_truth() {
  for (std::uint32_t i = 0; i < registry_.size(); ++i) {
    truth_.push_back(Sample{state_.time_s, i, grid::read_point(state_, registry_.at(i).key)});
  }
}

std::optional<double> GridFederate::initial_request() {
  state_.time_s = 0.0;
  record_truth();
  next_step_ = 1;
  return step_time(next_step_) <= duration_ + kPollEpsilon ? step_time(next_step_) : kTimeNever;
}

void GridFederate::apply_write(double t, const json& point) {
  PointKey key{point.at("node").get<std::string>(), point.at("point").get<std::string>()};
  double value = point.at("value").get<double>();
  const PointEntry* entry = registry_.find(key);
  if (!entry || !entry->writable) {
    log(t, "write_rejected", {{"node", key.node_id}, {"point", key.point_id}, {"reason", "not writable"}});
    return;
  }
  double old = grid::read_point(state_, key);
  try {
    grid::apply_setpoint(state_, key, value);
  } catch (const grid::GridError& e) {
    log(t, "write_rejected", {{"node", key.node_id}, {"point", key.point_id}, {"reason", e.what()}});
    return;
  }
  log(t, "setpoint_write", {{"node", key.node_id}, {"point", key.point_id}, {"old", old}, {"new", value}});
  if (state_.relay(key.node_id) && old != value) {
    log(t, value == 0.0 ? "relay_trip" : "relay_close", {{"node", key.node_id}});
  }
}

std::optional<double> GridFederate::on_grant(double t) {
  if (t == kTimeNever) {
    return std::nullopt;
  }
  auto messages = broker_->receive(id_);
  std::vector<std::pair<std::string, json>> reads;
  for (const auto& msg : messages) {
    json body = unpack(msg.payload);
    const auto& op = body.at("op").get_ref<const std::string&>();
    if (op == "write") {
      for (const auto& point : body.at("points")) {
        apply_write(t, point);
      }
    } else if (op == "read") {
      reads.emplace_back(msg.src, std::move(body));
    } else {
      spdlog::warn("grid federate ignoring message op '{}'", op);
    }
  }

  if (t == step_time(next_step_)) {
    std::vector<double> shed_before;
    for (const auto& load : state_.loads) shed_before.push_back(load.shed_fraction);
    grid::step_in_place(state_, dt_);
    state_.time_s = t;
    for (std::size_t i = 0; i < state_.loads.size(); ++i) {
      if (state_.loads[i].shed_fraction != shed_before[i]) {
        log(t, "load_shed", {{"load", state_.loads[i].id}, {"shed_fraction", state_.loads[i].shed_fraction}});
      }
    }
    record_truth();
    last_step_ = next_step_++;
  }

  for (const auto& [src, body] : reads) {
    json values = json::array();
    for (const auto& entry : registry_.entries()) {
      values.push_back(grid::read_point(state_, entry.key));
    }
    json reply = {{"op", "snapshot"}, {"tag", body.at("tag")}, {"time", state_.time_s}, {"values", values}};
    broker_->send(id_, kGridEndpoint, src, pack(reply), 0.0);
  }

  double next = step_time(next_step_);
  return next <= duration_ + kPollEpsilon ? next : kTimeNever;
}

// ------------------------------------------------------------- network side

NetFederate::NetFederate(Topology topology, PointRegistry registry, std::map<std::uint32_t, std::string> ownership,
                         std::optional<AttackPlan> plan, double poll_period_s, double duration_s, std::uint64_t seed)
    : topology_(std::move(topology)),
      registry_(std::move(registry)),
      ownership_(std::move(ownership)),
      substations_(topology_.substations()),
      control_center_(topology_.control_center().id),
      network_(topology_, seed),
      poll_period_(poll_period_s),
      duration_(duration_s) {
  if (!(poll_period_ > 0.0)) {
    throw ConfigError(fmt::format("poll period must be positive, got {}", poll_period_));
  }
  network_.set_receiver(control_center_, [this](const net::PacketRecord& rec) { on_control_center(rec); });
  for (const auto& sub : substations_) {
    network_.set_receiver(sub, [this, sub](const net::PacketRecord& rec) { on_substation(sub, rec); });
    masters_[sub] = Master{};
    outstations_[sub] = Outstation{link_address(topology_, sub), 0};
  }
  if (plan) {
    for (const auto& node : attack::attacker_nodes(*plan, network_)) {
      auto mitm = std::make_unique<attack::Mitm>(*plan, registry_, network_, node);
      attack::Mitm* raw = mitm.get();
      network_.install_tap(node, [raw](const net::PacketRecord& rec, net::Network& n) { return raw->on_packet(rec, n); });
      attackers_.push_back(std::move(mitm));
      attack_events_seen_.push_back(0);
      spdlog::info("attacker on {} targeting {}", node, plan->victim);
    }
  }
}

std::optional<double> NetFederate::next_time() const {
  std::optional<double> next;
  double poll_at = static_cast<double>(next_poll_) * poll_period_;
  if (poll_at < duration_ - kPollEpsilon) {
    next = poll_at;
  }
  if (auto ev = network_.next_event_time()) {
    next = next ? std::min(*next, *ev) : *ev;
  }
  if (!next && !pending_.empty()) {
    // Waiting on snapshots only; the broker wakes us at their delivery.
    return kTimeNever;
  }
  return next;
}

std::optional<double> NetFederate::initial_request() { return next_time(); }

std::optional<double> NetFederate::on_grant(double t) {
  if (t == kTimeNever) {
    if (!pending_.empty()) {
      log(now_, "snapshot_lost", {{"pending", pending_.size()}});
    }
    return std::nullopt;
  }
  now_ = t;
  for (const auto& msg : broker_->receive(id_)) {
    on_snapshot(t, msg);
  }
  while (true) {
    double poll_at = static_cast<double>(next_poll_) * poll_period_;
    if (poll_at > t || poll_at >= duration_ - kPollEpsilon) break;
    poll(poll_at);
    ++next_poll_;
  }
  network_.run_until(t);
  drain_attack_events();
  return next_time();
}

void NetFederate::poll(double t) {
  for (const auto& sub : substations_) {
    Master& m = masters_[sub];
    if (m.awaiting) {
      log(t, "poll_timeout", {{"substation", sub}, {"seq", m.seq}});
    }
    m.seq = static_cast<std::uint8_t>((m.seq + 1) & 0x0F);
    dnp3::AppMessage app;
    app.function = dnp3::FunctionCode::read_poll;
    app.seq = m.seq;
    dnp3::Message msg{outstations_[sub].link_address, link_address(topology_, control_center_),
                      dnp3::kControlFromMaster, m.transport_seq, dnp3::encode_app(app, registry_)};
    m.transport_seq = static_cast<std::uint8_t>((m.transport_seq + 1) & 0x3F);
    auto bytes = dnp3::encode_message(msg);
    log(t, "poll", {{"substation", sub}, {"seq", m.seq}, {"bytes", bytes.size()}});
    network_.send_packet(control_center_, network_.address_of(sub), std::move(bytes), t);
    m.awaiting = true;
  }
}

void NetFederate::on_control_center(const net::PacketRecord& rec) {
  dnp3::AppMessage app;
  try {
    app = dnp3::decode_app(dnp3::decode_message(rec.payload).app, registry_);
  } catch (const std::exception& e) {
    log(rec.time_s, "malformed", {{"at", control_center_}, {"error", e.what()}});
    return;
  }
  auto src = network_.node_of(rec.l3_src);
  std::string src_name = src ? *src : net::format_address(rec.l3_src);
  auto it = src ? masters_.find(*src) : masters_.end();
  bool expected = app.function == dnp3::FunctionCode::response && it != masters_.end() && it->second.awaiting &&
                  app.seq == it->second.seq;
  if (!expected) {
    log(rec.time_s, "orphan_response",
        {{"substation", src_name}, {"function", dnp3::to_string(app.function)}, {"seq", app.seq},
         {"bytes", rec.payload.size()}});
    return;
  }
  it->second.awaiting = false;
  for (const auto& [key, value] : app.analog) {
    observed_.push_back(Sample{rec.time_s, static_cast<std::uint32_t>(*registry_.index_of(key)), value});
  }
  for (const auto& [key, value] : app.binary) {
    observed_.push_back(Sample{rec.time_s, static_cast<std::uint32_t>(*registry_.index_of(key)), value ? 1.0 : 0.0});
  }
  log(rec.time_s, "poll_response",
      {{"substation", src_name},
       {"seq", app.seq},
       {"points", app.analog.size() + app.binary.size()},
       {"bytes", rec.payload.size()}});
}

void NetFederate::on_substation(const std::string& sub, const net::PacketRecord& rec) {
  dnp3::AppMessage app;
  try {
    app = dnp3::decode_app(dnp3::decode_message(rec.payload).app, registry_);
  } catch (const std::exception& e) {
    log(rec.time_s, "malformed", {{"at", sub}, {"error", e.what()}});
    return;
  }
  switch (app.function) {
    case dnp3::FunctionCode::read_poll: {
      std::uint64_t tag = next_tag_++;
      pending_[tag] = PendingRead{sub, rec.l3_src, app.seq};
      broker_->send(id_, sub, kGridEndpoint, pack(json{{"op", "read"}, {"tag", tag}}), 0.0);
      break;
    }
    case dnp3::FunctionCode::write:
    case dnp3::FunctionCode::direct_operate: {
      json points = json::array();
      dnp3::AppMessage echo;
      echo.function = dnp3::FunctionCode::response;
      echo.seq = app.seq;
      ordered_json names = ordered_json::array();
      for (const auto& [key, value] : app.analog) {
        points.push_back({{"node", key.node_id}, {"point", key.point_id}, {"value", value}});
        echo.analog[key] = value;
        names.push_back(key.str());
      }
      for (const auto& [key, value] : app.binary) {
        points.push_back({{"node", key.node_id}, {"point", key.point_id}, {"value", value ? 1.0 : 0.0}});
        echo.binary[key] = value;
        names.push_back(key.str());
      }
      log(rec.time_s, "operate",
          {{"substation", sub}, {"function", dnp3::to_string(app.function)}, {"seq", app.seq}, {"points", names}});
      broker_->send(id_, sub, kGridEndpoint, pack(json{{"op", "write"}, {"points", points}}), 0.0);
      respond(sub, rec.l3_src, echo, rec.time_s);
      break;
    }
    case dnp3::FunctionCode::response:
      log(rec.time_s, "unexpected_response", {{"at", sub}, {"seq", app.seq}});
      break;
  }
}

void NetFederate::on_snapshot(double t, const TimedMessage& msg) {
  json body = unpack(msg.payload);
  auto tag = body.at("tag").get<std::uint64_t>();
  auto it = pending_.find(tag);
  if (it == pending_.end()) {
    spdlog::warn("snapshot for unknown read tag {}", tag);
    return;
  }
  PendingRead read = it->second;
  pending_.erase(it);
  const auto& values = body.at("values");
  dnp3::AppMessage app;
  app.function = dnp3::FunctionCode::response;
  app.seq = read.seq;
  for (const auto& [index, owner] : ownership_) {
    if (owner != read.substation) continue;
    const auto& entry = registry_.at(index);
    double v = values.at(index).get<double>();
    if (entry.kind == PointKind::binary) {
      app.binary[entry.key] = v != 0.0;
    } else {
      app.analog[entry.key] = v;
    }
  }
  respond(read.substation, read.master, app, t);
}

void NetFederate::respond(const std::string& sub, net::Address master, const dnp3::AppMessage& app, double t) {
  Outstation& o = outstations_[sub];
  auto master_node = network_.node_of(master);
  dnp3::Message msg{master_node ? link_address(topology_, *master_node) : std::uint16_t{0}, o.link_address,
                    dnp3::kControlFromOutstation, o.transport_seq, dnp3::encode_app(app, registry_)};
  o.transport_seq = static_cast<std::uint8_t>((o.transport_seq + 1) & 0x3F);
  network_.send_packet(sub, master, dnp3::encode_message(msg), t);
}

void NetFederate::drain_attack_events() {
  for (std::size_t i = 0; i < attackers_.size(); ++i) {
    const auto& evs = attackers_[i]->events();
    for (; attack_events_seen_[i] < evs.size(); ++attack_events_seen_[i]) {
      const auto& e = evs[attack_events_seen_[i]];
      ordered_json fields{{"attacker", e.attacker}};
      if (!e.target.empty()) {
        fields["target"] = e.target;
        fields["old"] = e.old_value;
        fields["new"] = e.new_value;
      }
      log(e.time_s, "attack_" + e.action, std::move(fields));
    }
  }
}

}  // namespace gridwire
