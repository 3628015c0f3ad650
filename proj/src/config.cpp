#include "gridwire/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <queue>
#include <set>

#include <fmt/format.h>

#include <nlohmann/json.hpp>

namespace gridwire {

using nlohmann::json;

namespace {

std::string registry_key(const PointKey& key) { return key.node_id + '\x1f' + key.point_id; }

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

json parse_document(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{} document: malformed JSON: {}", what, e.what()));
  }
}

const json& require(const json& obj, std::string_view field, std::string_view context) {
  if (!obj.is_object()) {
    throw ConfigError(fmt::format("{}: expected an object", context));
  }
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ConfigError(fmt::format("{}: missing field '{}'", context, field));
  }
  return *it;
}

std::string get_string(const json& obj, std::string_view field, std::string_view context) {
  const json& v = require(obj, field, context);
  if (!v.is_string()) {
    throw ConfigError(fmt::format("{}: field '{}' must be a string", context, field));
  }
  return v.get<std::string>();
}

double get_number(const json& v, std::string_view field, std::string_view context) {
  if (v.is_boolean()) {
    return v.get<bool>() ? 1.0 : 0.0;
  }
  if (!v.is_number()) {
    throw ConfigError(fmt::format("{}: field '{}' must be a number", context, field));
  }
  double d = v.get<double>();
  if (!std::isfinite(d)) {
    throw ConfigError(fmt::format("{}: field '{}' must be finite", context, field));
  }
  return d;
}

double get_number(const json& obj, std::string_view field, std::string_view context, double fallback) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    return fallback;
  }
  return get_number(*it, field, context);
}

bool get_bool(const json& obj, std::string_view field, std::string_view context, bool fallback) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    return fallback;
  }
  if (!it->is_boolean()) {
    throw ConfigError(fmt::format("{}: field '{}' must be a boolean", context, field));
  }
  return it->get<bool>();
}

const json& require_array(const json& obj, std::string_view field, std::string_view context) {
  const json& v = require(obj, field, context);
  if (!v.is_array()) {
    throw ConfigError(fmt::format("{}: field '{}' must be an array", context, field));
  }
  return v;
}

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& text, const std::array<Enum, N>& values, std::string_view field,
                std::string_view context) {
  for (Enum e : values) {
    if (to_string(e) == text) {
      return e;
    }
  }
  throw ConfigError(fmt::format("{}: field '{}' has unknown value '{}'", context, field, text));
}

constexpr std::array kNodeKinds = {NodeKind::control_center, NodeKind::substation, NodeKind::microgrid,
                                   NodeKind::router, NodeKind::attacker};
constexpr std::array kLinkKinds = {LinkKind::p2p, LinkKind::csma, LinkKind::wifi};
constexpr std::array kPointKinds = {PointKind::analog, PointKind::binary};
constexpr std::array kScenarios = {AttackScenario::data_modification, AttackScenario::setpoint_modification,
                                   AttackScenario::command_injection, AttackScenario::custom};

json number_or_bit(double value, PointKind kind) {
  if (kind == PointKind::binary) {
    return value != 0.0;
  }
  return value;
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::control_center: return "control_center";
    case NodeKind::substation: return "substation";
    case NodeKind::microgrid: return "microgrid";
    case NodeKind::router: return "router";
    case NodeKind::attacker: return "attacker";
  }
  return "?";
}

std::string_view to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::p2p: return "p2p";
    case LinkKind::csma: return "csma";
    case LinkKind::wifi: return "wifi";
  }
  return "?";
}

std::string_view to_string(PointKind kind) { return kind == PointKind::analog ? "analog" : "binary"; }

std::string_view to_string(AttackScenario scenario) {
  switch (scenario) {
    case AttackScenario::data_modification: return "data_modification";
    case AttackScenario::setpoint_modification: return "setpoint_modification";
    case AttackScenario::command_injection: return "command_injection";
    case AttackScenario::custom: return "custom";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Topology

const NodeSpec* Topology::find(std::string_view id) const {
  auto it = std::find_if(nodes.begin(), nodes.end(), [&](const NodeSpec& n) { return n.id == id; });
  return it == nodes.end() ? nullptr : &*it;
}

const NodeSpec& Topology::control_center() const {
  auto it = std::find_if(nodes.begin(), nodes.end(),
                         [](const NodeSpec& n) { return n.kind == NodeKind::control_center; });
  if (it == nodes.end()) {
    throw ConfigError("topology: no control_center node");
  }
  return *it;
}

std::vector<std::string> Topology::substations() const {
  std::vector<std::string> out;
  for (const auto& n : nodes) {
    if (n.kind == NodeKind::substation) {
      out.push_back(n.id);
    }
  }
  return out;
}

Topology default_star_topology() {
  Topology t;
  t.nodes = {{"cc", NodeKind::control_center},
             {"hub", NodeKind::router},
             {"sub1", NodeKind::substation},
             {"sub2", NodeKind::substation},
             {"sub3", NodeKind::substation}};
  t.links = {{"cc", "hub", LinkKind::p2p, 2.0, 0.0},
             {"hub", "sub1", LinkKind::p2p, 2.0, 0.0},
             {"hub", "sub2", LinkKind::p2p, 2.0, 0.0},
             {"hub", "sub3", LinkKind::p2p, 2.0, 0.0}};
  return t;
}

void validate(const Topology& topology) {
  std::set<std::string> ids;
  int control_centers = 0;
  for (const auto& n : topology.nodes) {
    if (n.id.empty()) {
      throw ConfigError("topology: node id must not be empty");
    }
    if (!ids.insert(n.id).second) {
      throw ConfigError(fmt::format("topology: duplicate node id '{}'", n.id));
    }
    if (n.kind == NodeKind::control_center) {
      ++control_centers;
    }
  }
  if (control_centers != 1) {
    throw ConfigError(fmt::format("topology: expected exactly one control_center, found {}", control_centers));
  }

  std::map<std::string, std::vector<std::string>> adjacency;
  std::set<std::pair<std::string, std::string>> seen_links;
  for (const auto& l : topology.links) {
    for (const auto* end : {&l.a, &l.b}) {
      if (!ids.contains(*end)) {
        throw ConfigError(fmt::format("topology: link references unknown node '{}'", *end));
      }
    }
    if (l.a == l.b) {
      throw ConfigError(fmt::format("topology: self-loop link on node '{}'", l.a));
    }
    if (!(l.delay_ms >= 0.0) || !(l.jitter_ms >= 0.0)) {
      throw ConfigError(fmt::format("topology: link {}-{} has negative delay_ms or jitter_ms", l.a, l.b));
    }
    auto key = std::minmax(l.a, l.b);
    if (!seen_links.insert({key.first, key.second}).second) {
      throw ConfigError(fmt::format("topology: duplicate link {}-{}", l.a, l.b));
    }
    adjacency[l.a].push_back(l.b);
    adjacency[l.b].push_back(l.a);
  }

  const std::string& root = topology.control_center().id;
  std::set<std::string> reached{root};
  std::queue<std::string> frontier;
  frontier.push(root);
  while (!frontier.empty()) {
    std::string cur = frontier.front();
    frontier.pop();
    for (const auto& next : adjacency[cur]) {
      if (reached.insert(next).second) {
        frontier.push(next);
      }
    }
  }
  for (const auto& n : topology.nodes) {
    if (!reached.contains(n.id)) {
      throw ConfigError(fmt::format("topology: graph is disconnected, node '{}' unreachable from '{}'", n.id,
                                    root));
    }
  }
}

Topology parse_topology(std::optional<std::string_view> text) {
  if (!text || is_blank(*text)) {
    return default_star_topology();
  }
  json doc = parse_document(*text, "topology");
  Topology t;
  for (const auto& jn : require_array(doc, "nodes", "topology")) {
    NodeSpec n;
    n.id = get_string(jn, "id", "topology.nodes[]");
    n.kind = parse_enum(get_string(jn, "kind", "topology.nodes[]"), kNodeKinds, "kind", "topology.nodes[]");
    t.nodes.push_back(std::move(n));
  }
  for (const auto& jl : require_array(doc, "links", "topology")) {
    LinkSpec l;
    l.a = get_string(jl, "a", "topology.links[]");
    l.b = get_string(jl, "b", "topology.links[]");
    l.kind = parse_enum(get_string(jl, "kind", "topology.links[]"), kLinkKinds, "kind", "topology.links[]");
    // Omitted latencies fall back to per-medium defaults.
    double base_ms = l.kind == LinkKind::p2p ? 2.0 : l.kind == LinkKind::csma ? 1.0 : 5.0;
    l.delay_ms = get_number(jl, "delay_ms", "topology.links[]", base_ms);
    l.jitter_ms = get_number(jl, "jitter_ms", "topology.links[]", l.kind == LinkKind::wifi ? 2.0 : 0.0);
    t.links.push_back(std::move(l));
  }
  validate(t);
  return t;
}

std::string serialize(const Topology& topology) {
  json doc;
  doc["nodes"] = json::array();
  for (const auto& n : topology.nodes) {
    doc["nodes"].push_back({{"id", n.id}, {"kind", to_string(n.kind)}});
  }
  doc["links"] = json::array();
  for (const auto& l : topology.links) {
    doc["links"].push_back({{"a", l.a},
                            {"b", l.b},
                            {"kind", to_string(l.kind)},
                            {"delay_ms", l.delay_ms},
                            {"jitter_ms", l.jitter_ms}});
  }
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Point registry

PointRegistry::PointRegistry(std::vector<PointEntry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.key.node_id.empty() || e.key.point_id.empty()) {
      throw ConfigError("points: node and point must not be empty");
    }
    if (!index_.emplace(registry_key(e.key), i).second) {
      throw ConfigError(fmt::format("points: duplicate point '{}'", e.key.str()));
    }
    if (e.kind == PointKind::binary && e.default_value != 0.0 && e.default_value != 1.0) {
      throw ConfigError(fmt::format("points: binary point '{}' default must be 0 or 1", e.key.str()));
    }
  }
}

std::optional<std::size_t> PointRegistry::index_of(const PointKey& key) const {
  auto it = index_.find(registry_key(key));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

const PointEntry* PointRegistry::find(const PointKey& key) const {
  auto idx = index_of(key);
  return idx ? &entries_[*idx] : nullptr;
}

PointRegistry parse_points(std::string_view text) {
  if (is_blank(text)) {
    return {};
  }
  json doc = parse_document(text, "points");
  if (doc.is_object() && doc.empty()) {
    return {};
  }
  std::vector<PointEntry> entries;
  for (const auto& jp : require_array(doc, "points", "points")) {
    PointEntry e;
    e.key.node_id = get_string(jp, "node", "points[]");
    e.key.point_id = get_string(jp, "point", "points[]");
    e.kind = parse_enum(get_string(jp, "kind", "points[]"), kPointKinds, "kind", "points[]");
    e.unit = jp.contains("unit") ? get_string(jp, "unit", "points[]") : std::string{};
    e.default_value = get_number(jp, "default", "points[]", 0.0);
    e.writable = get_bool(jp, "writable", "points[]", false);
    entries.push_back(std::move(e));
  }
  return PointRegistry(std::move(entries));
}

std::string serialize(const PointRegistry& registry) {
  json doc;
  doc["points"] = json::array();
  for (const auto& e : registry.entries()) {
    doc["points"].push_back({{"node", e.key.node_id},
                             {"point", e.key.point_id},
                             {"kind", to_string(e.kind)},
                             {"unit", e.unit},
                             {"default", number_or_bit(e.default_value, e.kind)},
                             {"writable", e.writable}});
  }
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Attack plan

void validate(const AttackPlan& plan, const PointRegistry& registry, double duration_s) {
  if (plan.start_s < 0.0 || plan.end_s < 0.0) {
    throw ConfigError("attack: start_s and end_s must be non-negative");
  }
  if (!(plan.start_s < plan.end_s)) {
    throw ConfigError(fmt::format("attack: empty window, start_s={} must be < end_s={}", plan.start_s, plan.end_s));
  }
  if (plan.end_s > duration_s) {
    throw ConfigError(fmt::format("attack: end_s={} exceeds simulation duration {}", plan.end_s, duration_s));
  }
  if (plan.attacker_count < 0) {
    throw ConfigError("attack: attackers must be >= 0");
  }
  if (plan.attacker_count > 0 && plan.attacker_node.empty()) {
    throw ConfigError("attack: attacker_node is required when attackers > 0");
  }
  const bool injects = plan.scenario != AttackScenario::data_modification;
  for (const auto& edit : plan.edits) {
    const PointEntry* entry = registry.find(edit.key);
    if (entry == nullptr) {
      throw ConfigError(fmt::format("attack: edit references unregistered point '{}'", edit.key.str()));
    }
    if (entry->kind == PointKind::binary && edit.value != 0.0 && edit.value != 1.0) {
      throw ConfigError(fmt::format("attack: binary point '{}' edit value must be 0 or 1", edit.key.str()));
    }
    if (injects && !entry->writable) {
      throw ConfigError(
          fmt::format("attack: scenario {} writes '{}', which is read-only", to_string(plan.scenario), edit.key.str()));
    }
  }
}

AttackPlan parse_attack(std::string_view text, const PointRegistry& registry, double duration_s) {
  json doc = parse_document(text, "attack");
  AttackPlan plan;
  plan.scenario = parse_enum(get_string(doc, "scenario", "attack"), kScenarios, "scenario", "attack");
  plan.start_s = get_number(require(doc, "start_s", "attack"), "start_s", "attack");
  plan.end_s = get_number(doc, "end_s", "attack", duration_s);
  auto attackers = get_number(doc, "attackers", "attack", 1.0);
  if (attackers != std::floor(attackers)) {
    throw ConfigError("attack: field 'attackers' must be an integer");
  }
  plan.attacker_count = static_cast<int>(attackers);
  plan.attacker_node = doc.contains("attacker_node") ? get_string(doc, "attacker_node", "attack") : std::string{};
  plan.victim = get_string(doc, "victim", "attack");
  if (doc.contains("edits")) {
    for (const auto& je : require_array(doc, "edits", "attack")) {
      PointEdit edit;
      edit.key.node_id = get_string(je, "node", "attack.edits[]");
      edit.key.point_id = get_string(je, "point", "attack.edits[]");
      edit.value = get_number(require(je, "value", "attack.edits[]"), "value", "attack.edits[]");
      plan.edits.push_back(std::move(edit));
    }
  }
  plan.toggle = get_bool(doc, "toggle", "attack", false);
  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned()) {
      throw ConfigError("attack: field 'seed' must be a non-negative integer");
    }
    plan.seed = it->get<std::uint64_t>();
  }
  if (doc.contains("dest_override")) {
    plan.dest_override = get_string(doc, "dest_override", "attack");
  }
  validate(plan, registry, duration_s);
  return plan;
}

std::string serialize(const AttackPlan& plan) {
  json doc;
  doc["scenario"] = to_string(plan.scenario);
  doc["start_s"] = plan.start_s;
  doc["end_s"] = plan.end_s;
  doc["attackers"] = plan.attacker_count;
  doc["attacker_node"] = plan.attacker_node;
  doc["victim"] = plan.victim;
  doc["edits"] = json::array();
  for (const auto& e : plan.edits) {
    doc["edits"].push_back({{"node", e.key.node_id}, {"point", e.key.point_id}, {"value", e.value}});
  }
  doc["toggle"] = plan.toggle;
  doc["seed"] = plan.seed;
  if (plan.dest_override) {
    doc["dest_override"] = *plan.dest_override;
  }
  return doc.dump(2);
}

}  // namespace gridwire
