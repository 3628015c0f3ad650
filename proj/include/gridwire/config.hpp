#pragma once

// Scenario inputs: topology, point registry and attack plan documents.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gridwire {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NodeKind { control_center, substation, microgrid, router, attacker };
enum class LinkKind { p2p, csma, wifi };

struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::router;

  bool operator==(const NodeSpec&) const = default;
};

struct LinkSpec {
  std::string a;
  std::string b;
  LinkKind kind = LinkKind::p2p;
  double delay_ms = 0.0;
  double jitter_ms = 0.0;

  bool operator==(const LinkSpec&) const = default;
};

struct Topology {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;

  const NodeSpec* find(std::string_view id) const;
  const NodeSpec& control_center() const;
  /// Substation ids in declaration order.
  std::vector<std::string> substations() const;

  bool operator==(const Topology&) const = default;
};

/// Node identifier plus point identifier, e.g. ("inv42", "Pref").
struct PointKey {
  std::string node_id;
  std::string point_id;

  std::string str() const { return node_id + "." + point_id; }
  auto operator<=>(const PointKey&) const = default;
  bool operator==(const PointKey&) const = default;
};

enum class PointKind { analog, binary };

struct PointEntry {
  PointKey key;
  PointKind kind = PointKind::analog;
  std::string unit;
  double default_value = 0.0;
  bool writable = false;

  bool operator==(const PointEntry&) const = default;
};

/// Ordered registry of measurement and setpoint points. The position of an
/// entry is its wire index.
class PointRegistry {
 public:
  PointRegistry() = default;
  explicit PointRegistry(std::vector<PointEntry> entries);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const PointEntry& at(std::size_t index) const { return entries_.at(index); }
  const std::vector<PointEntry>& entries() const { return entries_; }

  std::optional<std::size_t> index_of(const PointKey& key) const;
  const PointEntry* find(const PointKey& key) const;

  bool operator==(const PointRegistry& other) const { return entries_ == other.entries_; }

 private:
  std::vector<PointEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class AttackScenario { data_modification, setpoint_modification, command_injection, custom };

struct PointEdit {
  PointKey key;
  double value = 0.0;

  bool operator==(const PointEdit&) const = default;
};

struct AttackPlan {
  AttackScenario scenario = AttackScenario::custom;
  double start_s = 0.0;
  double end_s = 0.0;
  int attacker_count = 1;
  std::string attacker_node;
  /// Node id or dotted IPv4 address of the victim.
  std::string victim;
  std::vector<PointEdit> edits;
  bool toggle = false;
  std::uint64_t seed = 0;
  /// Rewrite the destination of reinjected packets. Unused by the presets.
  std::optional<std::string> dest_override;

  bool operator==(const AttackPlan&) const = default;
};

std::string_view to_string(NodeKind kind);
std::string_view to_string(LinkKind kind);
std::string_view to_string(PointKind kind);
std::string_view to_string(AttackScenario scenario);

/// Parses a topology document. An absent (or blank) document yields the
/// built-in star topology.
Topology parse_topology(std::optional<std::string_view> text);
Topology default_star_topology();
/// Throws ConfigError unless ids are unique, links reference declared nodes,
/// there is exactly one control center and the graph is connected.
void validate(const Topology& topology);

PointRegistry parse_points(std::string_view text);

/// `duration_s` bounds the window and fills in an omitted `end_s`.
AttackPlan parse_attack(std::string_view text, const PointRegistry& registry, double duration_s);
void validate(const AttackPlan& plan, const PointRegistry& registry, double duration_s);

std::string serialize(const Topology& topology);
std::string serialize(const PointRegistry& registry);
std::string serialize(const AttackPlan& plan);

}  // namespace gridwire
