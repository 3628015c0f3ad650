#pragma once

// Man-in-the-middle engine run from a network tap: decides which packets to
// capture, rewrites point values in responses, injects operate commands
// ahead of intercepted polls and reinjects everything under the original
// sender's address.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridwire/config.hpp"
#include "gridwire/dnp3.hpp"
#include "gridwire/netsim.hpp"

namespace gridwire::attack {

class AttackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ActiveEdit {
  std::size_t registry_index = 0;
  PointKey key;
  PointKind kind = PointKind::analog;
  double attack_value = 0.0;
  double default_value = 0.0;
};

struct MitmState {
  net::Address victim_addr = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::vector<ActiveEdit> edits;
  bool toggle = false;
  std::uint64_t seed = 0;
  bool is_destination = false;
};

struct InjectedCommand {
  PointKey target;
  double value = 0.0;
  bool piggyback = true;
};

struct AttackEvent {
  double time_s = 0.0;
  std::string attacker;
  std::string action;
  std::string target;
  double old_value = 0.0;
  double new_value = 0.0;
};

/// Registry position of `key`; throws AttackError when absent.
std::size_t get_index(const PointRegistry& registry, const PointKey& key);

/// Fair coin for edit `edit` on poll `poll_counter`, derived from `seed`.
bool coin(std::uint64_t seed, std::uint64_t poll_counter, std::size_t edit);

/// Values the edits take on poll `poll_counter`.
std::vector<double> toggle_value(const MitmState& state, std::uint64_t poll_counter);

/// Replaces edited points present in a response payload. Returns nullopt when
/// the payload is not a decodable response.
std::optional<dnp3::Bytes> rewrite_response(const MitmState& state, const std::vector<double>& values,
                                            std::span<const std::uint8_t> payload, const PointRegistry& registry);

/// Builds the direct-operate payload carrying `cmds` and, when piggybacking,
/// the original request unchanged. The operate reuses the request's link
/// addressing and takes the application sequence number preceding it.
std::vector<dnp3::Bytes> inject_command(std::span<const std::uint8_t> request,
                                        const std::vector<InjectedCommand>& cmds, const PointRegistry& registry);

MitmState make_state(const AttackPlan& plan, const PointRegistry& registry, net::Address victim);

class Mitm {
 public:
  Mitm(const AttackPlan& plan, const PointRegistry& registry, const net::Network& network, std::string node);

  /// Capture rule only; no side effects.
  net::Verdict capture_packet(const net::PacketRecord& record) const;
  /// Tap entry point: captures, rewrites or injects, then reinjects.
  net::Verdict on_packet(const net::PacketRecord& record, net::Network& network);

  const MitmState& state() const { return state_; }
  const std::string& node() const { return node_; }
  const std::vector<AttackEvent>& events() const { return events_; }
  std::uint64_t polls_seen() const { return poll_counter_; }

 private:
  void handle_request(const net::PacketRecord& record, net::Network& network);
  void handle_response(const net::PacketRecord& record, net::Network& network);
  void pass_through(const net::PacketRecord& record, net::Network& network, const dnp3::Bytes& payload);

  AttackPlan plan_;
  PointRegistry registry_;
  MitmState state_;
  std::string node_;
  std::optional<net::Address> dest_override_;
  std::vector<double> last_injected_;
  std::uint64_t poll_counter_ = 0;
  std::vector<AttackEvent> events_;
};

/// Nodes hosting attackers: the plan's node first, then further routers
/// and attacker nodes on control-center to substation paths.
std::vector<std::string> attacker_nodes(const AttackPlan& plan, const net::Network& network);

}  // namespace gridwire::attack
