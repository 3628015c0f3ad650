#pragma once

// Discrete-event packet network over a static topology. Packets are routed
// hop by hop along shortest paths; routers may carry a tap that inspects,
// consumes or lets pass every packet transiting them.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gridwire/config.hpp"

namespace gridwire::net {

using Bytes = std::vector<std::uint8_t>;
using Address = std::uint32_t;

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Direction { sent, received, tapped, reinjected };

std::string_view to_string(Direction d);
std::string format_address(Address addr);
std::optional<Address> parse_address(std::string_view text);

struct PacketRecord {
  double time_s = 0.0;
  std::string hop_src;
  std::string hop_dst;
  Address l3_src = 0;
  Address l3_dst = 0;
  Bytes payload;
  Direction direction = Direction::sent;
  std::uint64_t packet_id = 0;

  bool operator==(const PacketRecord&) const = default;
};

enum class Verdict { pass, consume };

class Network;
using TapHandler = std::function<Verdict(const PacketRecord&, Network&)>;
using Receiver = std::function<void(const PacketRecord&)>;

/// Bits serialized per packet on top of the payload on csma links
/// (Ethernet, IPv4 and TCP headers).
inline constexpr std::size_t kFrameOverheadBytes = 54;
inline constexpr double kCsmaBitsPerSecond = 100e6;

class Network {
 public:
  Network(const Topology& topology, std::uint64_t seed);

  const Topology& topology() const { return topology_; }
  Address address_of(std::string_view node) const;
  std::optional<std::string> node_of(Address addr) const;
  /// Next hop from `from` toward `to`, or nullopt when from == to.
  std::optional<std::string> next_hop(std::string_view from, std::string_view to) const;
  std::vector<std::string> path(std::string_view from, std::string_view to) const;
  int hop_count(std::string_view from, std::string_view to) const;

  std::uint64_t send_packet(std::string_view src, Address dst, Bytes payload, double t);
  /// Sends from `node` with an arbitrary source address. Taps downstream
  /// ignore reinjected packets.
  std::uint64_t reinject(std::string_view node, Address spoofed_src, Address dst, Bytes payload, double t);

  void install_tap(std::string_view node, TapHandler handler);
  void set_receiver(std::string_view node, Receiver receiver);

  std::optional<double> next_event_time() const;
  /// Processes every event at or before `t`, including ones scheduled while running.
  void run_until(double t);
  std::optional<double> delivery_time(std::uint64_t packet_id) const;

  const std::vector<PacketRecord>& records() const { return records_; }
  double now() const { return now_; }

 private:
  struct Packet {
    std::uint64_t id = 0;
    Address l3_src = 0;
    Address l3_dst = 0;
    std::string dst_node;
    Bytes payload;
    bool from_tap = false;
  };

  struct Event {
    double time = 0.0;
    std::uint64_t seq = 0;
    std::size_t node = 0;
    std::size_t prev = 0;
    bool first = true;
    std::uint64_t packet = 0;

    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };

  struct Link {
    LinkSpec spec;
    double busy_until = 0.0;
  };

  std::size_t index_of(std::string_view node) const;
  std::uint64_t inject(std::size_t node, Address src, Address dst, Bytes payload, double t, bool from_tap);
  void handle(const Event& ev);
  void forward(const Event& ev, Packet& pkt);
  double draw_jitter(double jitter_ms);

  Topology topology_;
  std::vector<std::vector<std::size_t>> next_;  // next_[from][to]
  std::vector<std::vector<int>> dist_;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> link_index_;
  std::vector<Link> links_;
  std::vector<TapHandler> taps_;
  std::vector<Receiver> receivers_;
  std::map<std::uint64_t, Packet> packets_;
  std::map<std::uint64_t, double> delivered_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::vector<PacketRecord> records_;
  std::mt19937_64 rng_;
  std::uint64_t next_packet_ = 1;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
};

}  // namespace gridwire::net
