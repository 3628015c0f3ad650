#include "gridwire/netsim.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace gridwire::net {

namespace {

constexpr int kUnreachable = std::numeric_limits<int>::max();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

}  // namespace

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::sent: return "sent";
    case Direction::received: return "received";
    case Direction::tapped: return "tapped";
    case Direction::reinjected: return "reinjected";
  }
  return "?";
}

std::string format_address(Address a) {
  return fmt::format("{}.{}.{}.{}", (a >> 24) & 0xFF, (a >> 16) & 0xFF, (a >> 8) & 0xFF, a & 0xFF);
}

std::optional<Address> parse_address(std::string_view text) {
  Address out = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 4; ++i) {
    unsigned octet = 0;
    auto [next, ec] = std::from_chars(p, end, octet);
    if (ec != std::errc() || octet > 255 || next == p) {
      return std::nullopt;
    }
    out = (out << 8) | octet;
    p = next;
    if (i < 3) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
  }
  if (p != end) return std::nullopt;
  return out;
}

Network::Network(const Topology& topology, std::uint64_t seed) : topology_(topology), rng_(seed) {
  validate(topology_);
  const std::size_t n = topology_.nodes.size();
  if (n > 254) {
    throw NetError("at most 254 nodes fit the 10.0.0.0/24 address plan");
  }
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& l : topology_.links) {
    std::size_t a = index_of(l.a);
    std::size_t b = index_of(l.b);
    adj[a].push_back(b);
    adj[b].push_back(a);
    link_index_[{std::min(a, b), std::max(a, b)}] = links_.size();
    links_.push_back(Link{l, 0.0});
  }
  dist_.assign(n, std::vector<int>(n, kUnreachable));
  for (std::size_t dst = 0; dst < n; ++dst) {
    std::deque<std::size_t> frontier{dst};
    dist_[dst][dst] = 0;
    while (!frontier.empty()) {
      std::size_t u = frontier.front();
      frontier.pop_front();
      for (std::size_t v : adj[u]) {
        if (dist_[v][dst] == kUnreachable) {
          dist_[v][dst] = dist_[u][dst] + 1;
          frontier.push_back(v);
        }
      }
    }
  }
  next_.assign(n, std::vector<std::size_t>(n, kNone));
  for (std::size_t from = 0; from < n; ++from) {
    for (std::size_t to = 0; to < n; ++to) {
      if (from == to || dist_[from][to] == kUnreachable) continue;
      for (std::size_t v : adj[from]) {
        if (dist_[v][to] == dist_[from][to] - 1 &&
            (next_[from][to] == kNone || topology_.nodes[v].id < topology_.nodes[next_[from][to]].id)) {
          next_[from][to] = v;
        }
      }
    }
  }
  taps_.resize(n);
  receivers_.resize(n);
}

std::size_t Network::index_of(std::string_view node) const {
  for (std::size_t i = 0; i < topology_.nodes.size(); ++i) {
    if (topology_.nodes[i].id == node) return i;
  }
  throw NetError(fmt::format("unknown node '{}'", node));
}

Address Network::address_of(std::string_view node) const {
  return (Address{10} << 24) | static_cast<Address>(index_of(node) + 1);
}

std::optional<std::string> Network::node_of(Address addr) const {
  if ((addr >> 8) != (Address{10} << 16)) return std::nullopt;
  Address host = addr & 0xFF;
  if (host == 0 || host > topology_.nodes.size()) return std::nullopt;
  return topology_.nodes[host - 1].id;
}

std::optional<std::string> Network::next_hop(std::string_view from, std::string_view to) const {
  std::size_t hop = next_[index_of(from)][index_of(to)];
  if (hop == kNone) return std::nullopt;
  return topology_.nodes[hop].id;
}

std::vector<std::string> Network::path(std::string_view from, std::string_view to) const {
  std::size_t at = index_of(from);
  std::size_t dst = index_of(to);
  std::vector<std::string> out{topology_.nodes[at].id};
  while (at != dst) {
    at = next_[at][dst];
    out.push_back(topology_.nodes[at].id);
  }
  return out;
}

int Network::hop_count(std::string_view from, std::string_view to) const {
  return dist_[index_of(from)][index_of(to)];
}

std::uint64_t Network::send_packet(std::string_view src, Address dst, Bytes payload, double t) {
  std::size_t node = index_of(src);
  return inject(node, address_of(src), dst, std::move(payload), t, false);
}

std::uint64_t Network::reinject(std::string_view node, Address spoofed_src, Address dst, Bytes payload, double t) {
  return inject(index_of(node), spoofed_src, dst, std::move(payload), t, true);
}

std::uint64_t Network::inject(std::size_t node, Address src, Address dst, Bytes payload, double t, bool from_tap) {
  auto dst_node = node_of(dst);
  if (!dst_node) {
    throw NetError(fmt::format("destination {} does not resolve to a node", format_address(dst)));
  }
  if (t < now_) {
    throw NetError(fmt::format("packet injected at {} before current time {}", t, now_));
  }
  std::uint64_t id = next_packet_++;
  packets_.emplace(id, Packet{id, src, dst, *dst_node, std::move(payload), from_tap});
  queue_.push(Event{t, next_seq_++, node, node, true, id});
  return id;
}

void Network::install_tap(std::string_view node, TapHandler handler) {
  auto& slot = taps_[index_of(node)];
  if (slot) {
    throw NetError(fmt::format("node '{}' already has a tap", node));
  }
  slot = std::move(handler);
}

void Network::set_receiver(std::string_view node, Receiver receiver) { receivers_[index_of(node)] = std::move(receiver); }

std::optional<double> Network::next_event_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.top().time;
}

void Network::run_until(double t) {
  while (!queue_.empty() && queue_.top().time <= t) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = std::max(now_, ev.time);
    handle(ev);
  }
  now_ = std::max(now_, t);
}

std::optional<double> Network::delivery_time(std::uint64_t packet_id) const {
  auto it = delivered_.find(packet_id);
  if (it == delivered_.end()) return std::nullopt;
  return it->second;
}

void Network::handle(const Event& ev) {
  Packet& pkt = packets_.at(ev.packet);
  const std::string& here = topology_.nodes[ev.node].id;
  const std::string& prev = topology_.nodes[ev.prev].id;

  if (here == pkt.dst_node) {
    PacketRecord rec{ev.time, prev, here, pkt.l3_src, pkt.l3_dst, pkt.payload, Direction::received, pkt.id};
    records_.push_back(rec);
    delivered_[pkt.id] = ev.time;
    if (receivers_[ev.node]) {
      receivers_[ev.node](rec);
    }
    packets_.erase(ev.packet);
    return;
  }

  if (!ev.first && !pkt.from_tap && taps_[ev.node]) {
    PacketRecord rec{ev.time, prev, here, pkt.l3_src, pkt.l3_dst, pkt.payload, Direction::tapped, pkt.id};
    if (taps_[ev.node](rec, *this) == Verdict::consume) {
      records_.push_back(std::move(rec));
      packets_.erase(ev.packet);
      return;
    }
  }
  forward(ev, packets_.at(ev.packet));
}

double Network::draw_jitter(double jitter_ms) {
  // 53 random bits mapped to [0, 1); independent of the standard library's
  // distribution implementations.
  double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return u * jitter_ms / 1000.0;
}

void Network::forward(const Event& ev, Packet& pkt) {
  std::size_t dst = index_of(pkt.dst_node);
  std::size_t hop = next_[ev.node][dst];
  if (hop == kNone) {
    throw NetError(fmt::format("no route from '{}' to '{}'", topology_.nodes[ev.node].id, pkt.dst_node));
  }
  Link& link = links_.at(link_index_.at({std::min(ev.node, hop), std::max(ev.node, hop)}));
  double delay = link.spec.delay_ms / 1000.0;
  double depart = ev.time;
  double arrive = ev.time + delay;
  switch (link.spec.kind) {
    case LinkKind::p2p:
      break;
    case LinkKind::csma: {
      double tx = static_cast<double>((pkt.payload.size() + kFrameOverheadBytes) * 8) / kCsmaBitsPerSecond;
      depart = std::max(ev.time, link.busy_until);
      link.busy_until = depart + tx;
      arrive = depart + tx + delay;
      break;
    }
    case LinkKind::wifi:
      arrive += draw_jitter(link.spec.jitter_ms);
      break;
  }
  Direction dir = (ev.first && pkt.from_tap) ? Direction::reinjected : Direction::sent;
  records_.push_back(PacketRecord{depart, topology_.nodes[ev.node].id, topology_.nodes[hop].id, pkt.l3_src,
                                  pkt.l3_dst, pkt.payload, dir, pkt.id});
  queue_.push(Event{arrive, next_seq_++, hop, ev.node, false, pkt.id});
}

}  // namespace gridwire::net
