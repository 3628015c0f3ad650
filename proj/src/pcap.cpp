#include "gridwire/pcap.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <tuple>

#include <fmt/format.h>

namespace gridwire::pcap {

namespace {

using Bytes = std::vector<std::uint8_t>;

void le16(Bytes& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back(v >> 8);
}
void le32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}
void be16(Bytes& out, std::uint16_t v) {
  out.push_back(v >> 8);
  out.push_back(v & 0xFF);
}
void be32(Bytes& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back((v >> (8 * i)) & 0xFF);
}

std::uint16_t rd_be16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}
std::uint32_t rd_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | b[at + 3];
}
std::uint32_t rd_le32(std::span<const std::uint8_t> b, std::size_t at) {
  return std::uint32_t{b[at]} | (std::uint32_t{b[at + 1]} << 8) | (std::uint32_t{b[at + 2]} << 16) |
         (std::uint32_t{b[at + 3]} << 24);
}
std::uint16_t rd_le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

// RFC 1071 ones' complement sum.
std::uint32_t sum16(std::span<const std::uint8_t> data, std::uint32_t acc = 0) {
  for (std::size_t i = 0; i + 1 < data.size(); i += 2) acc += (data[i] << 8) | data[i + 1];
  if (data.size() % 2) acc += data.back() << 8;
  return acc;
}
std::uint16_t fold(std::uint32_t acc) {
  while (acc >> 16) acc = (acc & 0xFFFF) + (acc >> 16);
  return static_cast<std::uint16_t>(~acc & 0xFFFF);
}

void mac_of(Bytes& out, const std::string& node) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : node) {
    h ^= c;
    h *= 16777619u;
  }
  out.push_back(0x02);
  out.push_back(0x00);
  be32(out, h);
}

std::uint16_t source_port(net::Address src) { return static_cast<std::uint16_t>(40000 + (src & 0xFF)); }

std::uint16_t tcp_checksum(std::uint32_t src, std::uint32_t dst, std::span<const std::uint8_t> segment) {
  Bytes pseudo;
  be32(pseudo, src);
  be32(pseudo, dst);
  pseudo.push_back(0);
  pseudo.push_back(6);
  be16(pseudo, static_cast<std::uint16_t>(segment.size()));
  return fold(sum16(segment, sum16(pseudo)));
}

}  // namespace

Bytes encode(std::span<const net::PacketRecord> records) {
  Bytes out;
  le32(out, kMagic);
  le16(out, kVersionMajor);
  le16(out, kVersionMinor);
  le32(out, 0);  // thiszone
  le32(out, 0);  // sigfigs
  le32(out, kSnapLen);
  le32(out, kLinkTypeEthernet);

  using Flow = std::tuple<net::Address, net::Address>;
  std::map<Flow, std::uint32_t> next_seq;
  std::map<std::pair<Flow, std::uint64_t>, std::uint32_t> assigned;

  for (const auto& rec : records) {
    Flow flow{rec.l3_src, rec.l3_dst};
    auto key = std::make_pair(flow, rec.packet_id);
    auto it = assigned.find(key);
    if (it == assigned.end()) {
      auto& seq = next_seq.try_emplace(flow, 1).first->second;
      it = assigned.emplace(key, seq).first;
      seq += static_cast<std::uint32_t>(rec.payload.size());
    }

    Bytes frame;
    frame.reserve(kEncapsulationSize + rec.payload.size());
    mac_of(frame, rec.hop_dst);
    mac_of(frame, rec.hop_src);
    be16(frame, 0x0800);

    std::size_t ip_at = frame.size();
    frame.push_back(0x45);
    frame.push_back(0);
    be16(frame, static_cast<std::uint16_t>(40 + rec.payload.size()));
    be16(frame, static_cast<std::uint16_t>(rec.packet_id & 0xFFFF));
    be16(frame, 0x4000);
    frame.push_back(64);
    frame.push_back(6);
    be16(frame, 0);
    be32(frame, rec.l3_src);
    be32(frame, rec.l3_dst);
    std::uint16_t ip_sum = fold(sum16(std::span(frame).subspan(ip_at, 20)));
    frame[ip_at + 10] = ip_sum >> 8;
    frame[ip_at + 11] = ip_sum & 0xFF;

    std::size_t tcp_at = frame.size();
    be16(frame, source_port(rec.l3_src));
    be16(frame, kDnp3Port);
    be32(frame, it->second);
    be32(frame, 1);
    frame.push_back(0x50);
    frame.push_back(0x18);  // PSH | ACK
    be16(frame, 65535);
    be16(frame, 0);
    be16(frame, 0);
    frame.insert(frame.end(), rec.payload.begin(), rec.payload.end());
    std::uint16_t tcp_sum = tcp_checksum(rec.l3_src, rec.l3_dst, std::span(frame).subspan(tcp_at));
    frame[tcp_at + 16] = tcp_sum >> 8;
    frame[tcp_at + 17] = tcp_sum & 0xFF;

    auto micros = static_cast<std::uint64_t>(std::llround(rec.time_s * 1e6));
    le32(out, static_cast<std::uint32_t>(micros / 1000000));
    le32(out, static_cast<std::uint32_t>(micros % 1000000));
    le32(out, static_cast<std::uint32_t>(frame.size()));
    le32(out, static_cast<std::uint32_t>(frame.size()));
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

void write_pcap(std::span<const net::PacketRecord> records, const std::filesystem::path& path) {
  Bytes bytes = encode(records);
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error(fmt::format("cannot open capture file {}", path.string()));
  }
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) {
    throw std::runtime_error(fmt::format("failed writing capture file {}", path.string()));
  }
}

Capture parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kGlobalHeaderSize) {
    throw std::runtime_error("capture shorter than the global header");
  }
  Capture cap;
  cap.magic = rd_le32(bytes, 0);
  if (cap.magic != kMagic) {
    throw std::runtime_error(fmt::format("unexpected capture magic 0x{:08X}", cap.magic));
  }
  cap.version_major = rd_le16(bytes, 4);
  cap.version_minor = rd_le16(bytes, 6);
  cap.snaplen = rd_le32(bytes, 16);
  cap.linktype = rd_le32(bytes, 20);
  std::size_t at = kGlobalHeaderSize;
  while (at < bytes.size()) {
    if (bytes.size() - at < kRecordHeaderSize) {
      throw std::runtime_error(fmt::format("truncated record header at offset {}", at));
    }
    CapturedPacket pkt;
    pkt.ts_sec = rd_le32(bytes, at);
    pkt.ts_usec = rd_le32(bytes, at + 4);
    std::uint32_t incl = rd_le32(bytes, at + 8);
    pkt.orig_len = rd_le32(bytes, at + 12);
    at += kRecordHeaderSize;
    if (bytes.size() - at < incl || incl > cap.snaplen || pkt.ts_usec >= 1000000) {
      throw std::runtime_error(fmt::format("malformed record at offset {}", at - kRecordHeaderSize));
    }
    pkt.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(at),
                    bytes.begin() + static_cast<std::ptrdiff_t>(at + incl));
    at += incl;
    cap.packets.push_back(std::move(pkt));
  }
  return cap;
}

Capture read_pcap(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error(fmt::format("cannot open capture file {}", path.string()));
  }
  Bytes bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

TcpSegment parse_segment(std::span<const std::uint8_t> frame) {
  if (frame.size() < kEncapsulationSize || rd_be16(frame, 12) != 0x0800) {
    throw std::runtime_error("not an Ethernet/IPv4 frame");
  }
  auto ip = frame.subspan(14);
  if ((ip[0] >> 4) != 4 || (ip[0] & 0x0F) != 5 || ip[9] != 6) {
    throw std::runtime_error("not a plain IPv4/TCP packet");
  }
  std::uint16_t total = rd_be16(ip, 2);
  if (total > ip.size() || total < 40) {
    throw std::runtime_error("IPv4 total length inconsistent with frame");
  }
  TcpSegment seg;
  seg.ip_checksum_ok = fold(sum16(ip.first(20))) == 0;
  seg.ip_src = rd_be32(ip, 12);
  seg.ip_dst = rd_be32(ip, 16);
  auto tcp = ip.subspan(20, total - 20);
  seg.sport = rd_be16(tcp, 0);
  seg.dport = rd_be16(tcp, 2);
  seg.seq = rd_be32(tcp, 4);
  std::size_t header = (tcp[12] >> 4) * 4u;
  if (header < 20 || header > tcp.size()) {
    throw std::runtime_error("bad TCP data offset");
  }
  seg.tcp_checksum_ok = tcp_checksum(seg.ip_src, seg.ip_dst, tcp) == 0;
  seg.payload.assign(tcp.begin() + static_cast<std::ptrdiff_t>(header), tcp.end());
  return seg;
}

}  // namespace gridwire::pcap
