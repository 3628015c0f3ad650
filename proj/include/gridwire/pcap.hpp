#pragma once

// Classic libpcap capture files. Each packet record is wrapped in synthetic
// Ethernet II, IPv4 and TCP headers so that dissectors pick up the DNP3
// payload on port 20000.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gridwire/netsim.hpp"

namespace gridwire::pcap {

inline constexpr std::uint32_t kMagic = 0xA1B2C3D4;
inline constexpr std::uint16_t kVersionMajor = 2;
inline constexpr std::uint16_t kVersionMinor = 4;
inline constexpr std::uint32_t kSnapLen = 65535;
inline constexpr std::uint32_t kLinkTypeEthernet = 1;
inline constexpr std::uint16_t kDnp3Port = 20000;
inline constexpr std::size_t kGlobalHeaderSize = 24;
inline constexpr std::size_t kRecordHeaderSize = 16;
inline constexpr std::size_t kEncapsulationSize = 14 + 20 + 20;

/// Serializes `records` in the given order.
std::vector<std::uint8_t> encode(std::span<const net::PacketRecord> records);
void write_pcap(std::span<const net::PacketRecord> records, const std::filesystem::path& path);

struct CapturedPacket {
  std::uint32_t ts_sec = 0;
  std::uint32_t ts_usec = 0;
  std::uint32_t orig_len = 0;
  std::vector<std::uint8_t> data;

  double time_s() const { return ts_sec + ts_usec / 1e6; }
};

struct Capture {
  std::uint32_t magic = 0;
  std::uint16_t version_major = 0;
  std::uint16_t version_minor = 0;
  std::uint32_t snaplen = 0;
  std::uint32_t linktype = 0;
  std::vector<CapturedPacket> packets;
};

/// Decoded view of one encapsulated packet.
struct TcpSegment {
  std::uint32_t ip_src = 0;
  std::uint32_t ip_dst = 0;
  std::uint16_t sport = 0;
  std::uint16_t dport = 0;
  std::uint32_t seq = 0;
  bool ip_checksum_ok = false;
  bool tcp_checksum_ok = false;
  std::vector<std::uint8_t> payload;
};

Capture parse(std::span<const std::uint8_t> bytes);
Capture read_pcap(const std::filesystem::path& path);
TcpSegment parse_segment(std::span<const std::uint8_t> frame);

}  // namespace gridwire::pcap
