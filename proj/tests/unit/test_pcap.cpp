#include <gtest/gtest.h>

#include <filesystem>

#include "gridwire/pcap.hpp"

using namespace gridwire;

namespace {

net::PacketRecord rec(double t, std::size_t len, std::uint64_t id, net::Address src = 0x0A000001,
                      net::Address dst = 0x0A000003) {
  net::Bytes payload(len);
  for (std::size_t i = 0; i < len; ++i) payload[i] = static_cast<std::uint8_t>(i * 7);
  return net::PacketRecord{t, "cc", "hub", src, dst, payload, net::Direction::sent, id};
}

}  // namespace

TEST(Pcap, EmptyCaptureIsGlobalHeaderOnly) {
  auto bytes = pcap::encode({});
  ASSERT_EQ(bytes.size(), 24u);
  auto cap = pcap::parse(bytes);
  EXPECT_EQ(cap.magic, pcap::kMagic);
  EXPECT_EQ(cap.version_major, 2);
  EXPECT_EQ(cap.version_minor, 4);
  EXPECT_EQ(cap.snaplen, 65535u);
  EXPECT_EQ(cap.linktype, 1u);
  EXPECT_TRUE(cap.packets.empty());
}

TEST(Pcap, SizeIsHeaderPlusEncapsulatedRecords) {
  std::vector<net::PacketRecord> records{rec(0.5, 10, 1), rec(1.25, 0, 2), rec(2.0, 300, 3)};
  auto bytes = pcap::encode(records);
  EXPECT_EQ(bytes.size(), 24u + 3 * (16 + 54) + 10 + 0 + 300);
}

TEST(Pcap, PacketsParseWithValidChecksums) {
  std::vector<net::PacketRecord> records{rec(0.5, 10, 1), rec(1.000001, 33, 2, 0x0A000003, 0x0A000001),
                                         rec(7.25, 292, 3)};
  auto cap = pcap::parse(pcap::encode(records));
  ASSERT_EQ(cap.packets.size(), 3u);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& p = cap.packets[i];
    EXPECT_NEAR(p.time_s(), records[i].time_s, 1e-6);
    EXPECT_EQ(p.orig_len, p.data.size());
    auto seg = pcap::parse_segment(p.data);
    EXPECT_TRUE(seg.ip_checksum_ok);
    EXPECT_TRUE(seg.tcp_checksum_ok);
    EXPECT_EQ(seg.ip_src, records[i].l3_src);
    EXPECT_EQ(seg.ip_dst, records[i].l3_dst);
    EXPECT_EQ(seg.dport, pcap::kDnp3Port);
    EXPECT_EQ(seg.payload, records[i].payload);
  }
}

TEST(Pcap, CorruptedSegmentFailsChecksum) {
  auto cap = pcap::parse(pcap::encode(std::vector<net::PacketRecord>{rec(1, 20, 1)}));
  auto frame = cap.packets[0].data;
  frame.back() ^= 0xFF;
  EXPECT_FALSE(pcap::parse_segment(frame).tcp_checksum_ok);
}

TEST(Pcap, FileRoundTrip) {
  auto path = std::filesystem::temp_directory_path() / "gridwire_pcap_roundtrip.pcap";
  std::vector<net::PacketRecord> records{rec(3, 5, 9)};
  pcap::write_pcap(records, path);
  auto cap = pcap::read_pcap(path);
  ASSERT_EQ(cap.packets.size(), 1u);
  EXPECT_EQ(pcap::parse_segment(cap.packets[0].data).payload, records[0].payload);
  std::filesystem::remove(path);
}

TEST(Pcap, TruncatedFileRejected) {
  auto bytes = pcap::encode(std::vector<net::PacketRecord>{rec(1, 20, 1)});
  bytes.resize(bytes.size() - 1);
  EXPECT_ANY_THROW(pcap::parse(bytes));
  EXPECT_ANY_THROW(pcap::parse(std::vector<std::uint8_t>(10, 0)));
}
