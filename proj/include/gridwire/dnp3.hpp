#pragma once

// DNP3 subset: link framing with CRC-DNP, a one-byte transport header for
// fragmentation, and a compact application layer carrying analog and binary
// point values addressed by registry index.
//
// Link frame:  05 64 | len | ctrl | dest(LE16) | src(LE16) | crc(LE16)
//              then user data in 16-byte blocks, each followed by crc(LE16).
//              len = 5 + user data length.
// Transport:   first user data byte, FIN=0x80 FIR=0x40 seq=0x3F.
// Application: function | seq | n_analog | {index(LE16) value(LE32 milli)}*n
//                                | n_binary | {index(LE16) flags}*m
//              flags bit0 = ONLINE, bit7 = state.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridwire/config.hpp"

namespace gridwire::dnp3 {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kStart0 = 0x05;
inline constexpr std::uint8_t kStart1 = 0x64;
inline constexpr std::size_t kHeaderSize = 10;
inline constexpr std::size_t kBlockSize = 16;
inline constexpr std::size_t kMaxUserData = 250;
inline constexpr std::size_t kMaxFragment = kMaxUserData - 1;
inline constexpr std::uint16_t kCrcPoly = 0x3D65;

/// Link control bytes: unconfirmed user data, PRM set, DIR per direction.
inline constexpr std::uint8_t kControlFromMaster = 0xC4;
inline constexpr std::uint8_t kControlFromOutstation = 0x44;

/// Analog values travel as signed 32-bit counts of this quantum.
inline constexpr double kAnalogQuantum = 0.001;

enum class FrameErrorKind { bad_start, header_crc, block_crc, truncated, bad_length, oversize };

class FrameError : public std::runtime_error {
 public:
  FrameError(FrameErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  FrameErrorKind kind() const { return kind_; }

 private:
  FrameErrorKind kind_;
};

enum class AppErrorKind { truncated, bad_index, unknown_function, unknown_key, value_range, too_many_points,
                          bad_transport };

class AppError : public std::runtime_error {
 public:
  AppError(AppErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  AppErrorKind kind() const { return kind_; }

 private:
  AppErrorKind kind_;
};

/// CRC-DNP: poly 0x3D65, zero init, reflected, complemented output.
std::uint16_t crc_dnp(std::span<const std::uint8_t> data);

struct LinkFrame {
  std::uint16_t dest = 0;
  std::uint16_t src = 0;
  std::uint8_t control = 0;
  Bytes user_data;

  bool operator==(const LinkFrame&) const = default;
};

/// Encoded size of a frame carrying `user_len` bytes.
std::size_t frame_size(std::size_t user_len);

Bytes encode_frame(const LinkFrame& frame);
/// Decodes exactly one frame occupying all of `bytes`.
LinkFrame decode_frame(std::span<const std::uint8_t> bytes);
/// Decodes one frame from the front of `bytes`; `consumed` receives its size.
LinkFrame decode_frame_prefix(std::span<const std::uint8_t> bytes, std::size_t& consumed);

enum class FunctionCode : std::uint8_t {
  read_poll = 0x01,
  write = 0x02,
  direct_operate = 0x05,
  response = 0x81,
};

std::string_view to_string(FunctionCode code);
bool is_request(FunctionCode code);

struct AppMessage {
  FunctionCode function = FunctionCode::response;
  std::uint8_t seq = 0;
  std::map<PointKey, double> analog;
  std::map<PointKey, bool> binary;

  bool operator==(const AppMessage&) const = default;
};

/// Fixed-point conversion shared by the codec and the dataset writers.
std::int32_t to_milli(double value);
double from_milli(std::int32_t raw);
double quantize(double value);

std::size_t app_size(std::size_t n_analog, std::size_t n_binary);
Bytes encode_app(const AppMessage& msg, const PointRegistry& registry);
AppMessage decode_app(std::span<const std::uint8_t> bytes, const PointRegistry& registry);
/// Reads only the function code and sequence number.
std::pair<FunctionCode, std::uint8_t> peek_app(std::span<const std::uint8_t> bytes);

/// A reassembled application fragment together with its link addressing.
struct Message {
  std::uint16_t dest = 0;
  std::uint16_t src = 0;
  std::uint8_t control = 0;
  std::uint8_t transport_seq = 0;
  Bytes app;

  bool operator==(const Message&) const = default;
};

/// Splits `msg.app` into link frames of at most kMaxUserData bytes each.
std::vector<LinkFrame> segment(const Message& msg);
Message reassemble(std::span<const LinkFrame> frames);

Bytes encode_frames(std::span<const LinkFrame> frames);
std::vector<LinkFrame> decode_frames(std::span<const std::uint8_t> bytes);

inline Bytes encode_message(const Message& msg) { return encode_frames(segment(msg)); }
inline Message decode_message(std::span<const std::uint8_t> bytes) { return reassemble(decode_frames(bytes)); }

}  // namespace gridwire::dnp3
