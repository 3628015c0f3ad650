#include "gridwire/dnp3.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace gridwire::dnp3 {

namespace {

// 0x3D65 bit-reversed; DNP3 shifts data least-significant bit first.
constexpr std::uint16_t kReflectedPoly = 0xA6BC;

constexpr std::array<std::uint16_t, 256> make_crc_table() {
  std::array<std::uint16_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint16_t crc = static_cast<std::uint16_t>(i);
    for (int bit = 0; bit < 8; ++bit) {
      crc = (crc & 1U) ? static_cast<std::uint16_t>((crc >> 1) ^ kReflectedPoly) : static_cast<std::uint16_t>(crc >> 1);
    }
    table[i] = crc;
  }
  return table;
}

constexpr auto kCrcTable = make_crc_table();

void put_le16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_le32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

std::uint16_t get_le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_le32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void append_crc(Bytes& out, std::span<const std::uint8_t> covered) { put_le16(out, crc_dnp(covered)); }

constexpr std::uint8_t kFin = 0x80;
constexpr std::uint8_t kFir = 0x40;
constexpr std::uint8_t kBinaryOnline = 0x01;
constexpr std::uint8_t kBinaryState = 0x80;

}  // namespace

std::uint16_t crc_dnp(std::span<const std::uint8_t> data) {
  std::uint16_t crc = 0;
  for (std::uint8_t byte : data) {
    crc = static_cast<std::uint16_t>((crc >> 8) ^ kCrcTable[(crc ^ byte) & 0xFF]);
  }
  return static_cast<std::uint16_t>(~crc);
}

std::size_t frame_size(std::size_t user_len) {
  std::size_t blocks = (user_len + kBlockSize - 1) / kBlockSize;
  return kHeaderSize + user_len + 2 * blocks;
}

Bytes encode_frame(const LinkFrame& frame) {
  if (frame.user_data.size() > kMaxUserData) {
    throw FrameError(FrameErrorKind::oversize,
                     fmt::format("link frame user data {} exceeds {} bytes", frame.user_data.size(), kMaxUserData));
  }
  Bytes out;
  out.reserve(frame_size(frame.user_data.size()));
  out.push_back(kStart0);
  out.push_back(kStart1);
  out.push_back(static_cast<std::uint8_t>(5 + frame.user_data.size()));
  out.push_back(frame.control);
  put_le16(out, frame.dest);
  put_le16(out, frame.src);
  append_crc(out, std::span(out).first(8));
  for (std::size_t at = 0; at < frame.user_data.size(); at += kBlockSize) {
    auto block = std::span(frame.user_data).subspan(at, std::min(kBlockSize, frame.user_data.size() - at));
    out.insert(out.end(), block.begin(), block.end());
    append_crc(out, block);
  }
  return out;
}

LinkFrame decode_frame_prefix(std::span<const std::uint8_t> bytes, std::size_t& consumed) {
  if (bytes.size() < 2) {
    throw FrameError(FrameErrorKind::truncated, "link frame truncated before start bytes");
  }
  if (bytes[0] != kStart0 || bytes[1] != kStart1) {
    throw FrameError(FrameErrorKind::bad_start,
                     fmt::format("bad link start bytes {:02X} {:02X}", bytes[0], bytes[1]));
  }
  if (bytes.size() < kHeaderSize) {
    throw FrameError(FrameErrorKind::truncated, "link frame truncated inside header");
  }
  std::uint16_t stored = get_le16(bytes, 8);
  if (crc_dnp(bytes.first(8)) != stored) {
    throw FrameError(FrameErrorKind::header_crc, "link header CRC mismatch");
  }
  std::uint8_t length = bytes[2];
  if (length < 5) {
    throw FrameError(FrameErrorKind::bad_length, fmt::format("link length {} below minimum 5", length));
  }
  std::size_t user_len = length - 5U;
  std::size_t total = frame_size(user_len);
  if (bytes.size() < total) {
    throw FrameError(FrameErrorKind::truncated,
                     fmt::format("link frame truncated: need {} bytes, have {}", total, bytes.size()));
  }
  LinkFrame frame;
  frame.control = bytes[3];
  frame.dest = get_le16(bytes, 4);
  frame.src = get_le16(bytes, 6);
  frame.user_data.reserve(user_len);
  std::size_t at = kHeaderSize;
  for (std::size_t remaining = user_len; remaining > 0;) {
    std::size_t n = std::min(kBlockSize, remaining);
    auto block = bytes.subspan(at, n);
    if (crc_dnp(block) != get_le16(bytes, at + n)) {
      throw FrameError(FrameErrorKind::block_crc, fmt::format("data block CRC mismatch at offset {}", at));
    }
    frame.user_data.insert(frame.user_data.end(), block.begin(), block.end());
    at += n + 2;
    remaining -= n;
  }
  consumed = total;
  return frame;
}

LinkFrame decode_frame(std::span<const std::uint8_t> bytes) {
  std::size_t consumed = 0;
  LinkFrame frame = decode_frame_prefix(bytes, consumed);
  if (consumed != bytes.size()) {
    throw FrameError(FrameErrorKind::bad_length,
                     fmt::format("{} trailing bytes after link frame", bytes.size() - consumed));
  }
  return frame;
}

std::string_view to_string(FunctionCode code) {
  switch (code) {
    case FunctionCode::read_poll: return "read_poll";
    case FunctionCode::write: return "write";
    case FunctionCode::direct_operate: return "direct_operate";
    case FunctionCode::response: return "response";
  }
  return "?";
}

bool is_request(FunctionCode code) { return code != FunctionCode::response; }

std::int32_t to_milli(double value) {
  double scaled = std::round(value * 1000.0);
  if (!std::isfinite(scaled) || scaled > std::numeric_limits<std::int32_t>::max() ||
      scaled < std::numeric_limits<std::int32_t>::min()) {
    throw AppError(AppErrorKind::value_range, fmt::format("analog value {} outside 32-bit fixed point range", value));
  }
  return static_cast<std::int32_t>(scaled);
}

double from_milli(std::int32_t raw) { return static_cast<double>(raw) / 1000.0; }

double quantize(double value) { return from_milli(to_milli(value)); }

std::size_t app_size(std::size_t n_analog, std::size_t n_binary) { return 4 + 6 * n_analog + 3 * n_binary; }

Bytes encode_app(const AppMessage& msg, const PointRegistry& registry) {
  if (msg.analog.size() > 255 || msg.binary.size() > 255) {
    throw AppError(AppErrorKind::too_many_points, "more than 255 points in one section");
  }
  auto resolve = [&](const PointKey& key, PointKind expected) {
    auto idx = registry.index_of(key);
    if (!idx || registry.at(*idx).kind != expected) {
      throw AppError(AppErrorKind::unknown_key,
                     fmt::format("point '{}' is not a registered {} point", key.str(), to_string(expected)));
    }
    return static_cast<std::uint16_t>(*idx);
  };

  std::vector<std::pair<std::uint16_t, std::int32_t>> analog;
  for (const auto& [key, value] : msg.analog) {
    analog.emplace_back(resolve(key, PointKind::analog), to_milli(value));
  }
  std::vector<std::pair<std::uint16_t, bool>> binary;
  for (const auto& [key, value] : msg.binary) {
    binary.emplace_back(resolve(key, PointKind::binary), value);
  }
  std::sort(analog.begin(), analog.end());
  std::sort(binary.begin(), binary.end());

  Bytes out;
  out.reserve(app_size(analog.size(), binary.size()));
  out.push_back(static_cast<std::uint8_t>(msg.function));
  out.push_back(static_cast<std::uint8_t>(msg.seq & 0x0F));
  out.push_back(static_cast<std::uint8_t>(analog.size()));
  for (auto [index, raw] : analog) {
    put_le16(out, index);
    put_le32(out, static_cast<std::uint32_t>(raw));
  }
  out.push_back(static_cast<std::uint8_t>(binary.size()));
  for (auto [index, state] : binary) {
    put_le16(out, index);
    out.push_back(static_cast<std::uint8_t>(kBinaryOnline | (state ? kBinaryState : 0)));
  }
  return out;
}

std::pair<FunctionCode, std::uint8_t> peek_app(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2) {
    throw AppError(AppErrorKind::truncated, "application header truncated");
  }
  auto code = static_cast<FunctionCode>(bytes[0]);
  switch (code) {
    case FunctionCode::read_poll:
    case FunctionCode::write:
    case FunctionCode::direct_operate:
    case FunctionCode::response:
      break;
    default:
      throw AppError(AppErrorKind::unknown_function, fmt::format("unknown function code 0x{:02X}", bytes[0]));
  }
  return {code, static_cast<std::uint8_t>(bytes[1] & 0x0F)};
}

AppMessage decode_app(std::span<const std::uint8_t> bytes, const PointRegistry& registry) {
  auto [code, seq] = peek_app(bytes);
  AppMessage msg;
  msg.function = code;
  msg.seq = seq;

  std::size_t at = 2;
  auto need = [&](std::size_t n, const char* what) {
    if (bytes.size() < at + n) {
      throw AppError(AppErrorKind::truncated, fmt::format("application {} truncated", what));
    }
  };
  auto lookup = [&](std::uint16_t index, PointKind expected) -> const PointKey& {
    if (index >= registry.size() || registry.at(index).kind != expected) {
      throw AppError(AppErrorKind::bad_index,
                     fmt::format("{} index {} outside registry of {} points", to_string(expected), index,
                                 registry.size()));
    }
    return registry.at(index).key;
  };

  need(1, "analog count");
  std::size_t n_analog = bytes[at++];
  need(6 * n_analog, "analog section");
  for (std::size_t i = 0; i < n_analog; ++i, at += 6) {
    const auto& key = lookup(get_le16(bytes, at), PointKind::analog);
    msg.analog[key] = from_milli(static_cast<std::int32_t>(get_le32(bytes, at + 2)));
  }
  need(1, "binary count");
  std::size_t n_binary = bytes[at++];
  need(3 * n_binary, "binary section");
  for (std::size_t i = 0; i < n_binary; ++i, at += 3) {
    const auto& key = lookup(get_le16(bytes, at), PointKind::binary);
    msg.binary[key] = (bytes[at + 2] & kBinaryState) != 0;
  }
  if (at != bytes.size()) {
    throw AppError(AppErrorKind::truncated, fmt::format("{} unexpected trailing application bytes", bytes.size() - at));
  }
  return msg;
}

std::vector<LinkFrame> segment(const Message& msg) {
  std::vector<LinkFrame> frames;
  std::size_t at = 0;
  std::uint8_t seq = msg.transport_seq & 0x3F;
  do {
    std::size_t n = std::min(kMaxFragment, msg.app.size() - at);
    LinkFrame f{msg.dest, msg.src, msg.control, {}};
    std::uint8_t header = seq;
    if (at == 0) {
      header |= kFir;
    }
    if (at + n == msg.app.size()) {
      header |= kFin;
    }
    f.user_data.reserve(n + 1);
    f.user_data.push_back(header);
    f.user_data.insert(f.user_data.end(), msg.app.begin() + static_cast<std::ptrdiff_t>(at),
                       msg.app.begin() + static_cast<std::ptrdiff_t>(at + n));
    frames.push_back(std::move(f));
    at += n;
    seq = (seq + 1) & 0x3F;
  } while (at < msg.app.size());
  return frames;
}

Message reassemble(std::span<const LinkFrame> frames) {
  if (frames.empty()) {
    throw AppError(AppErrorKind::bad_transport, "no link frames to reassemble");
  }
  Message msg;
  msg.dest = frames[0].dest;
  msg.src = frames[0].src;
  msg.control = frames[0].control;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.user_data.empty()) {
      throw AppError(AppErrorKind::bad_transport, "link frame without transport header");
    }
    std::uint8_t header = f.user_data[0];
    bool fir = (header & kFir) != 0;
    bool fin = (header & kFin) != 0;
    std::uint8_t seq = header & 0x3F;
    if (i == 0) {
      if (!fir) {
        throw AppError(AppErrorKind::bad_transport, "first segment lacks FIR");
      }
      msg.transport_seq = seq;
    } else if (fir || seq != ((msg.transport_seq + i) & 0x3F) || f.dest != msg.dest || f.src != msg.src) {
      throw AppError(AppErrorKind::bad_transport, "transport segment out of sequence");
    }
    if (fin != (i + 1 == frames.size())) {
      throw AppError(AppErrorKind::bad_transport, "FIN does not mark the final segment");
    }
    msg.app.insert(msg.app.end(), f.user_data.begin() + 1, f.user_data.end());
  }
  return msg;
}

Bytes encode_frames(std::span<const LinkFrame> frames) {
  Bytes out;
  for (const auto& f : frames) {
    Bytes one = encode_frame(f);
    out.insert(out.end(), one.begin(), one.end());
  }
  return out;
}

std::vector<LinkFrame> decode_frames(std::span<const std::uint8_t> bytes) {
  std::vector<LinkFrame> frames;
  std::size_t at = 0;
  while (at < bytes.size()) {
    std::size_t consumed = 0;
    frames.push_back(decode_frame_prefix(bytes.subspan(at), consumed));
    at += consumed;
  }
  return frames;
}

}  // namespace gridwire::dnp3
