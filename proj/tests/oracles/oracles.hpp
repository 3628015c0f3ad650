#pragma once

// Brute-force reference implementations for the test suite. Nothing here
// includes or links the engine library.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// Bit-serial CRC: shifts the generator 0x3D65 most-significant bit first
/// over bit-reversed input bytes, then mirrors and complements the register.
std::uint16_t crc_bitwise(const std::vector<std::uint8_t>& data);

/// Connected components of `regions` joined by the `closed` edges, found by
/// repeated breadth-first search. Components and their members are sorted.
std::vector<std::vector<std::string>> reachability(const std::vector<std::string>& regions,
                                                   const std::vector<std::pair<std::string, std::string>>& closed);

/// Hop distances between every pair of nodes via Floyd-Warshall. Unreachable
/// pairs hold -1.
std::map<std::pair<std::string, std::string>, int> all_pairs_paths(
    const std::vector<std::string>& nodes, const std::vector<std::pair<std::string, std::string>>& edges);

struct Report {
  std::string description;
  std::string oracle_value;
  std::string engine_value;
  bool match = false;
};

}  // namespace oracle
