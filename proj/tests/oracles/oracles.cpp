#include "oracles.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace oracle {

namespace {

std::uint8_t reverse8(std::uint8_t b) {
  std::uint8_t r = 0;
  for (int i = 0; i < 8; ++i) {
    if (b & (1u << i)) r |= static_cast<std::uint8_t>(1u << (7 - i));
  }
  return r;
}

std::uint16_t reverse16(std::uint16_t v) {
  std::uint16_t r = 0;
  for (int i = 0; i < 16; ++i) {
    if (v & (1u << i)) r |= static_cast<std::uint16_t>(1u << (15 - i));
  }
  return r;
}

}  // namespace

std::uint16_t crc_bitwise(const std::vector<std::uint8_t>& data) {
  std::uint16_t reg = 0;
  for (std::uint8_t byte : data) {
    std::uint8_t in = reverse8(byte);
    for (int bit = 7; bit >= 0; --bit) {
      bool feedback = ((reg >> 15) & 1u) != ((in >> bit) & 1u);
      reg = static_cast<std::uint16_t>(reg << 1);
      if (feedback) reg ^= 0x3D65;
    }
  }
  return static_cast<std::uint16_t>(~reverse16(reg));
}

std::vector<std::vector<std::string>> reachability(const std::vector<std::string>& regions,
                                                   const std::vector<std::pair<std::string, std::string>>& closed) {
  std::set<std::string> unvisited(regions.begin(), regions.end());
  std::vector<std::vector<std::string>> out;
  while (!unvisited.empty()) {
    std::string start = *unvisited.begin();
    std::vector<std::string> comp;
    std::deque<std::string> q{start};
    unvisited.erase(start);
    while (!q.empty()) {
      std::string cur = q.front();
      q.pop_front();
      comp.push_back(cur);
      for (const auto& [a, b] : closed) {
        std::string other;
        if (a == cur) other = b;
        else if (b == cur) other = a;
        else continue;
        if (unvisited.erase(other)) q.push_back(other);
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::map<std::pair<std::string, std::string>, int> all_pairs_paths(
    const std::vector<std::string>& nodes, const std::vector<std::pair<std::string, std::string>>& edges) {
  const std::size_t n = nodes.size();
  constexpr int inf = 1 << 28;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  auto idx = [&](const std::string& s) {
    return static_cast<std::size_t>(std::find(nodes.begin(), nodes.end(), s) - nodes.begin());
  };
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& [a, b] : edges) {
    d[idx(a)][idx(b)] = 1;
    d[idx(b)][idx(a)] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  std::map<std::pair<std::string, std::string>, int> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[{nodes[i], nodes[j]}] = d[i][j] >= inf ? -1 : d[i][j];
  return out;
}

}  // namespace oracle
