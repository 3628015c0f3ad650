#pragma once

// Runs one scenario end to end and writes its datasets.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridwire/federates.hpp"
#include "gridwire/netsim.hpp"
#include "gridwire/presets.hpp"

namespace gridwire::harness {

struct RunOptions {
  double duration_s = 300.0;
  double poll_period_s = 4.0;
  double dt_s = 0.1;
  std::uint64_t seed = 42;
  /// Replaces the attack plan's own seed as well.
  bool override_plan_seed = false;
  bool attack_enabled = true;
  bool threaded = false;
  std::chrono::milliseconds watchdog{10000};
};

struct RunResult {
  std::string name;
  PointRegistry registry;
  std::vector<Sample> truth;
  std::vector<Sample> observed;
  std::vector<LogEvent> events;
  /// Packet records stable-sorted by time.
  std::vector<net::PacketRecord> records;
  grid::GridState final_grid;
  Topology topology;
};

/// Registry index -> substation id. Substation i (declaration order) reports
/// the points of the i-th microgrid.
std::map<std::uint32_t, std::string> point_ownership(const Topology& topology, const PointRegistry& registry,
                                                     const grid::GridState& grid);

RunResult run(const presets::ScenarioRun& scenario, const RunOptions& options);

/// Three-decimal text of a value quantized to the wire's analog resolution.
std::string format_value(double value);

std::string timeseries_csv(const std::vector<Sample>& samples, const PointRegistry& registry,
                           std::string_view source);
std::string events_jsonl(const std::vector<LogEvent>& events);

void write_timeseries(const std::vector<Sample>& samples, const PointRegistry& registry, std::string_view source,
                      const std::filesystem::path& path);
/// Writes truth.csv, observed.csv, events.jsonl and, if asked, capture.pcap.
void write_outputs(const RunResult& result, const std::filesystem::path& dir, bool pcap);

}  // namespace gridwire::harness
