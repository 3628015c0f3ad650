#include "gridwire/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "gridwire/pcap.hpp"

namespace gridwire::harness {

namespace {

void drive_round_robin(Broker& broker, const std::vector<Federate*>& feds) {
  auto resume = [&](Federate* f, std::optional<double> next) {
    if (next) {
      broker.post_request(f->id(), *next);
    } else {
      broker.finalize(f->id());
    }
  };
  for (Federate* f : feds) {
    resume(f, f->initial_request());
  }
  while (true) {
    auto granted = broker.advance();
    if (granted.empty()) {
      bool done = std::all_of(feds.begin(), feds.end(), [&](Federate* f) { return broker.finalized(f->id()); });
      if (done) return;
      throw DeadlockError("no federate can be granted time");
    }
    for (FederateId id : granted) {
      Federate* f = feds.at(id.handle);
      resume(f, f->on_grant(broker.granted_time(id)));
    }
  }
}

void drive_threaded(Broker& broker, const std::vector<Federate*>& feds) {
  std::vector<std::exception_ptr> errors(feds.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < feds.size(); ++i) {
    threads.emplace_back([&, i] {
      Federate* f = feds[i];
      try {
        auto next = f->initial_request();
        while (next) {
          next = f->on_grant(broker.request_time(f->id(), *next));
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
      broker.finalize(f->id());
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void check_options(const RunOptions& o) {
  if (!(o.duration_s > 0.0)) throw ConfigError(fmt::format("duration must be positive, got {}", o.duration_s));
  if (!(o.poll_period_s > 0.0)) throw ConfigError(fmt::format("poll period must be positive, got {}", o.poll_period_s));
  if (!(o.dt_s > 0.0)) throw ConfigError(fmt::format("grid step must be positive, got {}", o.dt_s));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  f << text;
  if (!f) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
}

}  // namespace

std::map<std::uint32_t, std::string> point_ownership(const Topology& topology, const PointRegistry& registry,
                                                     const grid::GridState& grid) {
  std::vector<std::string> microgrids;
  for (const auto& r : grid.regions) {
    if (r != grid::kGridRegion) microgrids.push_back(r);
  }
  auto subs = topology.substations();
  std::map<std::string, std::string> sub_of;
  for (std::size_t i = 0; i < subs.size() && i < microgrids.size(); ++i) {
    sub_of[microgrids[i]] = subs[i];
  }
  std::map<std::uint32_t, std::string> out;
  for (std::uint32_t i = 0; i < registry.size(); ++i) {
    auto owner = grid.owner_of(registry.at(i).key.node_id);
    if (owner) {
      if (auto it = sub_of.find(*owner); it != sub_of.end()) {
        out[i] = it->second;
      }
    }
  }
  return out;
}

RunResult run(const presets::ScenarioRun& scenario, const RunOptions& options) {
  check_options(options);
  validate(scenario.topology);

  std::optional<AttackPlan> plan;
  if (options.attack_enabled && scenario.plan.attacker_count > 0) {
    plan = scenario.plan;
    if (options.override_plan_seed) plan->seed = options.seed;
    validate(*plan, scenario.registry, options.duration_s);
  }

  grid::GridState initial = scenario.grid;
  try {
    grid::read_points(initial, scenario.registry);
  } catch (const grid::GridError& e) {
    throw ConfigError(fmt::format("point registry does not match the grid model: {}", e.what()));
  }

  Broker broker(options.watchdog);
  GridFederate grid_fed(initial, scenario.registry, options.dt_s, options.duration_s);
  NetFederate net_fed(scenario.topology, scenario.registry,
                      point_ownership(scenario.topology, scenario.registry, initial), plan, options.poll_period_s,
                      options.duration_s, options.seed);
  std::vector<Federate*> feds{&grid_fed, &net_fed};
  for (Federate* f : feds) {
    f->attach(broker, broker.register_federate(f->name(), f->endpoints()));
  }

  spdlog::info("running {} for {} s ({} driver)", scenario.name, options.duration_s,
               options.threaded ? "threaded" : "round-robin");
  if (options.threaded) {
    drive_threaded(broker, feds);
  } else {
    drive_round_robin(broker, feds);
  }

  RunResult result;
  result.name = scenario.name;
  result.registry = scenario.registry;
  result.truth = grid_fed.truth();
  result.observed = net_fed.observed();
  result.final_grid = grid_fed.state();
  result.topology = scenario.topology;
  for (Federate* f : feds) {
    result.events.insert(result.events.end(), f->events().begin(), f->events().end());
  }
  std::stable_sort(result.events.begin(), result.events.end(), [](const LogEvent& a, const LogEvent& b) {
    return std::tie(a.time_s, a.federate, a.seq) < std::tie(b.time_s, b.federate, b.seq);
  });
  result.records = net_fed.network().records();
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const net::PacketRecord& a, const net::PacketRecord& b) { return a.time_s < b.time_s; });
  return result;
}

std::string format_value(double value) {
  long long m = std::llround(value * 1000.0);
  unsigned long long mag = m < 0 ? 0ULL - static_cast<unsigned long long>(m) : static_cast<unsigned long long>(m);
  return fmt::format("{}{}.{:03d}", m < 0 ? "-" : "", mag / 1000, static_cast<int>(mag % 1000));
}

std::string timeseries_csv(const std::vector<Sample>& samples, const PointRegistry& registry,
                           std::string_view source) {
  std::vector<const Sample*> order;
  order.reserve(samples.size());
  for (const auto& s : samples) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [&](const Sample* a, const Sample* b) {
    if (a->time_s != b->time_s) return a->time_s < b->time_s;
    return registry.at(a->point).key < registry.at(b->point).key;
  });
  std::string out = "time_s,node,point,value,source\n";
  out.reserve(out.size() + samples.size() * 48);
  for (const Sample* s : order) {
    const auto& key = registry.at(s->point).key;
    fmt::format_to(std::back_inserter(out), "{:.6f},{},{},{},{}\n", s->time_s, key.node_id, key.point_id,
                   format_value(s->value), source);
  }
  return out;
}

std::string events_jsonl(const std::vector<LogEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    nlohmann::ordered_json line{{"time_s", e.time_s}, {"federate", e.federate}, {"type", e.type}};
    for (const auto& [k, v] : e.fields.items()) {
      line[k] = v;
    }
    out += line.dump();
    out += '\n';
  }
  return out;
}

void write_timeseries(const std::vector<Sample>& samples, const PointRegistry& registry, std::string_view source,
                      const std::filesystem::path& path) {
  write_text(path, timeseries_csv(samples, registry, source));
}

void write_outputs(const RunResult& result, const std::filesystem::path& dir, bool pcap) {
  std::filesystem::create_directories(dir);
  write_timeseries(result.truth, result.registry, "truth", dir / "truth.csv");
  write_timeseries(result.observed, result.registry, "observed", dir / "observed.csv");
  write_text(dir / "events.jsonl", events_jsonl(result.events));
  if (pcap) {
    pcap::write_pcap(result.records, dir / "capture.pcap");
  }
}

}  // namespace gridwire::harness
