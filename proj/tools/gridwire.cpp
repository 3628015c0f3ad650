#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gridwire/config.hpp"
#include "gridwire/harness.hpp"
#include "gridwire/presets.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDeadlock = 3;

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw gridwire::ConfigError(fmt::format("cannot read '{}'", path));
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("gridwire");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("GRIDWIRE_LOG")) {
    auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string_view(env) != "off") {
      spdlog::warn("unrecognised GRIDWIRE_LOG value '{}'", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

struct RunArgs {
  std::string scenario;
  std::string topology;
  std::string attack;
  std::string points;
  double duration = 300.0;
  double poll = 4.0;
  double dt = 0.1;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool pcap = false;
  bool threaded = false;
  bool no_attack = false;
};

int run_command(const RunArgs& a) {
  using namespace gridwire;
  auto scenario = presets::parse_scenario(a.scenario);
  if (!scenario) {
    throw ConfigError(fmt::format("unknown scenario '{}'", a.scenario));
  }
  auto runs = presets::preset(*scenario, a.duration);
  for (auto& r : runs) {
    if (!a.points.empty()) r.registry = parse_points(slurp(a.points));
    if (!a.topology.empty()) r.topology = parse_topology(slurp(a.topology));
    if (!a.attack.empty()) r.plan = parse_attack(slurp(a.attack), r.registry, a.duration);
  }

  harness::RunOptions opts;
  opts.duration_s = a.duration;
  opts.poll_period_s = a.poll;
  opts.dt_s = a.dt;
  if (a.seed) {
    opts.seed = *a.seed;
    opts.override_plan_seed = true;
  }
  opts.threaded = a.threaded;
  opts.attack_enabled = !a.no_attack;

  for (const auto& r : runs) {
    std::filesystem::path dir = runs.size() == 1 ? std::filesystem::path(a.out) : std::filesystem::path(a.out) / r.name;
    auto result = harness::run(r, opts);
    harness::write_outputs(result, dir, a.pcap);
    std::cout << fmt::format("{}: {} truth rows, {} observed rows, {} events, {} packet records -> {}\n", r.name,
                             result.truth.size(), result.observed.size(), result.events.size(),
                             result.records.size(), dir.string());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Co-simulation of a microgrid feeder, its DNP3 SCADA network and a man-in-the-middle attacker"};
  app.require_subcommand(1);

  RunArgs args;
  auto* run = app.add_subcommand("run", "Run a scenario preset and write its datasets");
  run->add_option("--scenario", args.scenario, "s1|s2|s3a|s3b|s3c|s4")->required();
  run->add_option("--topology", args.topology, "Topology document replacing the preset's");
  run->add_option("--attack", args.attack, "Attack plan document replacing the preset's");
  run->add_option("--points", args.points, "Point registry document replacing the preset's");
  run->add_option("--duration", args.duration, "Simulated seconds")->capture_default_str();
  run->add_option("--poll", args.poll, "Poll period in seconds")->capture_default_str();
  run->add_option("--dt", args.dt, "Grid step in seconds")->capture_default_str();
  run->add_option("--seed", args.seed, "Seed for the network and the attack plan");
  run->add_option("--out", args.out, "Output directory")->required();
  run->add_flag("--pcap", args.pcap, "Also write capture.pcap");
  run->add_flag("--threaded", args.threaded, "Run each federate on its own thread");
  run->add_flag("--no-attack", args.no_attack, "Disable the attack plan (baseline run)");

  auto* calibrate = app.add_subcommand("calibrate", "Re-run the droop gain calibration sweep");
  double target = gridwire::presets::kCalibrationTargetHz;
  calibrate->add_option("--target", target, "Settled MG3 frequency to hit")->capture_default_str();

  std::string dump_scenario;
  std::string dump_what = "attack";
  auto* dump = app.add_subcommand("preset", "Print a preset's topology, points or attack document");
  dump->add_option("--scenario", dump_scenario, "Scenario name")->required();
  dump->add_option("--what", dump_what, "topology|points|attack")
      ->check(CLI::IsMember({"topology", "points", "attack"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) {
      return run_command(args);
    }
    if (*calibrate) {
      auto r = gridwire::presets::calibrate_droop_gain(gridwire::presets::default_grid(), target);
      std::cout << fmt::format("droop_gain={:.6f} settled_hz={:.6f} iterations={} frozen={:.4f}\n", r.gain,
                               r.settled_hz, r.iterations, gridwire::presets::kDroopGain);
      return 0;
    }
    if (*dump) {
      auto s = gridwire::presets::parse_scenario(dump_scenario);
      if (!s) throw gridwire::ConfigError(fmt::format("unknown scenario '{}'", dump_scenario));
      for (const auto& r : gridwire::presets::preset(*s)) {
        if (dump_what == "topology") std::cout << gridwire::serialize(r.topology) << "\n";
        if (dump_what == "points") std::cout << gridwire::serialize(r.registry) << "\n";
        if (dump_what == "attack") std::cout << gridwire::serialize(r.plan) << "\n";
      }
      return 0;
    }
  } catch (const gridwire::ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const gridwire::DeadlockError& e) {
    spdlog::error("deadlock: {}", e.what());
    return kExitDeadlock;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
