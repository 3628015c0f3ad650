#pragma once

// The two co-simulation participants. The grid federate owns the physical
// model; the network federate owns the packet network, the control-center
// master, the substation outstations and any attackers.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridwire/attack.hpp"
#include "gridwire/broker.hpp"
#include "gridwire/config.hpp"
#include "gridwire/grid.hpp"
#include "gridwire/netsim.hpp"

namespace gridwire {

struct Sample {
  double time_s = 0.0;
  std::uint32_t point = 0;  // registry index
  double value = 0.0;
};

struct LogEvent {
  double time_s = 0.0;
  std::string federate;
  std::uint64_t seq = 0;
  std::string type;
  nlohmann::ordered_json fields;
};

class Federate {
 public:
  virtual ~Federate() = default;

  virtual std::string name() const = 0;
  virtual std::vector<std::string> endpoints() const = 0;

  void attach(Broker& broker, FederateId id) {
    broker_ = &broker;
    id_ = id;
  }
  FederateId id() const { return id_; }

  /// First time to request, or nullopt to leave immediately.
  virtual std::optional<double> initial_request() = 0;
  /// Handles a grant and returns the next time to request, or nullopt to finalize.
  virtual std::optional<double> on_grant(double t) = 0;

  const std::vector<LogEvent>& events() const { return events_; }

 protected:
  void log(double t, std::string type, nlohmann::ordered_json fields = nlohmann::ordered_json::object());

  Broker* broker_ = nullptr;
  FederateId id_;
  std::vector<LogEvent> events_;
};

inline constexpr const char* kGridEndpoint = "grid";

class GridFederate : public Federate {
 public:
  GridFederate(grid::GridState state, PointRegistry registry, double dt_s, double duration_s);

  std::string name() const override { return "grid"; }
  std::vector<std::string> endpoints() const override { return {kGridEndpoint}; }
  std::optional<double> initial_request() override;
  std::optional<double> on_grant(double t) override;

  const grid::GridState& state() const { return state_; }
  const std::vector<Sample>& truth() const { return truth_; }

 private:
  double step_time(long k) const { return static_cast<double>(k) * dt_; }
  void record_truth();
  void apply_write(double t, const nlohmann::json& point);

  grid::GridState state_;
  PointRegistry registry_;
  double dt_;
  double duration_;
  long next_step_ = 1;
  long last_step_ = 0;
  std::vector<Sample> truth_;
};

class NetFederate : public Federate {
 public:
  /// `ownership` maps each registry index to the substation reporting it.
  NetFederate(Topology topology, PointRegistry registry, std::map<std::uint32_t, std::string> ownership,
              std::optional<AttackPlan> plan, double poll_period_s, double duration_s, std::uint64_t seed);

  std::string name() const override { return "net"; }
  std::vector<std::string> endpoints() const override { return substations_; }
  std::optional<double> initial_request() override;
  std::optional<double> on_grant(double t) override;

  const net::Network& network() const { return network_; }
  const std::vector<Sample>& observed() const { return observed_; }
  const std::vector<std::unique_ptr<attack::Mitm>>& attackers() const { return attackers_; }

 private:
  struct PendingRead {
    std::string substation;
    net::Address master = 0;
    std::uint8_t seq = 0;
  };

  struct Master {
    std::uint8_t seq = 15;
    std::uint8_t transport_seq = 0;
    bool awaiting = false;
  };

  struct Outstation {
    std::uint16_t link_address = 0;
    std::uint8_t transport_seq = 0;
  };

  void poll(double t);
  void on_control_center(const net::PacketRecord& rec);
  void on_substation(const std::string& sub, const net::PacketRecord& rec);
  void on_snapshot(double t, const TimedMessage& msg);
  void respond(const std::string& sub, net::Address master, const dnp3::AppMessage& app, double t);
  void drain_attack_events();
  std::optional<double> next_time() const;

  Topology topology_;
  PointRegistry registry_;
  std::map<std::uint32_t, std::string> ownership_;
  std::vector<std::string> substations_;
  std::string control_center_;
  net::Network network_;
  std::vector<std::unique_ptr<attack::Mitm>> attackers_;
  std::vector<std::size_t> attack_events_seen_;
  double poll_period_;
  double duration_;
  long next_poll_ = 0;
  double now_ = 0.0;
  std::map<std::string, Master> masters_;
  std::map<std::string, Outstation> outstations_;
  std::map<std::uint64_t, PendingRead> pending_;
  std::uint64_t next_tag_ = 0;
  std::vector<Sample> observed_;
};

/// Link-layer address of a topology node: its declaration position plus one.
std::uint16_t link_address(const Topology& topology, std::string_view node);

}  // namespace gridwire
