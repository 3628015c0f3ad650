#pragma once

// Conservative lockstep time broker. Federates request times; once every
// live federate is waiting, the broker grants the smallest pending request or
// message delivery time to the federates that need it.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gridwire {

class BrokerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DeadlockError : public BrokerError {
 public:
  using BrokerError::BrokerError;
};

struct FederateId {
  std::uint32_t handle = 0;

  auto operator<=>(const FederateId&) const = default;
};

struct TimedMessage {
  std::string src;
  std::string dst;
  double sent_at = 0.0;
  double deliver_at = 0.0;
  std::vector<std::uint8_t> payload;
};

inline constexpr double kTimeNever = std::numeric_limits<double>::infinity();

class Broker {
 public:
  explicit Broker(std::chrono::milliseconds watchdog = std::chrono::seconds(10));

  FederateId register_federate(const std::string& name, const std::vector<std::string>& endpoints);
  std::optional<FederateId> find_federate(std::string_view name) const;
  const std::string& name(FederateId fed) const;
  std::size_t federate_count() const;

  /// Blocks until the broker grants `fed` a time. Throws DeadlockError if no
  /// grant arrives within the watchdog interval.
  double request_time(FederateId fed, double t);

  /// Non-blocking half of request_time for single-threaded drivers.
  void post_request(FederateId fed, double t);
  /// Runs one grant round if every live federate is waiting. Returns the
  /// federates granted in that round, in handle order.
  std::vector<FederateId> advance();

  /// Drops `fed` from time coordination; messages still queued for it are discarded.
  void finalize(FederateId fed);
  bool finalized(FederateId fed) const;

  void send(FederateId from, std::string_view src_endpoint, std::string_view dst_endpoint,
            std::vector<std::uint8_t> payload, double delay_s);
  std::vector<TimedMessage> receive(FederateId fed);

  double granted_time(FederateId fed) const;
  bool started() const;

 private:
  enum class Phase { running, waiting, granted, finalized };

  struct Pending {
    TimedMessage msg;
    std::uint32_t sender = 0;
    std::uint64_t counter = 0;
  };

  struct Federate {
    std::string name;
    Phase phase = Phase::running;
    double granted = 0.0;
    double requested = 0.0;
    std::uint64_t sent = 0;
    std::vector<Pending> inbox;
  };

  void post_locked(std::uint32_t fed, double t);
  std::vector<FederateId> advance_locked();
  Federate& fed_locked(FederateId fed);
  const Federate& fed_locked(FederateId fed) const;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::chrono::milliseconds watchdog_;
  std::vector<Federate> feds_;
  std::map<std::string, std::uint32_t, std::less<>> endpoints_;
  std::vector<Pending> queue_;
  bool started_ = false;
};

}  // namespace gridwire
