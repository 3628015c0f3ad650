#include "gridwire/broker.hpp"

#include <algorithm>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace gridwire {

namespace {

template <typename P>
bool delivery_order(const P& a, const P& b) {
  return std::tie(a.msg.deliver_at, a.msg.sent_at, a.sender, a.counter) <
         std::tie(b.msg.deliver_at, b.msg.sent_at, b.sender, b.counter);
}

}  // namespace

Broker::Broker(std::chrono::milliseconds watchdog) : watchdog_(watchdog) {}

FederateId Broker::register_federate(const std::string& name, const std::vector<std::string>& endpoints) {
  std::lock_guard lock(mu_);
  if (started_) {
    throw BrokerError(fmt::format("cannot register federate '{}' after the first time grant", name));
  }
  for (const auto& f : feds_) {
    if (f.name == name) {
      throw BrokerError(fmt::format("duplicate federate name '{}'", name));
    }
  }
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    if (endpoints_.count(endpoints[i]) || std::find(endpoints.begin(), endpoints.begin() + i, endpoints[i]) !=
                                              endpoints.begin() + static_cast<std::ptrdiff_t>(i)) {
      throw BrokerError(fmt::format("duplicate endpoint '{}'", endpoints[i]));
    }
  }
  auto handle = static_cast<std::uint32_t>(feds_.size());
  Federate fed;
  fed.name = name;
  feds_.push_back(std::move(fed));
  for (const auto& ep : endpoints) {
    endpoints_.emplace(ep, handle);
  }
  return FederateId{handle};
}

std::optional<FederateId> Broker::find_federate(std::string_view name) const {
  std::lock_guard lock(mu_);
  for (std::uint32_t i = 0; i < feds_.size(); ++i) {
    if (feds_[i].name == name) {
      return FederateId{i};
    }
  }
  return std::nullopt;
}

const std::string& Broker::name(FederateId fed) const {
  std::lock_guard lock(mu_);
  return fed_locked(fed).name;
}

std::size_t Broker::federate_count() const {
  std::lock_guard lock(mu_);
  return feds_.size();
}

Broker::Federate& Broker::fed_locked(FederateId fed) {
  if (fed.handle >= feds_.size()) {
    throw BrokerError(fmt::format("unknown federate handle {}", fed.handle));
  }
  return feds_[fed.handle];
}

const Broker::Federate& Broker::fed_locked(FederateId fed) const {
  if (fed.handle >= feds_.size()) {
    throw BrokerError(fmt::format("unknown federate handle {}", fed.handle));
  }
  return feds_[fed.handle];
}

void Broker::post_locked(std::uint32_t handle, double t) {
  Federate& f = feds_[handle];
  if (f.phase == Phase::finalized) {
    throw BrokerError(fmt::format("federate '{}' requested time after finalize", f.name));
  }
  if (f.phase == Phase::waiting) {
    throw BrokerError(fmt::format("federate '{}' already has a pending request", f.name));
  }
  if (t < f.granted) {
    throw BrokerError(fmt::format("time regression for '{}': requested {} after grant {}", f.name, t, f.granted));
  }
  started_ = true;
  f.phase = Phase::waiting;
  f.requested = t;
}

void Broker::post_request(FederateId fed, double t) {
  std::lock_guard lock(mu_);
  fed_locked(fed);
  post_locked(fed.handle, t);
}

std::vector<FederateId> Broker::advance() {
  std::lock_guard lock(mu_);
  return advance_locked();
}

std::vector<FederateId> Broker::advance_locked() {
  bool any_live = false;
  double t = kTimeNever;
  for (const auto& f : feds_) {
    if (f.phase == Phase::finalized) {
      continue;
    }
    any_live = true;
    if (f.phase != Phase::waiting) {
      return {};
    }
    t = std::min(t, f.requested);
  }
  if (!any_live) {
    return {};
  }
  for (const auto& p : queue_) {
    t = std::min(t, p.msg.deliver_at);
  }

  std::vector<FederateId> granted;
  for (std::uint32_t i = 0; i < feds_.size(); ++i) {
    Federate& f = feds_[i];
    if (f.phase != Phase::waiting) {
      continue;
    }
    bool has_message = std::any_of(queue_.begin(), queue_.end(), [&](const Pending& p) {
      return p.msg.deliver_at <= t && endpoints_.find(p.msg.dst)->second == i;
    });
    if (f.requested <= t || has_message) {
      f.phase = Phase::granted;
      f.granted = t;
      granted.push_back(FederateId{i});
    }
  }
  auto moved = std::stable_partition(queue_.begin(), queue_.end(), [&](const Pending& p) {
    return !(p.msg.deliver_at <= t && feds_[endpoints_.find(p.msg.dst)->second].phase == Phase::granted);
  });
  for (auto it = moved; it != queue_.end(); ++it) {
    feds_[endpoints_.find(it->msg.dst)->second].inbox.push_back(std::move(*it));
  }
  queue_.erase(moved, queue_.end());
  if (!granted.empty()) {
    spdlog::trace("broker grant t={} to {} federate(s)", t, granted.size());
    cv_.notify_all();
  }
  return granted;
}

double Broker::request_time(FederateId fed, double t) {
  std::unique_lock lock(mu_);
  fed_locked(fed);
  post_locked(fed.handle, t);
  // Whoever observes the last outstanding request runs the grant round.
  bool ok = cv_.wait_for(lock, watchdog_, [&] {
    advance_locked();
    return feds_[fed.handle].phase == Phase::granted;
  });
  if (!ok) {
    throw DeadlockError(fmt::format("federate '{}' waited more than {} ms for a grant at t={}",
                                    feds_[fed.handle].name, watchdog_.count(), t));
  }
  return feds_[fed.handle].granted;
}

void Broker::finalize(FederateId fed) {
  std::lock_guard lock(mu_);
  Federate& f = fed_locked(fed);
  f.phase = Phase::finalized;
  f.inbox.clear();
  std::erase_if(queue_, [&](const Pending& p) { return endpoints_.find(p.msg.dst)->second == fed.handle; });
  cv_.notify_all();
}

bool Broker::finalized(FederateId fed) const {
  std::lock_guard lock(mu_);
  return fed_locked(fed).phase == Phase::finalized;
}

void Broker::send(FederateId from, std::string_view src_endpoint, std::string_view dst_endpoint,
                  std::vector<std::uint8_t> payload, double delay_s) {
  std::lock_guard lock(mu_);
  Federate& f = fed_locked(from);
  auto src = endpoints_.find(src_endpoint);
  if (src == endpoints_.end() || src->second != from.handle) {
    throw BrokerError(fmt::format("federate '{}' does not own endpoint '{}'", f.name, src_endpoint));
  }
  auto dst = endpoints_.find(dst_endpoint);
  if (dst == endpoints_.end()) {
    throw BrokerError(fmt::format("unknown destination endpoint '{}'", dst_endpoint));
  }
  if (!(delay_s >= 0.0)) {
    throw BrokerError(fmt::format("negative message delay {}", delay_s));
  }
  if (feds_[dst->second].phase == Phase::finalized) {
    spdlog::debug("dropping message to finalized endpoint '{}'", dst_endpoint);
    return;
  }
  Pending p;
  p.msg.src = std::string(src_endpoint);
  p.msg.dst = std::string(dst_endpoint);
  p.msg.sent_at = f.granted;
  p.msg.deliver_at = f.granted + delay_s;
  p.msg.payload = std::move(payload);
  p.sender = from.handle;
  p.counter = f.sent++;
  queue_.push_back(std::move(p));
}

std::vector<TimedMessage> Broker::receive(FederateId fed) {
  std::lock_guard lock(mu_);
  Federate& f = fed_locked(fed);
  std::stable_sort(f.inbox.begin(), f.inbox.end(), delivery_order<Pending>);
  std::vector<TimedMessage> out;
  out.reserve(f.inbox.size());
  for (auto& p : f.inbox) {
    out.push_back(std::move(p.msg));
  }
  f.inbox.clear();
  return out;
}

double Broker::granted_time(FederateId fed) const {
  std::lock_guard lock(mu_);
  return fed_locked(fed).granted;
}

bool Broker::started() const {
  std::lock_guard lock(mu_);
  return started_;
}

}  // namespace gridwire
