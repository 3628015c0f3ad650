#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "gridwire/broker.hpp"

using namespace gridwire;

namespace {

std::vector<std::uint8_t> bytes(std::uint8_t v) { return {v}; }

}  // namespace

TEST(Broker, RegistrationGivesDistinctHandles) {
  Broker b;
  auto grid = b.register_federate("grid", {"mg1", "mg2", "mg3"});
  auto net = b.register_federate("net", {"cc"});
  EXPECT_NE(grid, net);
  EXPECT_EQ(b.name(net), "net");
}

TEST(Broker, DuplicateNameRejected) {
  Broker b;
  b.register_federate("grid", {"a"});
  EXPECT_THROW(b.register_federate("grid", {"b"}), BrokerError);
}

TEST(Broker, DuplicateEndpointRejected) {
  Broker b;
  b.register_federate("grid", {"a"});
  EXPECT_THROW(b.register_federate("net", {"a"}), BrokerError);
}

TEST(Broker, RegistrationAfterStartRejected) {
  Broker b;
  auto f = b.register_federate("grid", {"a"});
  EXPECT_EQ(b.request_time(f, 1.0), 1.0);
  EXPECT_THROW(b.register_federate("late", {"b"}), BrokerError);
}

TEST(Broker, SingleFederateGetsItsRequest) {
  Broker b;
  auto f = b.register_federate("only", {"x"});
  EXPECT_EQ(b.request_time(f, 4.0), 4.0);
}

TEST(Broker, TimeRegressionRejected) {
  Broker b;
  auto f = b.register_federate("only", {"x"});
  b.request_time(f, 2.0);
  EXPECT_THROW(b.request_time(f, 1.0), BrokerError);
}

TEST(Broker, PendingMessageForcesEarlierGrant) {
  Broker b;
  auto a = b.register_federate("A", {"a"});
  auto c = b.register_federate("B", {"b"});
  b.post_request(a, 4.0);
  b.post_request(c, 0.0);
  auto g = b.advance();
  ASSERT_EQ(g, std::vector<FederateId>{c});
  b.send(c, "b", "a", bytes(1), 2.5);
  b.post_request(c, 10.0);
  g = b.advance();
  ASSERT_EQ(g, std::vector<FederateId>{a});
  EXPECT_EQ(b.granted_time(a), 2.5);
  auto msgs = b.receive(a);
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_EQ(msgs[0].deliver_at, 2.5);
  EXPECT_EQ(msgs[0].sent_at, 0.0);
}

TEST(Broker, UnknownEndpointRejected) {
  Broker b;
  auto a = b.register_federate("A", {"a"});
  EXPECT_THROW(b.send(a, "a", "zz", bytes(1), 0.0), BrokerError);
  EXPECT_THROW(b.send(a, "zz", "a", bytes(1), 0.0), BrokerError);
}

TEST(Broker, ReceiveEmptyWhenNothingPending) {
  Broker b;
  auto a = b.register_federate("A", {"a"});
  b.request_time(a, 1.0);
  EXPECT_TRUE(b.receive(a).empty());
}

TEST(Broker, BoundaryDeliveryIsInclusiveAndOrdered) {
  Broker b;
  auto a = b.register_federate("A", {"a"});
  auto s = b.register_federate("S", {"s"});
  b.post_request(a, 0.0);
  b.post_request(s, 0.0);
  b.advance();
  b.send(s, "s", "a", bytes(2), 2.5);
  b.send(s, "s", "a", bytes(1), 2.4);
  b.send(s, "s", "a", bytes(3), 2.5);
  b.post_request(s, 100.0);
  b.post_request(a, 2.5);
  std::vector<std::uint8_t> order;
  while (b.granted_time(a) < 2.5) {
    if (b.advance().empty()) break;
    for (auto& m : b.receive(a)) order.push_back(m.payload[0]);
    if (b.granted_time(a) < 2.5) b.post_request(a, 2.5);
  }
  EXPECT_EQ(b.granted_time(a), 2.5);
  EXPECT_EQ(order, (std::vector<std::uint8_t>{1, 2, 3}));
}

TEST(Broker, SameTimeMessageDeliveredOnFollowUpGrant) {
  Broker b;
  auto a = b.register_federate("A", {"a"});
  auto s = b.register_federate("S", {"s"});
  b.post_request(a, 1.0);
  b.post_request(s, 1.0);
  ASSERT_EQ(b.advance().size(), 2u);
  b.send(s, "s", "a", bytes(9), 0.0);
  b.post_request(a, 5.0);
  b.post_request(s, 5.0);
  auto g = b.advance();
  ASSERT_EQ(g, std::vector<FederateId>{a});
  EXPECT_EQ(b.granted_time(a), 1.0);
  EXPECT_EQ(b.receive(a).size(), 1u);
}

TEST(Broker, FinalizedFederateNoLongerBlocks) {
  Broker b;
  auto a = b.register_federate("A", {"a"});
  auto s = b.register_federate("S", {"s"});
  b.post_request(a, 3.0);
  EXPECT_TRUE(b.advance().empty());
  b.finalize(s);
  EXPECT_EQ(b.advance(), std::vector<FederateId>{a});
  EXPECT_EQ(b.granted_time(a), 3.0);
}

TEST(Broker, WatchdogFiresWhenPeerNeverRequests) {
  Broker b(std::chrono::milliseconds(50));
  auto a = b.register_federate("A", {"a"});
  b.register_federate("silent", {"s"});
  EXPECT_THROW(b.request_time(a, 1.0), DeadlockError);
}

namespace {

struct Trace {
  std::vector<std::tuple<int, double, std::vector<std::uint8_t>>> grants;
  bool operator==(const Trace&) const = default;
};

// Each federate requests increasing times and sends a message to the next
// federate at every grant; delays and steps come from a per-federate stream.
struct Walker {
  int index;
  int peers;
  std::mt19937_64 rng;
  double t = 0.0;
  int steps = 0;

  std::optional<double> next() {
    if (steps >= 60) return std::nullopt;
    t += 0.1 * static_cast<double>(1 + rng() % 7);
    return t;
  }
};

Trace run_walkers(bool threaded, int count, std::uint64_t seed) {
  Broker b;
  std::vector<Walker> walkers;
  std::vector<FederateId> ids;
  for (int i = 0; i < count; ++i) {
    ids.push_back(b.register_federate("w" + std::to_string(i), {"e" + std::to_string(i)}));
    walkers.push_back(Walker{i, count, std::mt19937_64(seed * 31 + i)});
  }
  std::vector<Trace> traces(count);
  auto on_grant = [&](int i, double g) {
    Walker& w = walkers[i];
    ++w.steps;
    std::vector<std::uint8_t> seen;
    for (auto& m : b.receive(ids[i])) {
      EXPECT_LE(m.deliver_at, g);
      EXPECT_GE(m.deliver_at, m.sent_at);
      seen.push_back(m.payload[0]);
    }
    traces[i].grants.emplace_back(i, g, seen);
    int to = (i + 1) % count;
    b.send(ids[i], "e" + std::to_string(i), "e" + std::to_string(to),
           {static_cast<std::uint8_t>(w.rng() & 0xFF)}, 0.05 * static_cast<double>(w.rng() % 5));
    if (g < w.t) return std::optional<double>(w.t);
    return w.next();
  };
  if (threaded) {
    std::vector<std::thread> threads;
    for (int i = 0; i < count; ++i) {
      threads.emplace_back([&, i] {
        auto next = walkers[i].next();
        double last = 0.0;
        while (next) {
          double g = b.request_time(ids[i], *next);
          EXPECT_GE(g, last);
          last = g;
          next = on_grant(i, g);
        }
        b.finalize(ids[i]);
      });
    }
    for (auto& th : threads) th.join();
  } else {
    for (int i = 0; i < count; ++i) b.post_request(ids[i], *walkers[i].next());
    while (true) {
      auto granted = b.advance();
      if (granted.empty()) break;
      for (auto id : granted) {
        auto next = on_grant(static_cast<int>(id.handle), b.granted_time(id));
        if (next) b.post_request(id, *next);
        else b.finalize(id);
      }
    }
  }
  Trace all;
  for (auto& t : traces) all.grants.insert(all.grants.end(), t.grants.begin(), t.grants.end());
  return all;
}

}  // namespace

TEST(Broker, RoundRobinRunsAreDeterministicAndTerminate) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Trace a = run_walkers(false, 3, seed);
    Trace b = run_walkers(false, 3, seed);
    EXPECT_EQ(a, b);
    EXPECT_FALSE(a.grants.empty());
  }
}

TEST(Broker, ThreadedDriverMatchesRoundRobin) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    EXPECT_EQ(run_walkers(true, 3, seed), run_walkers(false, 3, seed)) << "seed " << seed;
  }
}
