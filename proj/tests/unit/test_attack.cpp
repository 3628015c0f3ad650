#include <gtest/gtest.h>

#include "gridwire/attack.hpp"
#include "gridwire/presets.hpp"

using namespace gridwire;
using namespace gridwire::attack;

namespace {

const PointRegistry& registry() {
  static const PointRegistry r = presets::default_registry();
  return r;
}

dnp3::Bytes poll(std::uint8_t seq) {
  dnp3::AppMessage app;
  app.function = dnp3::FunctionCode::read_poll;
  app.seq = seq;
  return dnp3::encode_message(dnp3::Message{3, 1, dnp3::kControlFromMaster, 5, dnp3::encode_app(app, registry())});
}

dnp3::Bytes response(std::uint8_t seq, double qref) {
  dnp3::AppMessage app;
  app.seq = seq;
  app.analog[{"inv42", "Qref"}] = qref;
  app.analog[{"inv42", "Pref"}] = 450e3;
  app.binary[{"sw18to135", "state"}] = true;
  return dnp3::encode_message(
      dnp3::Message{1, 3, dnp3::kControlFromOutstation, 9, dnp3::encode_app(app, registry())});
}

AttackPlan plan(AttackScenario s, std::vector<PointEdit> edits, bool toggle = false) {
  AttackPlan p;
  p.scenario = s;
  p.start_s = 10;
  p.end_s = 20;
  p.attacker_node = "hub";
  p.victim = "sub1";
  p.edits = std::move(edits);
  p.toggle = toggle;
  p.seed = 42;
  return p;
}

net::PacketRecord record(const net::Network& n, double t, std::string_view src, std::string_view dst,
                         dnp3::Bytes payload) {
  return net::PacketRecord{t, "cc", "hub", n.address_of(src), n.address_of(dst), std::move(payload),
                           net::Direction::tapped, 1};
}

}  // namespace

TEST(Index, LooksUpRegistryPosition) {
  EXPECT_EQ(get_index(registry(), registry().at(7).key), 7u);
  EXPECT_THROW(get_index(registry(), {"inv42", "nope"}), AttackError);
}

TEST(Capture, WindowAndVictimRules) {
  net::Network n(presets::star_topology(), 1);
  Mitm m(plan(AttackScenario::data_modification, {}), registry(), n, "hub");
  EXPECT_EQ(m.capture_packet(record(n, 15, "cc", "sub1", {})), net::Verdict::consume);
  EXPECT_EQ(m.capture_packet(record(n, 10, "cc", "sub1", {})), net::Verdict::consume);
  EXPECT_EQ(m.capture_packet(record(n, 20, "cc", "sub1", {})), net::Verdict::consume);
  EXPECT_EQ(m.capture_packet(record(n, 9.99, "cc", "sub1", {})), net::Verdict::pass);
  EXPECT_EQ(m.capture_packet(record(n, 20.01, "cc", "sub1", {})), net::Verdict::pass);
  EXPECT_EQ(m.capture_packet(record(n, 15, "cc", "sub2", {})), net::Verdict::pass);
  EXPECT_EQ(m.capture_packet(record(n, 15, "sub1", "cc", {})), net::Verdict::pass);
}

TEST(Capture, CustomScenarioAlsoTakesVictimTraffic) {
  net::Network n(presets::star_topology(), 1);
  Mitm m(plan(AttackScenario::custom, {}), registry(), n, "hub");
  EXPECT_EQ(m.capture_packet(record(n, 15, "sub1", "cc", {})), net::Verdict::consume);
}

TEST(Capture, VictimMayBeGivenAsAddress) {
  net::Network n(presets::star_topology(), 1);
  auto p = plan(AttackScenario::data_modification, {});
  p.victim = "10.0.0.3";
  Mitm m(p, registry(), n, "hub");
  EXPECT_EQ(m.capture_packet(record(n, 15, "cc", "sub1", {})), net::Verdict::consume);
}

TEST(Rewrite, ReplacesOnlyEditedPoints) {
  auto state = make_state(plan(AttackScenario::data_modification, {{{"inv42", "Qref"}, -50e3}}), registry(), 0);
  auto out = rewrite_response(state, {-50e3}, response(4, 0), registry());
  ASSERT_TRUE(out);
  auto msg = dnp3::decode_message(*out);
  auto app = dnp3::decode_app(msg.app, registry());
  EXPECT_EQ(app.seq, 4);
  EXPECT_EQ(msg.transport_seq, 9);
  EXPECT_EQ(app.analog.at({"inv42", "Qref"}), -50e3);
  EXPECT_EQ(app.analog.at({"inv42", "Pref"}), 450e3);
  EXPECT_TRUE(app.binary.at({"sw18to135", "state"}));
  EXPECT_EQ(out->size(), response(4, 0).size());
}

TEST(Rewrite, ResponseWithoutEditedPointIsUnchanged) {
  auto state = make_state(plan(AttackScenario::data_modification, {{{"inv101", "Qref"}, 1}}), registry(), 0);
  auto original = response(2, 7);
  EXPECT_EQ(rewrite_response(state, {1}, original, registry()), original);
}

TEST(Rewrite, NonResponsesAndGarbageAreRefused) {
  auto state = make_state(plan(AttackScenario::data_modification, {}), registry(), 0);
  EXPECT_FALSE(rewrite_response(state, {}, poll(1), registry()));
  EXPECT_FALSE(rewrite_response(state, {}, dnp3::Bytes{1, 2, 3}, registry()));
}

TEST(Inject, OperatePrecedesPiggybackedPoll) {
  auto out = inject_command(poll(6), {{{"inv42", "Pref"}, 350e3, true}}, registry());
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1], poll(6));
  auto msg = dnp3::decode_message(out[0]);
  auto op = dnp3::decode_app(msg.app, registry());
  EXPECT_EQ(op.function, dnp3::FunctionCode::direct_operate);
  EXPECT_EQ(op.seq, 5);
  EXPECT_EQ(msg.transport_seq, 4);
  EXPECT_EQ(msg.dest, 3);
  EXPECT_EQ(msg.src, 1);
  EXPECT_EQ(op.analog.at({"inv42", "Pref"}), 350e3);
}

TEST(Inject, SequenceWrapsBelowZero) {
  auto out = inject_command(poll(0), {{{"sw60to160", "state"}, 0, true}}, registry());
  auto op = dnp3::decode_app(dnp3::decode_message(out[0]).app, registry());
  EXPECT_EQ(op.seq, 15);
  EXPECT_FALSE(op.binary.at({"sw60to160", "state"}));
}

TEST(Inject, WithoutPiggybackOnlyTheOperateGoes) {
  auto out = inject_command(poll(3), {{{"inv42", "Pref"}, 1, false}}, registry());
  EXPECT_EQ(out.size(), 1u);
}

TEST(Inject, RejectsReadOnlyTargetsAndResponses) {
  EXPECT_THROW(inject_command(poll(3), {{{"inv42", "Pout"}, 1, true}}, registry()), AttackError);
  EXPECT_THROW(inject_command(response(3, 0), {{{"inv42", "Pref"}, 1, true}}, registry()), AttackError);
}

TEST(Toggle, FixedValuesWithoutToggle) {
  auto state = make_state(plan(AttackScenario::setpoint_modification, {{{"inv42", "Pref"}, 350e3}}), registry(), 0);
  for (std::uint64_t k = 1; k < 20; ++k) EXPECT_EQ(toggle_value(state, k), std::vector<double>{350e3});
}

TEST(Toggle, DeterministicAndMixesBothValues) {
  auto state =
      make_state(plan(AttackScenario::setpoint_modification, {{{"inv42", "Pref"}, 350e3}}, true), registry(), 0);
  int attacked = 0;
  for (std::uint64_t k = 1; k <= 200; ++k) {
    auto v = toggle_value(state, k);
    EXPECT_EQ(v, toggle_value(state, k));
    EXPECT_TRUE(v[0] == 350e3 || v[0] == 450e3);
    attacked += v[0] == 350e3;
  }
  EXPECT_GT(attacked, 60);
  EXPECT_LT(attacked, 140);
  EXPECT_EQ(coin(1, 5, 0), coin(1, 5, 0));
}

TEST(Placement, RingFillsSecondAttackerFromControlPaths) {
  net::Network n(presets::ring_topology(), 1);
  auto p = plan(AttackScenario::data_modification, {});
  p.attacker_node = "r2";
  p.attacker_count = 2;
  EXPECT_EQ(attacker_nodes(p, n), (std::vector<std::string>{"r2", "r1"}));
  p.attacker_count = 0;
  EXPECT_TRUE(attacker_nodes(p, n).empty());
  p.attacker_count = 1;
  p.attacker_node = "nowhere";
  EXPECT_THROW(attacker_nodes(p, n), ConfigError);
}

TEST(Mitm, PollInjectionSendsOnlyChanges) {
  net::Network n(presets::star_topology(), 1);
  Mitm m(plan(AttackScenario::setpoint_modification, {{{"inv42", "Pref"}, 350e3}}), registry(), n, "hub");
  std::vector<dnp3::FunctionCode> arrived;
  n.set_receiver("sub1", [&](const net::PacketRecord& r) {
    arrived.push_back(dnp3::peek_app(dnp3::decode_message(r.payload).app).first);
  });
  n.install_tap("hub", [&](const net::PacketRecord& r, net::Network& net) { return m.on_packet(r, net); });
  n.send_packet("cc", n.address_of("sub1"), poll(0), 12);
  n.send_packet("cc", n.address_of("sub1"), poll(1), 16);
  n.run_until(30);
  EXPECT_EQ(arrived, (std::vector<dnp3::FunctionCode>{dnp3::FunctionCode::direct_operate,
                                                       dnp3::FunctionCode::read_poll,
                                                       dnp3::FunctionCode::read_poll}));
  EXPECT_EQ(m.polls_seen(), 2u);
  ASSERT_EQ(m.events().size(), 1u);
  EXPECT_EQ(m.events()[0].action, "inject");
}
