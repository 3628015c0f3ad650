#include <gtest/gtest.h>

#include <random>

#include "gridwire/config.hpp"
#include "gridwire/presets.hpp"

using namespace gridwire;

namespace {

constexpr const char* kRing = R"({
  "nodes": [
    {"id": "cc", "kind": "control_center"},
    {"id": "r1", "kind": "router"}, {"id": "r2", "kind": "router"},
    {"id": "r3", "kind": "router"}, {"id": "r4", "kind": "router"}
  ],
  "links": [
    {"a": "cc", "b": "r1", "kind": "p2p", "delay_ms": 2},
    {"a": "r1", "b": "r2", "kind": "csma", "delay_ms": 1},
    {"a": "r2", "b": "r3", "kind": "csma", "delay_ms": 1},
    {"a": "r3", "b": "r4", "kind": "csma", "delay_ms": 1},
    {"a": "r4", "b": "r1", "kind": "csma", "delay_ms": 1}
  ]
})";

std::string plan_doc(const std::string& body) { return "{" + body + "}"; }

const PointRegistry& registry() {
  static const PointRegistry r = presets::default_registry();
  return r;
}

}  // namespace

TEST(Topology, AbsentDocumentGivesStar) {
  auto t = parse_topology(std::nullopt);
  EXPECT_EQ(t, default_star_topology());
  EXPECT_EQ(t.nodes.size(), 5u);
  EXPECT_EQ(t.substations(), (std::vector<std::string>{"sub1", "sub2", "sub3"}));
  EXPECT_EQ(parse_topology("  \n"), t);
}

TEST(Topology, RingParses) {
  auto t = parse_topology(kRing);
  validate(t);
  EXPECT_EQ(t.nodes.size(), 5u);
  EXPECT_EQ(t.links.size(), 5u);
  EXPECT_EQ(t.links[1].kind, LinkKind::csma);
  EXPECT_EQ(t.control_center().id, "cc");
}

TEST(Topology, OmittedLatenciesUseMediumDefaults) {
  auto t = parse_topology(R"({"nodes":[{"id":"cc","kind":"control_center"},{"id":"a","kind":"router"},
                                       {"id":"b","kind":"router"},{"id":"c","kind":"router"}],
                              "links":[{"a":"cc","b":"a","kind":"p2p"},{"a":"a","b":"b","kind":"csma"},
                                       {"a":"b","b":"c","kind":"wifi"}]})");
  EXPECT_EQ(t.links[0].delay_ms, 2.0);
  EXPECT_EQ(t.links[1].delay_ms, 1.0);
  EXPECT_EQ(t.links[2].delay_ms, 5.0);
  EXPECT_EQ(t.links[2].jitter_ms, 2.0);
  EXPECT_EQ(t.links[0].jitter_ms, 0.0);
}

TEST(Topology, Rejections) {
  EXPECT_THROW(parse_topology(R"({"nodes":[{"id":"cc","kind":"zz"}],"links":[]})"), ConfigError);
  EXPECT_THROW(parse_topology(R"({"nodes":[{"id":"cc","kind":"control_center"},{"id":"cc","kind":"router"}],
                                 "links":[]})"),
               ConfigError);
  EXPECT_THROW(parse_topology(R"({"nodes":[{"id":"cc","kind":"control_center"},{"id":"a","kind":"router"}],
                                 "links":[]})"),
               ConfigError);
  EXPECT_THROW(parse_topology(R"({"nodes":[{"id":"cc","kind":"control_center"},{"id":"a","kind":"router"}],
                                 "links":[{"a":"cc","b":"zz","kind":"p2p"}]})"),
               ConfigError);
  EXPECT_THROW(parse_topology(R"({"nodes":[{"id":"cc","kind":"control_center"},{"id":"a","kind":"router"}],
                                 "links":[{"a":"cc","b":"a","kind":"p2p","delay_ms":-1}]})"),
               ConfigError);
  EXPECT_THROW(parse_topology(R"({"nodes":[{"id":"a","kind":"router"}],"links":[]})"), ConfigError);
  EXPECT_THROW(parse_topology("{not json"), ConfigError);
}

TEST(Topology, RoundTrip) {
  for (const auto& t : {presets::star_topology(), presets::ring_topology(), parse_topology(kRing)}) {
    EXPECT_EQ(parse_topology(serialize(t)), t);
  }
}

TEST(Points, BuiltinRegistryDefaults) {
  const auto& r = registry();
  EXPECT_EQ(r.find({"inv42", "Pref"})->default_value, 450e3);
  EXPECT_EQ(r.find({"inv42", "Qref"})->default_value, 0.0);
  EXPECT_TRUE(r.find({"inv42", "Qref"})->writable);
  EXPECT_FALSE(r.find({"inv42", "Pout"})->writable);
  EXPECT_EQ(r.find({"sw60to160", "state"})->kind, PointKind::binary);
  EXPECT_EQ(r.find({"sw60to160", "state"})->default_value, 1.0);
  EXPECT_EQ(r.size(), 38u);
}

TEST(Points, EmptyDocumentIsEmptyRegistry) {
  EXPECT_TRUE(parse_points("{}").empty());
  EXPECT_TRUE(parse_points("").empty());
}

TEST(Points, Rejections) {
  EXPECT_THROW(parse_points(R"({"points":[{"node":"a","point":"b","kind":"analog"},
                                          {"node":"a","point":"b","kind":"analog"}]})"),
               ConfigError);
  EXPECT_THROW(parse_points(R"({"points":[{"node":"a","point":"b","kind":"binary","default":2}]})"), ConfigError);
  EXPECT_THROW(parse_points(R"({"points":[{"node":"a","point":"b","kind":"other"}]})"), ConfigError);
}

TEST(Points, RandomRegistriesRoundTrip) {
  std::mt19937_64 rng(9);
  for (int n = 0; n < 50; ++n) {
    std::vector<PointEntry> entries;
    int count = static_cast<int>(rng() % 20);
    for (int i = 0; i < count; ++i) {
      PointEntry e;
      e.key = {"node" + std::to_string(i % 5), "p" + std::to_string(i)};
      e.kind = rng() % 2 ? PointKind::analog : PointKind::binary;
      e.default_value = e.kind == PointKind::binary ? static_cast<double>(rng() % 2)
                                                    : static_cast<double>(static_cast<int>(rng() % 2000000) - 1000000) / 8;
      e.writable = rng() % 2;
      e.unit = e.kind == PointKind::analog ? "W" : "";
      entries.push_back(e);
    }
    PointRegistry r(entries);
    EXPECT_EQ(parse_points(serialize(r)), r);
  }
}

TEST(Attack, ParsesPresetStylePlan) {
  auto plan = parse_attack(plan_doc(R"("scenario":"setpoint_modification","start_s":120,"attackers":1,
      "attacker_node":"hub","victim":"sub1","toggle":false,"seed":42,
      "edits":[{"node":"inv42","point":"Pref","value":350000},{"node":"inv51","point":"Pref","value":110000}])"),
                           registry(), 300);
  EXPECT_EQ(plan.scenario, AttackScenario::setpoint_modification);
  EXPECT_EQ(plan.end_s, 300.0);
  EXPECT_EQ(plan.edits.size(), 2u);
  EXPECT_EQ(plan.seed, 42u);
  EXPECT_EQ(parse_attack(serialize(plan), registry(), 300), plan);
}

TEST(Attack, SeedKeepsFullSixtyFourBits) {
  auto plan = parse_attack(plan_doc(R"("scenario":"custom","start_s":1,"attacker_node":"hub","victim":"sub1",
      "seed":18446744073709551615)"),
                           registry(), 300);
  EXPECT_EQ(plan.seed, 18446744073709551615ull);
}

TEST(Attack, Rejections) {
  auto bad = [](const std::string& body) { return parse_attack(plan_doc(body), registry(), 300); };
  EXPECT_THROW(bad(R"("scenario":"custom","start_s":1,"attacker_node":"hub","victim":"sub1",
      "edits":[{"node":"inv99","point":"Pref","value":1}])"),
               ConfigError);
  EXPECT_THROW(bad(R"("scenario":"custom","start_s":10,"end_s":10,"attacker_node":"hub","victim":"sub1")"),
               ConfigError);
  EXPECT_THROW(bad(R"("scenario":"custom","start_s":-1,"attacker_node":"hub","victim":"sub1")"), ConfigError);
  EXPECT_THROW(bad(R"("scenario":"custom","start_s":1,"end_s":400,"attacker_node":"hub","victim":"sub1")"),
               ConfigError);
  EXPECT_THROW(bad(R"("scenario":"command_injection","start_s":1,"attacker_node":"hub","victim":"sub1",
      "edits":[{"node":"inv42","point":"Pout","value":1}])"),
               ConfigError);
  EXPECT_THROW(bad(R"("scenario":"command_injection","start_s":1,"attacker_node":"hub","victim":"sub1",
      "edits":[{"node":"sw60to160","point":"state","value":0.5}])"),
               ConfigError);
  EXPECT_THROW(bad(R"("scenario":"bogus","start_s":1,"attacker_node":"hub","victim":"sub1")"), ConfigError);
  EXPECT_THROW(bad(R"("scenario":"custom","start_s":1,"attacker_node":"hub","victim":"sub1","seed":-3)"),
               ConfigError);
}

TEST(Attack, DataModificationMayEditMeasurements) {
  auto plan = parse_attack(plan_doc(R"("scenario":"data_modification","start_s":1,"attacker_node":"hub",
      "victim":"sub1","edits":[{"node":"inv42","point":"Pout","value":5}])"),
                           registry(), 300);
  EXPECT_EQ(plan.edits.at(0).value, 5.0);
}

TEST(Attack, PresetPlansValidateAgainstPresetRegistry) {
  for (auto s : {presets::Scenario::s1, presets::Scenario::s2, presets::Scenario::s3a, presets::Scenario::s3b,
                 presets::Scenario::s3c, presets::Scenario::s4}) {
    for (const auto& run : presets::preset(s)) {
      EXPECT_NO_THROW(validate(run.plan, run.registry, 300.0)) << run.name;
      EXPECT_NO_THROW(validate(run.topology)) << run.name;
      EXPECT_EQ(parse_attack(serialize(run.plan), run.registry, 300.0), run.plan);
    }
  }
}
