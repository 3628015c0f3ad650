#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gridwire/harness.hpp"

using namespace gridwire;

namespace {

harness::RunOptions short_run(double duration) {
  harness::RunOptions o;
  o.duration_s = duration;
  return o;
}

presets::ScenarioRun scenario(presets::Scenario s, double duration) { return presets::preset(s, duration).at(0); }

}  // namespace

TEST(Csv, ValueFormatting) {
  EXPECT_EQ(harness::format_value(0), "0.000");
  EXPECT_EQ(harness::format_value(-50000), "-50000.000");
  EXPECT_EQ(harness::format_value(1.0005), "1.001");
  EXPECT_EQ(harness::format_value(-0.0004), "0.000");
  EXPECT_EQ(harness::format_value(59.99951), "60.000");
}

TEST(Csv, EmptyDatasetIsHeaderOnly) {
  EXPECT_EQ(harness::timeseries_csv({}, presets::default_registry(), "truth"), "time_s,node,point,value,source\n");
}

TEST(Csv, RowsSortedByTimeThenKey) {
  auto reg = presets::default_registry();
  auto a = *reg.index_of({"inv42", "Pref"});
  auto b = *reg.index_of({"gen1", "Pout"});
  std::string csv = harness::timeseries_csv({{1.0, static_cast<std::uint32_t>(a), 5}, {0.5, static_cast<std::uint32_t>(a), 1},
                                             {1.0, static_cast<std::uint32_t>(b), 2}},
                                            reg, "observed");
  EXPECT_EQ(csv,
            "time_s,node,point,value,source\n"
            "0.500000,inv42,Pref,1.000,observed\n"
            "1.000000,gen1,Pout,2.000,observed\n"
            "1.000000,inv42,Pref,5.000,observed\n");
}

TEST(Ownership, SubstationsReportTheirMicrogrid) {
  auto run = scenario(presets::Scenario::s1, 300);
  auto own = harness::point_ownership(run.topology, run.registry, run.grid);
  EXPECT_EQ(own.size(), run.registry.size());
  EXPECT_EQ(own.at(*run.registry.index_of({"inv42", "Pref"})), "sub1");
  EXPECT_EQ(own.at(*run.registry.index_of({"inv105", "Pref"})), "sub2");
  EXPECT_EQ(own.at(*run.registry.index_of({"mg3", "freq"})), "sub3");
  EXPECT_EQ(own.at(*run.registry.index_of({"sw151to300", "state"})), "sub1");
}

TEST(Run, PollCadenceAndRowCounts) {
  auto r = harness::run(scenario(presets::Scenario::s1, 40), short_run(40));
  std::map<std::string, std::vector<double>> polls;
  for (const auto& e : r.events) {
    if (e.type == "poll") polls[e.fields.at("substation").get<std::string>()].push_back(e.time_s);
  }
  ASSERT_EQ(polls.size(), 3u);
  for (const auto& [sub, times] : polls) {
    ASSERT_EQ(times.size(), 10u) << sub;
    for (std::size_t i = 0; i < times.size(); ++i) EXPECT_DOUBLE_EQ(times[i], 4.0 * i);
  }
  EXPECT_EQ(r.truth.size(), (400u + 1) * r.registry.size());
  EXPECT_EQ(r.observed.size(), 10u * r.registry.size());
}

TEST(Run, BaselineObservationsMatchTruth) {
  auto opts = short_run(40);
  opts.attack_enabled = false;
  auto r = harness::run(scenario(presets::Scenario::s2, 40), opts);
  std::map<std::pair<long, std::uint32_t>, double> truth;
  for (const auto& s : r.truth) truth[{std::lround(s.time_s * 10), s.point}] = s.value;
  ASSERT_FALSE(r.observed.empty());
  for (const auto& s : r.observed) {
    long step = static_cast<long>(std::floor(s.time_s / 0.1 + 1e-9));
    auto it = truth.find({step, s.point});
    ASSERT_NE(it, truth.end());
    EXPECT_EQ(harness::format_value(s.value), harness::format_value(it->second))
        << r.registry.at(s.point).key.str() << " at " << s.time_s;
  }
}

TEST(Run, ThreadedDriverProducesIdenticalOutputs) {
  auto opts = short_run(40);
  auto a = harness::run(scenario(presets::Scenario::s2, 40), opts);
  opts.threaded = true;
  auto b = harness::run(scenario(presets::Scenario::s2, 40), opts);
  EXPECT_EQ(harness::timeseries_csv(a.truth, a.registry, "truth"), harness::timeseries_csv(b.truth, b.registry, "truth"));
  EXPECT_EQ(harness::timeseries_csv(a.observed, a.registry, "observed"),
            harness::timeseries_csv(b.observed, b.registry, "observed"));
  EXPECT_EQ(harness::events_jsonl(a.events), harness::events_jsonl(b.events));
  EXPECT_EQ(a.records, b.records);
}

TEST(Run, CommandInjectionOpensSwitchesAfterStart) {
  auto r = harness::run(scenario(presets::Scenario::s3a, 40), short_run(40));
  EXPECT_FALSE(r.final_grid.relay("sw54to94")->closed);
  EXPECT_FALSE(r.final_grid.relay("sw97to197")->closed);
  EXPECT_FALSE(r.final_grid.relay("sw60to160")->closed);
  std::set<std::string> types;
  double first_trip = 1e9;
  for (const auto& e : r.events) {
    types.insert(e.type);
    if (e.type == "relay_trip") first_trip = std::min(first_trip, e.time_s);
  }
  EXPECT_TRUE(types.contains("attack_inject"));
  EXPECT_GE(first_trip, 20.0);
  EXPECT_LT(first_trip, 25.0);
}

TEST(Run, InvalidPlanIsAConfigError) {
  auto run = scenario(presets::Scenario::s1, 300);
  run.plan.end_s = 500;
  EXPECT_THROW(harness::run(run, short_run(300)), ConfigError);
}
