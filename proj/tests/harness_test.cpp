// Copyright 2026 The sprc-ipc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sprc/harness.hpp"
#include "sprc/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

namespace sprc::harness {
namespace {

namespace fs = std::filesystem;

Json minimal() { return Json{{"id", "a"}, {"controller", "ftipc"}, {"seed", 5}}; }

LoadCaseConfig shortened(LoadCaseConfig c, double duration) {
  c.duration_s = duration;
  c.fault_onset_s = duration / 2.0;
  c.fault.onset = std::llround(c.fault_onset_s / c.plant.dt);
  return c;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("sprc_harness_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

TEST(Config, MinimalCaseTakesTheDefaults) {
  const auto c = parse_case(minimal());
  EXPECT_EQ(c.id, "a");
  EXPECT_EQ(c.controller, ControllerKind::Ftipc);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.disturbance.seed, 5u);
  EXPECT_EQ(c.samples(), 200000);
  EXPECT_EQ(c.fault.onset, 100000);
  EXPECT_TRUE(c.tuning.restricted);
  EXPECT_EQ(c.tuning.period, c.plant.period);
}

TEST(Config, NestedValuesAndScalarBroadcast) {
  Json j = minimal();
  j["controller"] = "uftipc";
  j["disturbance"] = {{"amplitude_1p", 300.0}, {"amplitude_2p", {1.0, 2.0, 3.0}}, {"noise_sd", 4.0}};
  j["fault"] = {{"kind", "pad"}, {"blade", 2}, {"parameter", 0.5}};
  j["tuning"] = {{"beta", 0.2}, {"r", 1e-6}};
  j["duration_s"] = 400.0;
  j["fault_onset_s"] = 150.0;
  const auto c = parse_case(j);
  EXPECT_EQ(c.disturbance.amplitude_1p, (std::array<double, 3>{300.0, 300.0, 300.0}));
  EXPECT_EQ(c.disturbance.amplitude_2p, (std::array<double, 3>{1.0, 2.0, 3.0}));
  EXPECT_EQ(c.fault.kind, plant::FaultKind::PitchActuatorDegradation);
  EXPECT_EQ(c.fault.blade, 2);
  EXPECT_EQ(c.fault.onset, 15000);
  EXPECT_EQ(c.tuning.beta, 0.2);
  EXPECT_EQ(c.tuning.weights.r, 1e-6);
  EXPECT_FALSE(c.tuning.restricted);
}

TEST(Config, RejectsBadInput) {
  for (const char* key : {"id", "controller", "seed"}) {
    Json j = minimal();
    j.erase(key);
    EXPECT_THROW(parse_case(j), ConfigError) << key;
  }
  Json extra = minimal();
  extra["sede"] = 1;
  EXPECT_THROW(parse_case(extra), ConfigError);
  Json nested = minimal();
  nested["tuning"] = {{"gamma", 1.0}};
  EXPECT_THROW(parse_case(nested), ConfigError);
  Json late = minimal();
  late["fault_onset_s"] = 2500.0;
  EXPECT_THROW(parse_case(late), ConfigError);
  Json kind = minimal();
  kind["controller"] = "pid";
  EXPECT_THROW(parse_case(kind), ConfigError);
  Json fault = minimal();
  fault["fault"] = {{"kind", "melted"}};
  EXPECT_THROW(parse_case(fault), ConfigError);
  Json beta = minimal();
  beta["tuning"] = {{"beta", 2.0}};
  EXPECT_THROW(parse_case(beta), ConfigError);
}

TEST(Config, CampaignDefaultsAndUniqueIds) {
  const Json doc = {{"name", "t"},
                    {"defaults", {{"duration_s", 300.0}, {"fault_onset_s", 100.0}, {"seed", 9}}},
                    {"cases", {{{"id", "x"}, {"controller", "cpc"}},
                               {{"id", "y"}, {"controller", "mbc_ipc"}, {"seed", 10}}}}};
  const auto cases = parse_campaign(doc);
  ASSERT_EQ(cases.size(), 2u);
  EXPECT_EQ(cases[0].duration_s, 300.0);
  EXPECT_EQ(cases[0].seed, 9u);
  EXPECT_EQ(cases[1].seed, 10u);

  Json dup = doc;
  dup["cases"][1]["id"] = "x";
  EXPECT_THROW(parse_campaign(dup), ConfigError);
  EXPECT_TRUE(parse_campaign(Json{{"cases", Json::array()}}).empty());
}

TEST(Config, JsonRoundTrip) {
  for (const auto& c : default_campaign()) {
    const Json j = to_json(c);
    EXPECT_EQ(to_json(parse_case(j)), j) << c.id;
  }
}

TEST(Campaign, DefaultHasFiftyFourRuns) {
  const auto cases = default_campaign();
  ASSERT_EQ(cases.size(), 54u);
  std::set<std::string> ids, lcs, families;
  std::map<std::string, std::set<std::uint64_t>> seeds;
  std::map<plant::FaultKind, int> kinds;
  std::set<double> noise;
  for (const auto& c : cases) {
    ids.insert(c.id);
    lcs.insert(c.lc);
    families.insert(c.family);
    seeds[c.lc].insert(c.seed);
    ++kinds[c.fault.kind];
    noise.insert(c.disturbance.noise_sd / c.disturbance.amplitude_1p[0]);
    EXPECT_EQ(c.samples(), 200000);
  }
  EXPECT_EQ(ids.size(), 54u);
  EXPECT_EQ(lcs.size(), 18u);
  EXPECT_EQ(families.size(), 6u);
  for (const auto& [lc, s] : seeds) EXPECT_EQ(s.size(), 1u) << lc;
  EXPECT_EQ(kinds[plant::FaultKind::PitchActuatorDegradation], 18);
  EXPECT_EQ(kinds[plant::FaultKind::PitchActuatorStuck], 18);
  EXPECT_EQ(kinds[plant::FaultKind::BladeStiffness], 18);
  EXPECT_EQ(noise, (std::set<double>{0.0, 0.0375, 0.15}));
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

TEST(Run, FullLengthRunHasTwoHundredThousandSamples) {
  const auto r = run_load_case(make_load_case(1, ControllerKind::Cpc));
  ASSERT_TRUE(r.ok) << r.error;
  EXPECT_EQ(r.series.size(), 200000u);
  EXPECT_EQ(r.metrics.samples, 200000);
  EXPECT_EQ(r.rotations.size(), 1999u);
  EXPECT_DOUBLE_EQ(r.series.t.back(), 1999.99);
}

TEST(Run, RepeatedRunsAreBitIdentical) {
  const auto cfg = shortened(make_load_case(9, ControllerKind::Ftipc), 120.0);
  const auto a = run_load_case(cfg);
  const auto b = run_load_case(cfg);
  ASSERT_TRUE(a.ok && b.ok);
  for (std::size_t i = 0; i < kBlades; ++i) {
    EXPECT_EQ(a.series.u[i], b.series.u[i]);
    EXPECT_EQ(a.series.y[i], b.series.y[i]);
  }
  EXPECT_EQ(a.series.psi, b.series.psi);
  EXPECT_EQ(io::metrics_to_json(a.metrics), io::metrics_to_json(b.metrics));
  EXPECT_EQ(io::rotations_csv(a.rotations), io::rotations_csv(b.rotations));
}

TEST(Run, FailuresAreReportedNotThrown) {
  auto bad = shortened(make_load_case(2, ControllerKind::Ftipc), 100.0);
  bad.tuning.period = 50;
  const auto r = run_load_case(bad);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.metrics.status, "failed");
  EXPECT_NE(r.error.find("period"), std::string::npos);
}

TEST(Campaign, EmptyListGivesEmptyReport) {
  EXPECT_TRUE(run_campaign({}, 4).empty());
  EXPECT_TRUE(compare({}, "cpc").rows.empty());
}

TEST(Campaign, ParallelismDoesNotChangeResults) {
  std::vector<LoadCaseConfig> cases;
  for (int lc : {3, 5, 16}) {
    for (auto k : {ControllerKind::Cpc, ControllerKind::MbcIpc, ControllerKind::Ftipc}) {
      cases.push_back(shortened(make_load_case(lc, k), 60.0));
    }
  }
  auto bad = cases.front();
  bad.id = "broken";
  bad.duration_s = -1.0;
  cases.insert(cases.begin() + 4, bad);

  const auto serial = run_campaign(cases, 1);
  const auto parallel = run_campaign(cases, 3);
  ASSERT_EQ(serial.size(), cases.size());
  ASSERT_EQ(parallel.size(), cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    EXPECT_EQ(serial[i].config.id, cases[i].id);
    EXPECT_EQ(parallel[i].config.id, cases[i].id);
    EXPECT_EQ(io::metrics_to_json(serial[i].metrics), io::metrics_to_json(parallel[i].metrics));
    EXPECT_EQ(io::rotations_csv(serial[i].rotations), io::rotations_csv(parallel[i].rotations));
    EXPECT_EQ(serial[i].ok, cases[i].id != "broken") << cases[i].id;
  }
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

RunMetrics fake(const std::string& lc, const std::string& controller, std::array<double, 3> sd,
                int faulty_blade = 3) {
  RunMetrics m;
  m.id = lc + "-" + controller;
  m.lc = lc;
  m.family = "F";
  m.controller = controller;
  m.seed = 1;
  m.fault_kind = faulty_blade == 0 ? "healthy" : "pas";
  m.fault_blade = faulty_blade;
  m.faulty.load_sd = sd;
  m.faulty.adc = {0.1, 0.2, 0.3};
  return m;
}

TEST(Compare, BaselineAgainstItselfIsZero) {
  const auto t = compare({fake("L1", "cpc", {3, 4, 5}, 0)}, "cpc");
  ASSERT_EQ(t.rows.size(), 1u);
  for (double v : t.rows[0].rsd) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(t.notes.empty());
}

TEST(Compare, FlagsNegativeEntriesAndOmitsTheFaultyBlade) {
  const auto t = compare({fake("L1", "cpc", {10, 10, 10}), fake("L1", "mbc_ipc", {12, 5, 50}),
                          fake("L1", "ftipc", {4, 5, 9})},
                         "cpc");
  ASSERT_EQ(t.rows.size(), 3u);
  const auto& mbc = t.rows[2];
  ASSERT_EQ(mbc.controller, "mbc_ipc");
  EXPECT_DOUBLE_EQ(mbc.rsd[0], -0.2);
  EXPECT_TRUE(mbc.negative[0]);
  EXPECT_DOUBLE_EQ(mbc.rsd[1], 0.5);
  EXPECT_TRUE(std::isnan(mbc.rsd[2]));
  ASSERT_EQ(t.notes.size(), 1u);
  EXPECT_NE(t.notes[0].find("blade 3"), std::string::npos);
  EXPECT_NE(io::format_table(t).find("faulty blade"), std::string::npos);
}

TEST(Compare, RejectsMissingOrMismatchedBaselines) {
  EXPECT_THROW(compare({fake("L1", "ftipc", {1, 1, 1})}, "cpc"), InvalidArgument);
  auto other = fake("L1", "ftipc", {1, 1, 1});
  other.seed = 2;
  EXPECT_THROW(compare({fake("L1", "cpc", {1, 1, 1}), other}, "cpc"), InvalidArgument);
}

TEST(Compare, StuckActuatorCaseOrdersTheDutyCycle) {
  std::vector<RunMetrics> runs;
  for (auto k : {ControllerKind::Cpc, ControllerKind::MbcIpc, ControllerKind::Ftipc}) {
    const auto r = run_load_case(shortened(make_load_case(5, k), 600.0));
    ASSERT_TRUE(r.ok) << r.error;
    runs.push_back(r.metrics);
  }
  const auto t = compare(runs, "cpc");
  const auto find = [&](const std::string& c) {
    for (const auto& row : t.rows)
      if (row.controller == c) return row;
    return ComparisonRow{};
  };
  const auto ft = find("ftipc");
  const auto mbc = find("mbc_ipc");
  EXPECT_LT(ft.adc[0] + ft.adc[1], mbc.adc[0] + mbc.adc[1]);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

TEST(Persistence, StoredMetricsAreReproducedFromTheSeries) {
  TempDir dir;
  const auto r = run_load_case(shortened(make_load_case(7, ControllerKind::Ftipc), 60.0));
  ASSERT_TRUE(r.ok);
  io::write_run(dir.path(), r);
  std::string diff;
  EXPECT_TRUE(io::verify_stored_metrics(dir.path() / r.config.id, &diff)) << diff;

  const auto series = io::load_series(dir.path() / r.config.id, r.series.dt);
  for (std::size_t i = 0; i < kBlades; ++i) {
    EXPECT_EQ(series.u[i], r.series.u[i]);
    EXPECT_EQ(series.y[i], r.series.y[i]);
  }
  EXPECT_EQ(series.t, r.series.t);
  EXPECT_EQ(series.psi, r.series.psi);
  EXPECT_EQ(io::metrics_to_json(io::load_metrics(dir.path() / r.config.id)),
            io::metrics_to_json(r.metrics));
  const auto all = io::load_all_metrics(dir.path());
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0].id, r.config.id);

  const std::string csv = io::read_text(dir.path() / r.config.id / "series.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), io::kSeriesHeader);
}

TEST(Persistence, TamperedMetricsAreDetected) {
  TempDir dir;
  auto r = run_load_case(shortened(make_load_case(1, ControllerKind::Cpc), 60.0));
  ASSERT_TRUE(r.ok);
  r.metrics.faulty.load_sd[1] += 1e-9;
  io::write_run(dir.path(), r);
  std::string diff;
  EXPECT_FALSE(io::verify_stored_metrics(dir.path() / r.config.id, &diff));
  EXPECT_FALSE(diff.empty());
}

TEST(Persistence, NanSurvivesTheMetricsJson) {
  RunMetrics m = fake("L1", "cpc", {1, 2, 3});
  m.faulty.pitch_band_ratio = {kNaN, 0.5, kNaN};
  const auto back = io::metrics_from_json(io::metrics_to_json(m));
  EXPECT_TRUE(std::isnan(back.faulty.pitch_band_ratio[0]));
  EXPECT_EQ(back.faulty.pitch_band_ratio[1], 0.5);
  EXPECT_EQ(io::metrics_to_json(back), io::metrics_to_json(m));
}

}  // namespace
}  // namespace sprc::harness
