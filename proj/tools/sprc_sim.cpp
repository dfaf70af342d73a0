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

// sprc_sim: run load cases, campaigns and cross-controller comparisons.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 a run failed.

#include "sprc/harness.hpp"
#include "sprc/io.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <optional>
#include <string>
#include <thread>

namespace {

namespace fs = std::filesystem;
using sprc::harness::Json;
using sprc::harness::LoadCaseConfig;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRunFailed = 2;

std::vector<LoadCaseConfig> load_cases(const fs::path& path, const std::string& only = {}) {
  const Json doc = sprc::io::read_json(path);
  std::vector<LoadCaseConfig> cases;
  if (doc.is_object() && doc.contains("cases")) {
    cases = sprc::harness::parse_campaign(doc);
  } else {
    cases.push_back(sprc::harness::parse_case(doc));
  }
  if (only.empty()) return cases;
  for (auto& c : cases) {
    if (c.id == only) return {c};
  }
  throw sprc::ConfigError("no case with id '" + only + "' in " + path.string());
}

int execute(std::vector<LoadCaseConfig> cases, const fs::path& out, unsigned jobs,
            std::optional<std::uint64_t> seed, const std::string& baseline) {
  if (seed) {
    for (auto& c : cases) {
      c.seed = *seed;
      c.disturbance.seed = *seed;
      c.tuning.seed = *seed ^ 0xa5a5a5a55a5a5a5aULL;
    }
  }
  spdlog::info("running {} case(s) with {} job(s) into {}", cases.size(), jobs, out.string());
  fs::create_directories(out);
  const auto entries = sprc::harness::run_campaign(
      cases, jobs, [&](const sprc::harness::RunResult& r) {
        sprc::io::write_run(out, r);
        if (r.ok) {
          spdlog::info("{}: done in {:.1f} s, faulty-window SD {:.1f} {:.1f} {:.1f}", r.config.id,
                       r.wall_seconds, r.metrics.faulty.load_sd[0], r.metrics.faulty.load_sd[1],
                       r.metrics.faulty.load_sd[2]);
        } else {
          spdlog::error("{}: {}", r.config.id, r.error);
        }
      });
  int failed = 0;
  std::vector<sprc::harness::RunMetrics> all;
  for (const auto& e : entries) {
    failed += e.ok ? 0 : 1;
    all.push_back(e.metrics);
  }
  bool has_baseline = false;
  for (const auto& m : all) has_baseline = has_baseline || m.controller == baseline;
  if (has_baseline) {
    try {
      const auto table = sprc::harness::compare(all, baseline);
      sprc::io::write_text(out / "comparison.json", sprc::io::to_json(table).dump(2) + "\n");
      const std::string text = sprc::io::format_table(table);
      sprc::io::write_text(out / "comparison.txt", text);
      std::fputs(text.c_str(), stdout);
    } catch (const sprc::Error& e) {
      spdlog::warn("comparison skipped: {}", e.what());
    }
  }
  if (failed > 0) {
    spdlog::error("{} of {} run(s) failed", failed, entries.size());
    return kExitRunFailed;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subspace predictive repetitive IPC on a surrogate three-blade rotor"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  auto* run = app.add_subcommand("run", "Run the cases of a config file (all, or one with --case)");
  std::string config_path;
  std::string case_id;
  std::string out_dir = "out";
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::uint64_t> seed;
  std::string baseline = "cpc";
  run->add_option("config", config_path, "Case or campaign JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--case", case_id, "Run only the case with this id");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Override the seed of every case");
  run->add_option("--baseline", baseline, "Baseline controller for the comparison");

  auto* campaign = app.add_subcommand(
      "campaign", "Run every case of a campaign file (the built-in 54-run campaign when omitted)");
  std::string campaign_path;
  campaign->add_option("config", campaign_path, "Campaign JSON")->check(CLI::ExistingFile);
  campaign->add_option("--out", out_dir, "Output directory");
  campaign->add_option("--seed", seed, "Override the seed of every case");
  campaign->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  campaign->add_option("--baseline", baseline, "Baseline controller for the comparison");

  auto* cmp = app.add_subcommand("compare", "Compare stored runs against a baseline controller");
  cmp->add_option("out-dir", out_dir, "Directory holding the runs")->required();
  cmp->add_option("--baseline", baseline, "Baseline controller");

  auto* verify = app.add_subcommand("verify", "Recompute stored metrics from the stored series");
  verify->add_option("out-dir", out_dir, "Directory holding the runs")->required();

  auto* tmpl = app.add_subcommand("template", "Write the built-in campaign as JSON");
  std::string tmpl_path;
  tmpl->add_option("--file", tmpl_path, "Destination (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*run) return execute(load_cases(config_path, case_id), out_dir, jobs, seed, baseline);
    if (*campaign) {
      auto cases = campaign_path.empty() ? sprc::harness::default_campaign() : load_cases(campaign_path);
      return execute(std::move(cases), out_dir, jobs, seed, baseline);
    }
    if (*cmp) {
      const auto runs = sprc::io::load_all_metrics(out_dir);
      const auto table = sprc::harness::compare(runs, baseline);
      std::fputs(sprc::io::format_table(table).c_str(), stdout);
      sprc::io::write_text(fs::path(out_dir) / "comparison.json",
                           sprc::io::to_json(table).dump(2) + "\n");
      return kExitOk;
    }
    if (*verify) {
      int bad = 0;
      for (const auto& m : sprc::io::load_all_metrics(out_dir)) {
        if (m.status != "ok") continue;
        std::string diff;
        if (sprc::io::verify_stored_metrics(fs::path(out_dir) / m.id, &diff)) {
          spdlog::info("{}: metrics reproduced", m.id);
        } else {
          spdlog::error("{}: metrics differ: {}", m.id, diff);
          ++bad;
        }
      }
      return bad == 0 ? kExitOk : kExitRunFailed;
    }
    if (*tmpl) {
      const auto doc = sprc::harness::campaign_to_json(sprc::harness::default_campaign(),
                                                       "default campaign").dump(2) + "\n";
      if (tmpl_path.empty()) {
        std::fputs(doc.c_str(), stdout);
      } else {
        sprc::io::write_text(tmpl_path, doc);
      }
      return kExitOk;
    }
  } catch (const sprc::ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const sprc::InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRunFailed;
  }
  return kExitOk;
}
