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

// On-disk layout of a run:
//   <out>/<id>/series.csv     t[s],u1[deg],u2[deg],u3[deg],y1,y2,y3,psi[rad]
//   <out>/<id>/rotations.csv  per-rotation band power and controller log
//   <out>/<id>/metrics.json   window metrics plus the context to recompute them
//   <out>/<id>/case.json      the resolved configuration
// Doubles are written in shortest round-trip form, so a reloaded series
// reproduces the metrics bit for bit.

#pragma once

#include "sprc/harness.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace sprc::io {

namespace fs = std::filesystem;
using harness::Json;

inline void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    if (s == "nan" || s == "-nan") return harness::kNaN;
    throw Error(where + ": cannot parse '" + std::string(s) + "' as a number");
  }
  return v;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline constexpr std::string_view kSeriesHeader =
    "t[s],u1[deg],u2[deg],u3[deg],y1,y2,y3,psi[rad]";

inline std::string series_csv(const harness::TimeSeries& s) {
  std::string out;
  out.reserve(s.size() * 120 + 64);
  out.append(kSeriesHeader);
  out.push_back('\n');
  for (std::size_t k = 0; k < s.size(); ++k) {
    append_double(out, s.t[k]);
    for (const auto& u : s.u) {
      out.push_back(',');
      append_double(out, u[k]);
    }
    for (const auto& y : s.y) {
      out.push_back(',');
      append_double(out, y[k]);
    }
    out.push_back(',');
    append_double(out, s.psi[k]);
    out.push_back('\n');
  }
  return out;
}

inline harness::TimeSeries parse_series_csv(std::string_view text, double dt,
                                            const std::string& where = "series.csv") {
  harness::TimeSeries s;
  s.dt = dt;
  std::size_t pos = text.find('\n');
  if (pos == std::string_view::npos || text.substr(0, pos) != kSeriesHeader) {
    throw Error(where + ": unexpected header");
  }
  ++pos;
  std::size_t line = 1;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view row = text.substr(pos, end - pos);
    pos = end + 1;
    ++line;
    if (row.empty()) continue;
    double v[8];
    std::size_t col = 0;
    std::size_t a = 0;
    while (col < 8) {
      std::size_t b = row.find(',', a);
      if (b == std::string_view::npos) b = row.size();
      v[col++] = parse_double(row.substr(a, b - a), where + ":" + std::to_string(line));
      if (b == row.size()) break;
      a = b + 1;
    }
    if (col != 8) throw Error(where + ":" + std::to_string(line) + ": expected 8 columns");
    s.t.push_back(v[0]);
    for (std::size_t i = 0; i < 3; ++i) {
      s.u[i].push_back(v[1 + i]);
      s.y[i].push_back(v[4 + i]);
    }
    s.psi.push_back(v[7]);
  }
  return s;
}

inline std::string rotations_csv(const std::vector<harness::RotationEntry>& rows) {
  std::string out =
      "j,band_power1,band_power2,band_power3,theta_norm,delta_theta_norm,dare_residual,"
      "dare_iterations,gain_updated,clamp_events\n";
  for (const auto& r : rows) {
    out += std::to_string(r.j);
    for (double p : r.band_power) {
      out.push_back(',');
      append_double(out, p);
    }
    if (r.has_controller) {
      const auto& c = r.controller;
      out.push_back(',');
      append_double(out, c.theta_norm);
      out.push_back(',');
      append_double(out, c.delta_theta_norm);
      out.push_back(',');
      append_double(out, c.dare_residual);
      out += "," + std::to_string(c.dare_iterations) + "," + (c.gain_updated ? "1" : "0") + "," +
             std::to_string(c.clamp_events);
    } else {
      out += ",,,,,,";
    }
    out.push_back('\n');
  }
  return out;
}

inline Json to_json(const harness::WindowMetrics& w) {
  return {{"load_sd", w.load_sd},
          {"load_mean", w.load_mean},
          {"pitch_mean", w.pitch_mean},
          {"adc", w.adc},
          {"pitch_band_ratio", w.pitch_band_ratio}};
}

namespace internal {

// JSON has no NaN; it is stored as null.
inline Json nan_safe(const std::array<double, 3>& a) {
  Json out = Json::array();
  for (double v : a) out.push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
  return out;
}

inline std::array<double, 3> read3(const Json& j) {
  std::array<double, 3> a{};
  for (std::size_t i = 0; i < 3; ++i) a[i] = j.at(i).is_null() ? harness::kNaN : j.at(i).get<double>();
  return a;
}

}  // namespace internal

inline Json metrics_to_json(const harness::RunMetrics& m) {
  auto win = [](const harness::WindowMetrics& w) {
    return Json{{"load_sd", internal::nan_safe(w.load_sd)},
                {"load_mean", internal::nan_safe(w.load_mean)},
                {"pitch_mean", internal::nan_safe(w.pitch_mean)},
                {"adc", internal::nan_safe(w.adc)},
                {"pitch_band_ratio", internal::nan_safe(w.pitch_band_ratio)}};
  };
  const auto& c = m.context;
  return {{"id", m.id},
          {"lc", m.lc},
          {"family", m.family},
          {"controller", m.controller},
          {"seed", m.seed},
          {"status", m.status},
          {"error", m.error},
          {"fault", {{"kind", m.fault_kind}, {"blade", m.fault_blade}, {"parameter", m.fault_parameter},
                     {"onset_s", m.fault_onset_s}}},
          {"samples", m.samples},
          {"context", {{"dt", c.dt}, {"period", c.period}, {"rate_limit_deg_s", c.rate_limit},
                       {"healthy_window_s", {c.windows.healthy_start, c.windows.healthy_end}},
                       {"faulty_window_s", {c.windows.faulty_start, c.windows.faulty_end}}}},
          {"healthy", win(m.healthy)},
          {"faulty", win(m.faulty)},
          {"dare_failures", m.dare_failures},
          {"clamp_events", m.clamp_events}};
}

inline harness::RunMetrics metrics_from_json(const Json& j) {
  harness::RunMetrics m;
  try {
    m.id = j.at("id").get<std::string>();
    m.lc = j.at("lc").get<std::string>();
    m.family = j.at("family").get<std::string>();
    m.controller = j.at("controller").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.status = j.at("status").get<std::string>();
    m.error = j.value("error", std::string());
    const auto& f = j.at("fault");
    m.fault_kind = f.at("kind").get<std::string>();
    m.fault_blade = f.at("blade").get<int>();
    m.fault_parameter = f.at("parameter").get<double>();
    m.fault_onset_s = f.at("onset_s").get<double>();
    m.samples = j.at("samples").get<std::int64_t>();
    const auto& c = j.at("context");
    m.context.dt = c.at("dt").get<double>();
    m.context.period = c.at("period").get<Index>();
    m.context.rate_limit = c.at("rate_limit_deg_s").get<double>();
    m.context.windows.healthy_start = c.at("healthy_window_s").at(0).get<double>();
    m.context.windows.healthy_end = c.at("healthy_window_s").at(1).get<double>();
    m.context.windows.faulty_start = c.at("faulty_window_s").at(0).get<double>();
    m.context.windows.faulty_end = c.at("faulty_window_s").at(1).get<double>();
    auto win = [](const Json& w) {
      harness::WindowMetrics out;
      out.load_sd = internal::read3(w.at("load_sd"));
      out.load_mean = internal::read3(w.at("load_mean"));
      out.pitch_mean = internal::read3(w.at("pitch_mean"));
      out.adc = internal::read3(w.at("adc"));
      out.pitch_band_ratio = internal::read3(w.at("pitch_band_ratio"));
      return out;
    };
    if (m.status == "ok") {
      m.healthy = win(j.at("healthy"));
      m.faulty = win(j.at("faulty"));
    }
    m.dare_failures = j.value("dare_failures", std::int64_t{0});
    m.clamp_events = j.value("clamp_events", std::int64_t{0});
  } catch (const Json::exception& e) {
    throw Error("malformed metrics record: " + std::string(e.what()));
  }
  return m;
}

inline fs::path run_dir(const fs::path& out_dir, const std::string& id) { return out_dir / id; }

/// Writes series, rotation log, metrics and the resolved configuration.
inline void write_run(const fs::path& out_dir, const harness::RunResult& r) {
  const fs::path dir = run_dir(out_dir, r.config.id);
  fs::create_directories(dir);
  write_text(dir / "case.json", harness::to_json(r.config).dump(2) + "\n");
  if (r.ok) {
    write_text(dir / "series.csv", series_csv(r.series));
    write_text(dir / "rotations.csv", rotations_csv(r.rotations));
  }
  write_text(dir / "metrics.json", metrics_to_json(r.metrics).dump(2) + "\n");
}

inline harness::RunMetrics load_metrics(const fs::path& dir) {
  return metrics_from_json(read_json(dir / "metrics.json"));
}

inline harness::TimeSeries load_series(const fs::path& dir, double dt) {
  return parse_series_csv(read_text(dir / "series.csv"), dt, (dir / "series.csv").string());
}

/// Every <out>/<id>/metrics.json, sorted by id.
inline std::vector<harness::RunMetrics> load_all_metrics(const fs::path& out_dir) {
  if (!fs::is_directory(out_dir)) throw Error("not a directory: " + out_dir.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(out_dir)) {
    if (e.is_directory() && fs::exists(e.path() / "metrics.json")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<harness::RunMetrics> out;
  for (const auto& d : dirs) out.push_back(load_metrics(d));
  return out;
}

/// Recomputes the window metrics of a stored run and reports whether they
/// match the stored ones exactly.
inline bool verify_stored_metrics(const fs::path& dir, std::string* detail_out = nullptr) {
  const auto stored = load_metrics(dir);
  harness::RunMetrics fresh = stored;
  const auto series = load_series(dir, stored.context.dt);
  harness::compute_window_metrics(series, fresh);
  const Json a = metrics_to_json(stored);
  const Json b = metrics_to_json(fresh);
  if (a == b) return true;
  if (detail_out != nullptr) *detail_out = Json::diff(a, b).dump();
  return false;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline Json to_json(const harness::ComparisonTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"lc", r.lc},
                    {"family", r.family},
                    {"controller", r.controller},
                    {"seed", r.seed},
                    {"faulty_blade", r.faulty_blade},
                    {"rsd", internal::nan_safe(r.rsd)},
                    {"adc", internal::nan_safe(r.adc)},
                    {"negative", r.negative}});
  }
  Json fams = Json::array();
  for (const auto& f : t.families) {
    fams.push_back({{"family", f.family},
                    {"controller", f.controller},
                    {"faulty_blade", f.faulty_blade},
                    {"cases", f.cases},
                    {"mean_rsd", internal::nan_safe(f.mean_rsd)},
                    {"mean_adc", internal::nan_safe(f.mean_adc)}});
  }
  return {{"baseline", t.baseline}, {"rows", rows}, {"families", fams}, {"notes", t.notes}};
}

/// Plain-text table; negative rSD entries are marked with '*'.
inline std::string format_table(const harness::ComparisonTable& t) {
  std::string out;
  char buf[256];
  auto cell = [&](double v, bool neg, bool percent) {
    if (!std::isfinite(v)) return std::string("       -");
    std::snprintf(buf, sizeof buf, percent ? "%7.1f%c" : "%7.3f%c", percent ? 100.0 * v : v,
                  neg ? '*' : ' ');
    return std::string(buf);
  };
  std::snprintf(buf, sizeof buf, "%-6s %-10s %-8s %8s %8s %8s | %8s %8s %8s\n", "LC", "family",
                "ctrl", "rSD1[%]", "rSD2[%]", "rSD3[%]", "ADC1", "ADC2", "ADC3");
  out += buf;
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%-6s %-10s %-8s ", r.lc.c_str(), r.family.c_str(),
                  r.controller.c_str());
    out += buf;
    for (std::size_t i = 0; i < 3; ++i) out += cell(r.rsd[i], r.negative[i], true) + " ";
    out += "|";
    for (std::size_t i = 0; i < 3; ++i) out += " " + cell(r.adc[i], false, false);
    out += "\n";
  }
  out += "\nfamily means\n";
  for (const auto& f : t.families) {
    std::snprintf(buf, sizeof buf, "%-17s %-8s ", f.family.c_str(), f.controller.c_str());
    out += buf;
    for (std::size_t i = 0; i < 3; ++i) out += cell(f.mean_rsd[i], f.mean_rsd[i] < 0.0, true) + " ";
    out += "|";
    for (std::size_t i = 0; i < 3; ++i) out += " " + cell(f.mean_adc[i], false, false);
    out += "\n";
  }
  for (const auto& n : t.notes) out += "note: " + n + "\n";
  return out;
}

}  // namespace sprc::io
