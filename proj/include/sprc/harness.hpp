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

// Load-case configuration, the closed-loop run, campaign execution and the
// cross-controller comparison.

#pragma once

#include "sprc/baselines.hpp"
#include "sprc/common.hpp"
#include "sprc/control.hpp"
#include "sprc/metrics.hpp"
#include "sprc/numerics.hpp"
#include "sprc/plant.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace sprc::harness {

using Json = nlohmann::json;
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr std::size_t kBlades = static_cast<std::size_t>(plant::kBlades);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class ControllerKind { Cpc, MbcIpc, Ftipc, Uftipc };

inline std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::Cpc: return "cpc";
    case ControllerKind::MbcIpc: return "mbc_ipc";
    case ControllerKind::Ftipc: return "ftipc";
    case ControllerKind::Uftipc: return "uftipc";
  }
  return "?";
}

inline ControllerKind controller_from_string(const std::string& s) {
  if (s == "cpc") return ControllerKind::Cpc;
  if (s == "mbc_ipc") return ControllerKind::MbcIpc;
  if (s == "ftipc") return ControllerKind::Ftipc;
  if (s == "uftipc") return ControllerKind::Uftipc;
  throw ConfigError("unknown controller '" + s + "' (expected cpc, mbc_ipc, ftipc or uftipc)");
}

struct LoadCaseConfig {
  std::string id;
  std::string lc;
  std::string family;
  ControllerKind controller = ControllerKind::Ftipc;
  plant::DisturbanceModel disturbance;
  plant::FaultScenario fault;  // onset in samples, derived from fault_onset_s
  double duration_s = 2000.0;
  double fault_onset_s = 1000.0;
  std::uint64_t seed = 0;
  double rate_limit = metrics::kDefaultRateLimit;
  control::SprcConfig tuning;
  baselines::MbcIpcGains mbc;
  plant::PlantParams plant;

  std::int64_t samples() const { return std::llround(duration_s / plant.dt); }

  void validate() const {
    auto fail = [&](const std::string& m) { throw ConfigError("case '" + id + "': " + m); };
    if (id.empty()) throw ConfigError("case without id");
    try {
      plant.validate();
      disturbance.validate();
      fault.validate();
      tuning.validate();
      mbc.validate();
    } catch (const InvalidArgument& e) {
      fail(e.what());
    }
    if (!(duration_s > 0.0)) fail("duration must be positive");
    if (!(fault_onset_s > 0.0 && fault_onset_s < duration_s)) fail("fault onset must lie inside the run");
    if (std::abs(static_cast<double>(samples()) * plant.dt - duration_s) > 1e-9 * duration_s) {
      fail("duration must be a whole number of samples");
    }
    if (tuning.period != plant.period) fail("controller period must equal the plant period");
    if (!(rate_limit > 0.0)) fail("rate limit must be positive");
  }
};

namespace internal {

inline void check_keys(const Json& obj, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const Json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline void read_array3(const Json& obj, const char* key, std::array<double, 3>& out,
                        const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (v.is_number()) {
    out.fill(v.get<double>());
    return;
  }
  if (!v.is_array() || v.size() != 3) throw ConfigError(where + "." + key + ": expected 3 numbers");
  for (std::size_t i = 0; i < 3; ++i) out[i] = v[i].get<double>();
}

}  // namespace internal

/// Parses one case; `defaults` is merged underneath (JSON merge patch).
inline LoadCaseConfig parse_case(const Json& raw, const Json& defaults = Json::object()) {
  Json j = defaults.is_object() ? defaults : Json::object();
  j.merge_patch(raw);
  const std::string where = "case " + (j.contains("id") && j["id"].is_string()
                                           ? "'" + j["id"].get<std::string>() + "'"
                                           : std::string("<no id>"));
  internal::check_keys(j,
                       {"id", "lc", "family", "controller", "seed", "duration_s", "fault_onset_s",
                        "rate_limit_deg_s", "disturbance", "fault", "plant", "tuning", "mbc"},
                       where);
  if (!j.contains("id") || !j["id"].is_string()) throw ConfigError(where + ": missing string 'id'");
  if (!j.contains("controller")) throw ConfigError(where + ": missing 'controller'");
  if (!j.contains("seed")) throw ConfigError(where + ": missing 'seed' (no ambient randomness)");

  LoadCaseConfig c;
  c.id = j["id"].get<std::string>();
  c.lc = j.value("lc", c.id);
  c.family = j.value("family", c.lc);
  c.controller = controller_from_string(j["controller"].get<std::string>());
  internal::read(j, "seed", c.seed, where);
  internal::read(j, "duration_s", c.duration_s, where);
  internal::read(j, "fault_onset_s", c.fault_onset_s, where);
  internal::read(j, "rate_limit_deg_s", c.rate_limit, where);

  if (j.contains("plant")) {
    const auto& p = j["plant"];
    const std::string w = where + ".plant";
    internal::check_keys(p, {"natural_frequency", "damping", "dc_gain", "coupling", "observer_poles",
                             "dt", "period", "operating_pitch"},
                         w);
    internal::read(p, "natural_frequency", c.plant.channel.natural_frequency, w);
    internal::read(p, "damping", c.plant.channel.damping, w);
    internal::read(p, "dc_gain", c.plant.channel.dc_gain, w);
    internal::read(p, "coupling", c.plant.coupling, w);
    internal::read(p, "observer_poles", c.plant.observer_poles, w);
    internal::read(p, "dt", c.plant.dt, w);
    internal::read(p, "period", c.plant.period, w);
    internal::read(p, "operating_pitch", c.plant.operating_pitch, w);
  }

  if (j.contains("disturbance")) {
    const auto& d = j["disturbance"];
    const std::string w = where + ".disturbance";
    internal::check_keys(d, {"amplitude_1p", "amplitude_2p", "phase_1p", "phase_2p", "noise_sd",
                             "period_jitter"},
                         w);
    internal::read_array3(d, "amplitude_1p", c.disturbance.amplitude_1p, w);
    internal::read_array3(d, "amplitude_2p", c.disturbance.amplitude_2p, w);
    internal::read_array3(d, "phase_1p", c.disturbance.phase_1p, w);
    internal::read_array3(d, "phase_2p", c.disturbance.phase_2p, w);
    internal::read(d, "noise_sd", c.disturbance.noise_sd, w);
    internal::read(d, "period_jitter", c.disturbance.period_jitter, w);
  }
  c.disturbance.seed = c.seed;

  if (j.contains("fault")) {
    const auto& f = j["fault"];
    const std::string w = where + ".fault";
    internal::check_keys(f, {"kind", "blade", "parameter"}, w);
    try {
      c.fault.kind = plant::fault_kind_from_string(f.value("kind", std::string("healthy")));
    } catch (const InvalidArgument& e) {
      throw ConfigError(w + ": " + e.what());
    }
    internal::read(f, "blade", c.fault.blade, w);
    internal::read(f, "parameter", c.fault.parameter, w);
  }
  c.fault.onset = std::llround(c.fault_onset_s / c.plant.dt);

  if (j.contains("tuning")) {
    const auto& t = j["tuning"];
    const std::string w = where + ".tuning";
    internal::check_keys(t, {"alpha", "beta", "q_y", "q_dtheta", "q_dy", "r", "theta_cap",
                             "excitation_cap", "excitation_smoothing", "warmup_rotations", "lambda",
                             "window", "unrestricted_amplitude", "unrestricted_cutoff_hz",
                             "unrestricted_hold_s", "dare_tol", "dare_max_iter"},
                         w);
    auto& s = c.tuning;
    internal::read(t, "alpha", s.alpha, w);
    internal::read(t, "beta", s.beta, w);
    internal::read(t, "q_y", s.weights.q_y, w);
    internal::read(t, "q_dtheta", s.weights.q_dtheta, w);
    internal::read(t, "q_dy", s.weights.q_dy, w);
    internal::read(t, "r", s.weights.r, w);
    internal::read(t, "theta_cap", s.theta_cap, w);
    internal::read(t, "excitation_cap", s.excitation_cap, w);
    internal::read(t, "excitation_smoothing", s.excitation_smoothing, w);
    internal::read(t, "warmup_rotations", s.warmup_rotations, w);
    internal::read(t, "lambda", s.lambda, w);
    internal::read(t, "window", s.window, w);
    internal::read(t, "unrestricted_amplitude", s.unrestricted_amplitude, w);
    internal::read(t, "unrestricted_cutoff_hz", s.unrestricted_cutoff_hz, w);
    internal::read(t, "unrestricted_hold_s", s.unrestricted_hold_s, w);
    internal::read(t, "dare_tol", s.dare_tol, w);
    internal::read(t, "dare_max_iter", s.dare_max_iter, w);
  }
  c.tuning.period = c.plant.period;
  c.tuning.dt = c.plant.dt;
  c.tuning.blades = plant::kBlades;
  c.tuning.restricted = c.controller != ControllerKind::Uftipc;
  // Independent stream family for the controller's excitation.
  c.tuning.seed = c.seed ^ 0xa5a5a5a55a5a5a5aULL;

  if (j.contains("mbc")) {
    const auto& m = j["mbc"];
    const std::string w = where + ".mbc";
    internal::check_keys(m, {"kp", "ki", "cap", "psi0"}, w);
    internal::read(m, "kp", c.mbc.kp, w);
    internal::read(m, "ki", c.mbc.ki, w);
    internal::read(m, "cap", c.mbc.cap, w);
    internal::read(m, "psi0", c.mbc.psi0, w);
  }

  c.validate();
  return c;
}

inline Json to_json(const LoadCaseConfig& c) {
  Json j;
  j["id"] = c.id;
  j["lc"] = c.lc;
  j["family"] = c.family;
  j["controller"] = to_string(c.controller);
  j["seed"] = c.seed;
  j["duration_s"] = c.duration_s;
  j["fault_onset_s"] = c.fault_onset_s;
  j["rate_limit_deg_s"] = c.rate_limit;
  j["disturbance"] = {{"amplitude_1p", c.disturbance.amplitude_1p},
                      {"amplitude_2p", c.disturbance.amplitude_2p},
                      {"phase_1p", c.disturbance.phase_1p},
                      {"phase_2p", c.disturbance.phase_2p},
                      {"noise_sd", c.disturbance.noise_sd},
                      {"period_jitter", c.disturbance.period_jitter}};
  j["fault"] = {{"kind", std::string(plant::to_string(c.fault.kind))},
                {"blade", c.fault.blade},
                {"parameter", c.fault.parameter}};
  j["plant"] = {{"natural_frequency", c.plant.channel.natural_frequency},
                {"damping", c.plant.channel.damping},
                {"dc_gain", c.plant.channel.dc_gain},
                {"coupling", c.plant.coupling},
                {"observer_poles", c.plant.observer_poles},
                {"dt", c.plant.dt},
                {"period", c.plant.period},
                {"operating_pitch", c.plant.operating_pitch}};
  const auto& s = c.tuning;
  j["tuning"] = {{"alpha", s.alpha},
                 {"beta", s.beta},
                 {"q_y", s.weights.q_y},
                 {"q_dtheta", s.weights.q_dtheta},
                 {"q_dy", s.weights.q_dy},
                 {"r", s.weights.r},
                 {"theta_cap", s.theta_cap},
                 {"excitation_cap", s.excitation_cap},
                 {"excitation_smoothing", s.excitation_smoothing},
                 {"warmup_rotations", s.warmup_rotations},
                 {"lambda", s.lambda},
                 {"window", s.window},
                 {"unrestricted_amplitude", s.unrestricted_amplitude},
                 {"unrestricted_cutoff_hz", s.unrestricted_cutoff_hz},
                 {"unrestricted_hold_s", s.unrestricted_hold_s},
                 {"dare_tol", s.dare_tol},
                 {"dare_max_iter", s.dare_max_iter}};
  j["mbc"] = {{"kp", c.mbc.kp}, {"ki", c.mbc.ki}, {"cap", c.mbc.cap}, {"psi0", c.mbc.psi0}};
  return j;
}

/// {"defaults": {...}, "cases": [...]}; ids must be unique.
inline std::vector<LoadCaseConfig> parse_campaign(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("campaign: top level must be an object");
  internal::check_keys(doc, {"name", "description", "defaults", "cases"}, "campaign");
  if (!doc.contains("cases") || !doc["cases"].is_array()) {
    throw ConfigError("campaign: missing 'cases' array");
  }
  const Json defaults = doc.value("defaults", Json::object());
  std::vector<LoadCaseConfig> out;
  std::set<std::string> ids;
  for (const auto& raw : doc["cases"]) {
    auto c = parse_case(raw, defaults);
    if (!ids.insert(c.id).second) throw ConfigError("campaign: duplicate case id '" + c.id + "'");
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Default campaign
// ---------------------------------------------------------------------------

struct LoadLevel {
  const char* name;
  double a1p;
  double operating_pitch;
  double stuck_pitch;
};

inline constexpr std::array<LoadLevel, 2> kLoadLevels{{{"16 m/s analog", 450.0, 6.0, 0.0},
                                                       {"20 m/s analog", 600.0, 12.0, 10.0}}};
inline constexpr std::array<double, 3> kTurbulenceLevels{0.0, 0.0375, 0.15};
inline constexpr double kSecondHarmonicRatio = 0.25;

/// One load case (all controllers share its seed). lc_number is 1-based in
/// the order level -> fault kind (pad, pas, blade) -> turbulence.
inline LoadCaseConfig make_load_case(int lc_number, ControllerKind controller) {
  detail::require(lc_number >= 1 && lc_number <= 18, "load case number must be 1..18");
  const int idx = lc_number - 1;
  const auto& level = kLoadLevels[static_cast<std::size_t>(idx / 9)];
  const int fault_idx = (idx % 9) / 3;
  const double ti = kTurbulenceLevels[static_cast<std::size_t>(idx % 3)];
  const int family_first = (idx / 3) * 3 + 1;

  LoadCaseConfig c;
  char buf[64];
  std::snprintf(buf, sizeof buf, "LC%02d", lc_number);
  c.lc = buf;
  std::snprintf(buf, sizeof buf, "LC%02d-%02d", family_first, family_first + 2);
  c.family = buf;
  c.controller = controller;
  c.id = c.lc + "-" + to_string(controller);
  c.seed = 1000 + static_cast<std::uint64_t>(lc_number);
  c.plant.operating_pitch = level.operating_pitch;
  c.disturbance = plant::DisturbanceModel::uniform(level.a1p, kSecondHarmonicRatio * level.a1p,
                                                   ti * level.a1p, c.seed);
  c.fault.blade = 3;
  switch (fault_idx) {
    case 0:
      c.fault.kind = plant::FaultKind::PitchActuatorDegradation;
      c.fault.parameter = 0.5;
      break;
    case 1:
      c.fault.kind = plant::FaultKind::PitchActuatorStuck;
      c.fault.parameter = level.stuck_pitch;
      break;
    default:
      c.fault.kind = plant::FaultKind::BladeStiffness;
      c.fault.parameter = 0.2;
      break;
  }
  c.fault.onset = std::llround(c.fault_onset_s / c.plant.dt);
  c.tuning.restricted = controller != ControllerKind::Uftipc;
  c.tuning.seed = c.seed ^ 0xa5a5a5a55a5a5a5aULL;
  return c;
}

/// Same load level and turbulence as make_load_case but without a fault.
inline LoadCaseConfig make_healthy_case(int level, int ti_index, ControllerKind controller) {
  auto c = make_load_case(level * 9 + ti_index + 1, controller);
  c.fault = plant::FaultScenario{};
  c.fault.onset = std::llround(c.fault_onset_s / c.plant.dt);
  c.lc = "H" + std::to_string(level + 1) + std::to_string(ti_index + 1);
  c.family = "healthy";
  c.id = c.lc + "-" + to_string(controller);
  return c;
}

/// 18 load cases x {cpc, mbc_ipc, ftipc}.
inline std::vector<LoadCaseConfig> default_campaign() {
  std::vector<LoadCaseConfig> out;
  for (int lc = 1; lc <= 18; ++lc) {
    for (auto k : {ControllerKind::Cpc, ControllerKind::MbcIpc, ControllerKind::Ftipc}) {
      out.push_back(make_load_case(lc, k));
    }
  }
  return out;
}

inline Json campaign_to_json(const std::vector<LoadCaseConfig>& cases, const std::string& name) {
  Json doc;
  doc["name"] = name;
  doc["cases"] = Json::array();
  for (const auto& c : cases) doc["cases"].push_back(to_json(c));
  return doc;
}

// ---------------------------------------------------------------------------
// Run
// ---------------------------------------------------------------------------

struct TimeSeries {
  double dt = 0.01;
  std::vector<double> t;
  std::array<std::vector<double>, kBlades> u;  // commanded absolute pitch, deg
  std::array<std::vector<double>, kBlades> y;  // blade load
  std::vector<double> psi;                     // rad

  std::size_t size() const { return t.size(); }

  void reserve(std::size_t n) {
    t.reserve(n);
    psi.reserve(n);
    for (auto& v : u) v.reserve(n);
    for (auto& v : y) v.reserve(n);
  }
  void clear() {
    t = {};
    psi = {};
    for (auto& v : u) v = {};
    for (auto& v : y) v = {};
  }
};

struct RotationEntry {
  std::int64_t j = 0;
  std::array<double, kBlades> band_power{};
  bool has_controller = false;
  control::RotationRecord controller;
};

struct WindowMetrics {
  std::array<double, kBlades> load_sd{};
  std::array<double, kBlades> load_mean{};
  std::array<double, kBlades> pitch_mean{};
  std::array<double, kBlades> adc{};
  std::array<double, kBlades> pitch_band_ratio{};
};

/// Everything needed to recompute the metrics from a stored series.
struct MetricsContext {
  double dt = 0.01;
  Index period = 100;
  double rate_limit = metrics::kDefaultRateLimit;
  metrics::WindowSpec windows;
};

struct RunMetrics {
  std::string id;
  std::string lc;
  std::string family;
  std::string controller;
  std::uint64_t seed = 0;
  std::string fault_kind = "healthy";
  int fault_blade = 0;  // 0 when healthy
  double fault_parameter = 0.0;
  double fault_onset_s = 0.0;
  std::int64_t samples = 0;
  MetricsContext context;
  WindowMetrics healthy;
  WindowMetrics faulty;
  std::int64_t dare_failures = 0;
  std::int64_t clamp_events = 0;
  std::string status = "ok";
  std::string error;
};

inline double pitch_band_ratio(std::span<const double> pitch, double dt, Index period) {
  const auto n = static_cast<Index>(pitch.size());
  Index seg = 2048;
  while (seg > n) seg /= 2;
  if (seg < 256) return kNaN;
  const auto psd = numerics::welch_psd(pitch, 1.0 / dt, seg);
  const double f1p = 1.0 / (static_cast<double>(period) * dt);
  return metrics::band_energy_ratio(psd, metrics::harmonic_bands(f1p));
}

inline WindowMetrics window_metrics(const TimeSeries& s, const MetricsContext& ctx,
                                    metrics::Regime which) {
  WindowMetrics w;
  for (std::size_t i = 0; i < kBlades; ++i) {
    const auto y = metrics::window_view(s.y[i], ctx.windows, which, ctx.dt);
    const auto u = metrics::window_view(s.u[i], ctx.windows, which, ctx.dt);
    w.load_sd[i] = metrics::standard_deviation(y);
    double ym = 0.0, um = 0.0;
    for (double v : y) ym += v;
    for (double v : u) um += v;
    w.load_mean[i] = ym / static_cast<double>(y.size());
    w.pitch_mean[i] = um / static_cast<double>(u.size());
    w.adc[i] = metrics::adc(u, ctx.dt, ctx.rate_limit);
    w.pitch_band_ratio[i] = pitch_band_ratio(u, ctx.dt, ctx.period);
  }
  return w;
}

/// Pure function of the series; used for the run and for the round-trip check.
inline void compute_window_metrics(const TimeSeries& s, RunMetrics& m) {
  m.samples = static_cast<std::int64_t>(s.size());
  m.healthy = window_metrics(s, m.context, metrics::Regime::Healthy);
  m.faulty = window_metrics(s, m.context, metrics::Regime::Faulty);
}

struct RunResult {
  LoadCaseConfig config;
  bool ok = false;
  std::string error;
  TimeSeries series;
  std::vector<RotationEntry> rotations;
  RunMetrics metrics;
  double wall_seconds = 0.0;
};

namespace internal {

class Driver {
 public:
  virtual ~Driver() = default;
  virtual const Vector& command(std::int64_t k, double psi) = 0;
  virtual void observe(std::int64_t k, const Vector& u, const Vector& y, double psi) = 0;
  virtual const control::SprcController* sprc() const { return nullptr; }
};

class CpcDriver final : public Driver {
 public:
  CpcDriver() : u_(Vector::Zero(plant::kBlades)) {}
  const Vector& command(std::int64_t, double) override { return u_; }
  void observe(std::int64_t, const Vector&, const Vector&, double) override {}

 private:
  Vector u_;
};

class MbcDriver final : public Driver {
 public:
  MbcDriver(const baselines::MbcIpcGains& g, double dt) : mbc_(g, dt) {}
  const Vector& command(std::int64_t k, double psi) override {
    u_ = mbc_.command(k, psi);
    return u_;
  }
  void observe(std::int64_t k, const Vector&, const Vector& y, double psi) override {
    mbc_.observe(k, y, psi);
  }

 private:
  baselines::MbcIpcController mbc_;
  Vector u_;
};

class SprcDriver final : public Driver {
 public:
  explicit SprcDriver(const control::SprcConfig& cfg) : ctl_(cfg) {}
  const Vector& command(std::int64_t k, double psi) override { return ctl_.command(k, psi); }
  void observe(std::int64_t k, const Vector& u, const Vector& y, double) override {
    ctl_.observe(k, u, y);
  }
  const control::SprcController* sprc() const override { return &ctl_; }

 private:
  control::SprcController ctl_;
};

inline std::unique_ptr<Driver> make_driver(const LoadCaseConfig& c) {
  switch (c.controller) {
    case ControllerKind::Cpc: return std::make_unique<CpcDriver>();
    case ControllerKind::MbcIpc: return std::make_unique<MbcDriver>(c.mbc, c.plant.dt);
    case ControllerKind::Ftipc:
    case ControllerKind::Uftipc: return std::make_unique<SprcDriver>(c.tuning);
  }
  throw ConfigError("unknown controller");
}

}  // namespace internal

inline RunMetrics metrics_header(const LoadCaseConfig& c) {
  RunMetrics m;
  m.id = c.id;
  m.lc = c.lc;
  m.family = c.family;
  m.controller = to_string(c.controller);
  m.seed = c.seed;
  m.fault_kind = std::string(plant::to_string(c.fault.kind));
  m.fault_blade = c.fault.kind == plant::FaultKind::Healthy ? 0 : c.fault.blade;
  m.fault_parameter = c.fault.parameter;
  m.fault_onset_s = c.fault_onset_s;
  m.context.dt = c.plant.dt;
  m.context.period = c.plant.period;
  m.context.rate_limit = c.rate_limit;
  m.context.windows = metrics::WindowSpec::for_run(c.duration_s, c.fault_onset_s);
  return m;
}

/// Runs one load case. Failures (divergence, bad configuration) are reported
/// in the result rather than thrown.
inline RunResult run_load_case(const LoadCaseConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult r;
  r.config = cfg;
  r.metrics = metrics_header(cfg);
  try {
    cfg.validate();
    const std::int64_t n = cfg.samples();
    plant::PlantSimulator sim(plant::make_plant(cfg.plant), cfg.disturbance, cfg.fault);
    auto driver = internal::make_driver(cfg);
    auto& s = r.series;
    s.dt = cfg.plant.dt;
    s.reserve(static_cast<std::size_t>(n));
    Vector u(plant::kBlades);
    for (std::int64_t k = 0; k < n; ++k) {
      const double psi = sim.azimuth();
      u = driver->command(k, psi);
      u.array() += cfg.plant.operating_pitch;
      const Vector& y = sim.step(u, k);
      driver->observe(k, u, y, psi);
      s.t.push_back(static_cast<double>(k) * cfg.plant.dt);
      s.psi.push_back(psi);
      for (std::size_t i = 0; i < kBlades; ++i) {
        s.u[i].push_back(u(static_cast<Index>(i)));
        s.y[i].push_back(y(static_cast<Index>(i)));
      }
    }

    std::array<std::vector<double>, kBlades> power;
    for (std::size_t i = 0; i < kBlades; ++i) {
      power[i] = metrics::rotation_band_power(s.y[i], cfg.plant.period);
    }
    const auto* sprc = driver->sprc();
    r.rotations.resize(power[0].size());
    for (std::size_t j = 0; j < power[0].size(); ++j) {
      auto& e = r.rotations[j];
      e.j = static_cast<std::int64_t>(j);
      for (std::size_t i = 0; i < kBlades; ++i) e.band_power[i] = power[i][j];
      if (sprc != nullptr && j < sprc->log().size()) {
        e.has_controller = true;
        e.controller = sprc->log()[j];
      }
    }
    if (sprc != nullptr) {
      r.metrics.dare_failures = sprc->state().dare_failures;
      r.metrics.clamp_events = sprc->state().clamp_events;
    }
    compute_window_metrics(s, r.metrics);
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
    r.metrics.status = "failed";
    r.metrics.error = e.what();
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// ---------------------------------------------------------------------------
// Campaign
// ---------------------------------------------------------------------------

struct CampaignEntry {
  LoadCaseConfig config;
  RunMetrics metrics;
  std::vector<RotationEntry> rotations;
  bool ok = false;
  std::string error;
  double wall_seconds = 0.0;
};

/// Called on the worker thread as each run finishes, before its series is
/// released (e.g. to persist it). Calls are serialized.
using RunSink = std::function<void(const RunResult&)>;

/// Runs every case with up to `jobs` worker threads. Entry i always belongs to
/// configs[i], independent of scheduling.
inline std::vector<CampaignEntry> run_campaign(const std::vector<LoadCaseConfig>& configs,
                                               unsigned jobs = 1, const RunSink& sink = {}) {
  std::vector<CampaignEntry> out(configs.size());
  if (configs.empty()) return out;
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
  std::atomic<std::size_t> next{0};
  std::mutex sink_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      RunResult r = run_load_case(configs[i]);
      if (sink) {
        std::lock_guard<std::mutex> lock(sink_mutex);
        try {
          sink(r);
        } catch (const std::exception& e) {
          r.ok = false;
          r.error = std::string("persisting results failed: ") + e.what();
          r.metrics.status = "failed";
          r.metrics.error = r.error;
        }
      }
      auto& e = out[i];
      e.config = configs[i];
      e.metrics = std::move(r.metrics);
      e.rotations = std::move(r.rotations);
      e.ok = r.ok;
      e.error = std::move(r.error);
      e.wall_seconds = r.wall_seconds;
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

struct ComparisonRow {
  std::string lc;
  std::string family;
  std::string controller;
  std::uint64_t seed = 0;
  int faulty_blade = 0;
  std::array<double, kBlades> rsd{};  // faulty window; NaN for the faulty blade
  std::array<double, kBlades> adc{};  // faulty window
  std::array<bool, kBlades> negative{};
};

struct FamilySummary {
  std::string family;
  std::string controller;
  int faulty_blade = 0;
  std::array<double, kBlades> mean_rsd{};
  std::array<double, kBlades> mean_adc{};
  int cases = 0;
};

struct ComparisonTable {
  std::string baseline;
  std::vector<ComparisonRow> rows;
  std::vector<FamilySummary> families;
  std::vector<std::string> notes;
};

/// rSD (faulty window) and ADC of every run against the baseline controller
/// of the same load case.
inline ComparisonTable compare(const std::vector<RunMetrics>& runs, const std::string& baseline) {
  ComparisonTable table;
  table.baseline = baseline;
  std::map<std::string, const RunMetrics*> base;
  for (const auto& m : runs) {
    if (m.controller == baseline && m.status == "ok") base[m.lc] = &m;
  }
  std::vector<const RunMetrics*> ordered;
  for (const auto& m : runs) ordered.push_back(&m);
  std::stable_sort(ordered.begin(), ordered.end(), [](const RunMetrics* a, const RunMetrics* b) {
    return a->lc != b->lc ? a->lc < b->lc : a->controller < b->controller;
  });

  std::set<int> omitted;
  for (const RunMetrics* m : ordered) {
    if (m->status != "ok") {
      table.notes.push_back("run " + m->id + " failed: " + m->error);
      continue;
    }
    auto it = base.find(m->lc);
    if (it == base.end()) {
      throw InvalidArgument("compare: load case " + m->lc + " has no '" + baseline + "' run");
    }
    const RunMetrics& b = *it->second;
    if (b.seed != m->seed || b.fault_kind != m->fault_kind || b.fault_blade != m->fault_blade) {
      throw InvalidArgument("compare: run " + m->id + " does not match the baseline of " + m->lc +
                            " (seed or fault differs)");
    }
    ComparisonRow row;
    row.lc = m->lc;
    row.family = m->family;
    row.controller = m->controller;
    row.seed = m->seed;
    row.faulty_blade = m->fault_blade;
    for (std::size_t i = 0; i < kBlades; ++i) {
      row.adc[i] = m->faulty.adc[i];
      if (static_cast<int>(i) + 1 == m->fault_blade) {
        row.rsd[i] = kNaN;
        omitted.insert(m->fault_blade);
        continue;
      }
      row.rsd[i] = metrics::rsd(b.faulty.load_sd[i], m->faulty.load_sd[i]);
      row.negative[i] = row.rsd[i] < 0.0;
    }
    table.rows.push_back(row);
  }

  std::map<std::pair<std::string, std::string>, FamilySummary> fam;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : table.rows) {
    const auto key = std::make_pair(r.family, r.controller);
    auto [it, inserted] = fam.try_emplace(key);
    if (inserted) {
      order.push_back(key);
      it->second.family = r.family;
      it->second.controller = r.controller;
      it->second.faulty_blade = r.faulty_blade;
    }
    auto& f = it->second;
    for (std::size_t i = 0; i < kBlades; ++i) {
      f.mean_rsd[i] += r.rsd[i];
      f.mean_adc[i] += r.adc[i];
    }
    ++f.cases;
  }
  for (const auto& key : order) {
    auto f = fam[key];
    for (std::size_t i = 0; i < kBlades; ++i) {
      f.mean_rsd[i] /= f.cases;
      f.mean_adc[i] /= f.cases;
    }
    table.families.push_back(f);
  }
  for (int blade : omitted) {
    table.notes.push_back("blade " + std::to_string(blade) +
                          " rSD is not shown in fault cases since it is the faulty blade");
  }
  return table;
}

}  // namespace sprc::harness
