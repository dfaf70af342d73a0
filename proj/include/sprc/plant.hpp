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

// Surrogate three-blade rotor: per-blade second-order load channels in
// innovation form, rotor-periodic 1P/2P blade-load disturbances and
// injectable pitch-actuator and blade-stiffness faults.
//
// Units: pitch in deg, blade load in "load units" (MOoP analog), time in s.

#pragma once

#include "sprc/common.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace sprc::plant {

inline constexpr Index kBlades = 3;
inline constexpr Index kStatesPerBlade = 2;

// ---------------------------------------------------------------------------
// Faults
// ---------------------------------------------------------------------------

enum class FaultKind { Healthy, PitchActuatorStuck, PitchActuatorDegradation, BladeStiffness };

inline std::string_view to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::Healthy: return "healthy";
    case FaultKind::PitchActuatorStuck: return "pas";
    case FaultKind::PitchActuatorDegradation: return "pad";
    case FaultKind::BladeStiffness: return "blade";
  }
  return "?";
}

inline FaultKind fault_kind_from_string(std::string_view s) {
  if (s == "healthy") return FaultKind::Healthy;
  if (s == "pas") return FaultKind::PitchActuatorStuck;
  if (s == "pad") return FaultKind::PitchActuatorDegradation;
  if (s == "blade") return FaultKind::BladeStiffness;
  throw InvalidArgument("unknown fault kind '" + std::string(s) + "'");
}

/// A single-blade fault switched on at sample `onset`.
///  - PAS: `parameter` is the stuck pitch angle (deg).
///  - PAD: `parameter` is the effectiveness loss, 0 < p <= 1.
///  - BladeStiffness: `parameter` is the stiffness scale a, 0 < a <= 1.
struct FaultScenario {
  FaultKind kind = FaultKind::Healthy;
  int blade = 3;  // 1-based
  std::int64_t onset = 0;
  double parameter = 0.0;

  void validate() const {
    if (kind == FaultKind::Healthy) return;
    detail::require(blade >= 1 && blade <= kBlades, "fault blade must be 1, 2 or 3");
    detail::require(onset >= 0, "fault onset must be non-negative");
    detail::require(std::isfinite(parameter), "fault parameter must be finite");
    if (kind == FaultKind::PitchActuatorDegradation) {
      detail::require(parameter > 0.0 && parameter <= 1.0, "PAD scale must be in (0, 1]");
    }
    if (kind == FaultKind::BladeStiffness) {
      detail::require(parameter > 0.0 && parameter <= 1.0, "stiffness scale must be in (0, 1]");
    }
  }

  bool active(std::int64_t k) const { return kind != FaultKind::Healthy && k >= onset; }
  Index blade_index() const { return blade - 1; }
};

/// Effective actuator positions for commanded pitch `u_cmd` at sample k.
inline Vector apply_actuator_fault(const Vector& u_cmd, const FaultScenario& fault,
                                   std::int64_t k) {
  Vector u = u_cmd;
  if (!fault.active(k)) return u;
  const Index f = fault.blade_index();
  switch (fault.kind) {
    case FaultKind::PitchActuatorStuck: u(f) = fault.parameter; break;
    case FaultKind::PitchActuatorDegradation: u(f) = (1.0 - fault.parameter) * u(f); break;
    default: break;
  }
  return u;
}

// ---------------------------------------------------------------------------
// Disturbance
// ---------------------------------------------------------------------------

/// Rotor-periodic blade loads plus white innovation noise. Blade i sees the
/// 1P and 2P sinusoids shifted by its azimuth offset 2*pi*(i-1)/3.
struct DisturbanceModel {
  std::array<double, kBlades> amplitude_1p{};
  std::array<double, kBlades> phase_1p{};
  std::array<double, kBlades> amplitude_2p{};
  std::array<double, kBlades> phase_2p{};
  double noise_sd = 0.0;
  double period_jitter = 0.0;  // fractional rotor-speed variation per rotation
  std::uint64_t seed = 0;

  static DisturbanceModel uniform(double a1p, double a2p, double noise_sd, std::uint64_t seed) {
    DisturbanceModel d;
    d.amplitude_1p.fill(a1p);
    d.amplitude_2p.fill(a2p);
    d.noise_sd = noise_sd;
    d.seed = seed;
    return d;
  }

  static double blade_offset(Index blade) {
    return kTwoPi * static_cast<double>(blade) / static_cast<double>(kBlades);
  }

  /// Periodic load on blade (0-based) at rotor azimuth psi.
  double periodic(Index blade, double psi) const {
    const auto i = static_cast<std::size_t>(blade);
    const double az = psi + blade_offset(blade);
    return amplitude_1p[i] * std::sin(az + phase_1p[i]) +
           amplitude_2p[i] * std::sin(2.0 * az + phase_2p[i]);
  }

  void validate() const {
    for (std::size_t i = 0; i < kBlades; ++i) {
      detail::require(std::isfinite(amplitude_1p[i]) && std::isfinite(amplitude_2p[i]) &&
                          std::isfinite(phase_1p[i]) && std::isfinite(phase_2p[i]),
                      "disturbance amplitudes and phases must be finite");
    }
    detail::require(noise_sd >= 0.0 && std::isfinite(noise_sd), "noise SD must be >= 0");
    detail::require(period_jitter >= 0.0 && period_jitter < 0.5, "period jitter must be in [0, 0.5)");
  }
};

// ---------------------------------------------------------------------------
// Plant
// ---------------------------------------------------------------------------

/// Mass-spring-damper analog of one blade's out-of-plane load response.
struct ChannelParams {
  double natural_frequency = 50.0;  // rad/s
  double damping = 0.7;
  double dc_gain = -1.5e3;          // load units per deg
};

struct PlantParams {
  ChannelParams channel;
  double coupling = 0.05;                       // pitch of blade j on load of blade i
  std::array<double, 2> observer_poles{0.25, 0.35};  // eigenvalues of A - LC per blade
  double dt = 0.01;
  Index period = 100;
  double operating_pitch = 0.0;  // deg, collective linearization point

  void validate() const {
    detail::require(channel.natural_frequency > 0.0 && channel.damping > 0.0,
                    "natural frequency and damping must be positive");
    detail::require(std::isfinite(channel.dc_gain) && channel.dc_gain != 0.0,
                    "DC gain must be finite and non-zero");
    detail::require(coupling >= 0.0 && coupling < 0.5, "coupling must be in [0, 0.5)");
    for (double pole : observer_poles) {
      detail::require(std::abs(pole) < 1.0, "observer poles must lie inside the unit circle");
    }
    detail::require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
    detail::require(period >= 8, "rotor period must be at least 8 samples");
    detail::require(std::isfinite(operating_pitch), "operating pitch must be finite");
  }
};

/// Discrete innovation-form model
///   x+ = A x + B (u - u_op) + L e,   y = C x + d + e
/// with block-diagonal A, C, L (one 2-state channel per blade) and weak
/// blade-to-blade coupling through B.
struct SurrogatePlant {
  Matrix a;
  Matrix b;
  Matrix c;
  Matrix l;
  Vector x;
  double dt = 0.01;
  Index period = 100;
  double operating_pitch = 0.0;
  double coupling = 0.0;
  std::array<double, 2> observer_poles{};
  std::array<ChannelParams, kBlades> channels{};
  std::array<double, kBlades> disturbance_gain{1.0, 1.0, 1.0};

  Index states() const { return a.rows(); }
  Index inputs() const { return b.cols(); }
  Index outputs() const { return c.rows(); }
};

namespace internal {

struct Channel {
  Eigen::Matrix2d a;
  Eigen::Vector2d b;
  Eigen::RowVector2d c;
  Eigen::Vector2d l;
};

/// Zero-order-hold discretization of x'' = -w^2 x - 2 z w x' + w^2 g u, y = x,
/// plus an innovation gain placing eig(A - L C) at the requested poles.
inline Channel make_channel(const ChannelParams& p, double dt, const std::array<double, 2>& poles) {
  const double w = p.natural_frequency;
  Eigen::Matrix3d aug = Eigen::Matrix3d::Zero();
  aug(0, 1) = 1.0;
  aug(1, 0) = -w * w;
  aug(1, 1) = -2.0 * p.damping * w;
  aug(1, 2) = w * w * p.dc_gain;
  const Eigen::Matrix3d phi = (aug * dt).exp();

  Channel ch;
  ch.a = phi.topLeftCorner<2, 2>();
  ch.b = phi.topRightCorner<2, 1>();
  ch.c << 1.0, 0.0;

  // Ackermann: L = q(A) O^-1 e2 with q(z) = (z - p1)(z - p2).
  Eigen::Matrix2d obs;
  obs.row(0) = ch.c;
  obs.row(1) = ch.c * ch.a;
  const Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d q = (ch.a - poles[0] * eye) * (ch.a - poles[1] * eye);
  ch.l = q * obs.inverse() * Eigen::Vector2d(0.0, 1.0);
  return ch;
}

inline void assemble(SurrogatePlant& plant) {
  const Index n = kBlades * kStatesPerBlade;
  plant.a = Matrix::Zero(n, n);
  plant.b = Matrix::Zero(n, kBlades);
  plant.c = Matrix::Zero(kBlades, n);
  plant.l = Matrix::Zero(n, kBlades);
  for (Index i = 0; i < kBlades; ++i) {
    const auto ch = make_channel(plant.channels[static_cast<std::size_t>(i)], plant.dt,
                                 plant.observer_poles);
    const Index o = i * kStatesPerBlade;
    plant.a.block<2, 2>(o, o) = ch.a;
    plant.c.block<1, 2>(i, o) = ch.c;
    plant.l.block<2, 1>(o, i) = ch.l;
    for (Index j = 0; j < kBlades; ++j) {
      plant.b.block<2, 1>(o, j) = (i == j ? 1.0 : plant.coupling) * ch.b;
    }
  }
  if (plant.x.size() != n) plant.x = Vector::Zero(n);
}

}  // namespace internal

inline SurrogatePlant make_plant(const PlantParams& params) {
  params.validate();
  SurrogatePlant plant;
  plant.dt = params.dt;
  plant.period = params.period;
  plant.operating_pitch = params.operating_pitch;
  plant.coupling = params.coupling;
  plant.observer_poles = params.observer_poles;
  plant.channels.fill(params.channel);
  internal::assemble(plant);
  return plant;
}

/// Reference plant: n = 6, DC gain -1.5e3 per deg, 5 % coupling,
/// dt = 0.01 s, P = 100. The plant is deterministic; the seed only feeds the
/// disturbance model and is accepted for interface symmetry.
inline SurrogatePlant default_plant(std::uint64_t /*seed*/ = 0) { return make_plant(PlantParams{}); }

/// Faulty-blade channel stiffness scaled by a: natural frequency * sqrt(a),
/// periodic load gain * 1/a. Input DC gain and the other blades are unchanged.
inline SurrogatePlant apply_blade_fault(const SurrogatePlant& plant, const FaultScenario& fault) {
  detail::require(fault.kind == FaultKind::BladeStiffness,
                  "apply_blade_fault: fault is not a blade-stiffness fault");
  fault.validate();
  SurrogatePlant out = plant;
  if (fault.parameter == 1.0) return out;
  const auto f = static_cast<std::size_t>(fault.blade_index());
  out.channels[f].natural_frequency *= std::sqrt(fault.parameter);
  out.disturbance_gain[f] /= fault.parameter;

  const Index o = fault.blade_index() * kStatesPerBlade;
  const auto ch = internal::make_channel(out.channels[f], out.dt, out.observer_poles);
  out.a.block<2, 2>(o, o) = ch.a;
  out.l.block<2, 1>(o, fault.blade_index()) = ch.l;
  for (Index j = 0; j < kBlades; ++j) {
    out.b.block<2, 1>(o, j) = (j == fault.blade_index() ? 1.0 : out.coupling) * ch.b;
  }
  return out;
}

/// Predictor-form Markov matrix
///   [C At^(p-1) B ... C B | C At^(p-1) L ... C L],  At = A - L C,
/// oldest lag first, shape l x (r + l) p.
inline Matrix markov_oracle(const SurrogatePlant& plant, Index p) {
  detail::require(p >= 1, "markov_oracle: p must be >= 1");
  const Index r = plant.inputs();
  const Index l = plant.outputs();
  const Matrix at = plant.a - plant.l * plant.c;
  Matrix xi = Matrix::Zero(l, (r + l) * p);
  Matrix c_pow = plant.c;  // C At^(s-1)
  for (Index s = 1; s <= p; ++s) {
    xi.block(0, (p - s) * r, l, r) = c_pow * plant.b;
    xi.block(0, p * r + (p - s) * l, l, l) = c_pow * plant.l;
    c_pow = (c_pow * at).eval();
  }
  return xi;
}

/// Blade i's own SISO row [c At^(p-1) b ... c b | c At^(p-1) l ... c l]
/// from a block-structured Markov matrix.
inline Vector siso_markov_row(const Matrix& xi, Index p, Index r, Index l, Index blade) {
  Vector row(2 * p);
  for (Index s = 0; s < p; ++s) {
    row(s) = xi(blade, s * r + blade);
    row(p + s) = xi(blade, p * r + s * l + blade);
  }
  return row;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Owns the plant state, the disturbance generator and the fault schedule.
/// step() must be called with k = 0, 1, 2, ...
class PlantSimulator {
 public:
  PlantSimulator(SurrogatePlant plant, DisturbanceModel disturbance, FaultScenario fault)
      : plant_(std::move(plant)), disturbance_(disturbance), fault_(fault),
        noise_rng_(disturbance.seed), jitter_rng_(disturbance.seed ^ 0x9e3779b97f4a7c15ULL) {
    disturbance_.validate();
    fault_.validate();
    y_.resize(plant_.outputs());
    e_.resize(plant_.outputs());
  }

  const SurrogatePlant& plant() const { return plant_; }
  const DisturbanceModel& disturbance() const { return disturbance_; }
  const FaultScenario& fault() const { return fault_; }
  std::int64_t next_sample() const { return k_; }

  /// Rotor azimuth of sample k (the next sample to be produced), in [0, 2 pi).
  double azimuth() const {
    if (disturbance_.period_jitter == 0.0) {
      return kTwoPi * static_cast<double>(k_ % plant_.period) / static_cast<double>(plant_.period);
    }
    return jittered_psi_;
  }

  /// Produces y_k for the command u_k and advances the state to k + 1.
  const Vector& step(const Vector& u_cmd, std::int64_t k) {
    detail::require(k == k_, "PlantSimulator::step: samples must be consecutive (expected " +
                                 std::to_string(k_) + ", got " + std::to_string(k) + ")");
    detail::require(u_cmd.size() == plant_.inputs(), "PlantSimulator::step: wrong input size");
    detail::require(u_cmd.allFinite(), "PlantSimulator::step: non-finite command");

    if (fault_.kind == FaultKind::BladeStiffness && k == fault_.onset) {
      plant_ = apply_blade_fault(plant_, fault_);
    }

    const double psi = azimuth();
    if (disturbance_.noise_sd > 0.0) {
      for (Index i = 0; i < e_.size(); ++i) e_(i) = disturbance_.noise_sd * normal_(noise_rng_);
    } else {
      e_.setZero();
    }
    y_.noalias() = plant_.c * plant_.x;
    for (Index i = 0; i < y_.size(); ++i) {
      y_(i) += plant_.disturbance_gain[static_cast<std::size_t>(i)] *
                   disturbance_.periodic(i, psi) +
               e_(i);
    }

    const Vector u_eff = apply_actuator_fault(u_cmd, fault_, k);
    Vector next = plant_.a * plant_.x;
    next.noalias() += plant_.b * (u_eff.array() - plant_.operating_pitch).matrix();
    if (disturbance_.noise_sd > 0.0) next.noalias() += plant_.l * e_;
    if (!next.allFinite() || !y_.allFinite()) {
      throw DivergenceError("plant state became non-finite at sample " + std::to_string(k));
    }
    plant_.x = std::move(next);
    advance_azimuth();
    ++k_;
    return y_;
  }

 private:
  void advance_azimuth() {
    if (disturbance_.period_jitter == 0.0) return;
    const auto p = plant_.period;
    if (k_ % p == 0) {
      std::uniform_real_distribution<double> u(-disturbance_.period_jitter,
                                               disturbance_.period_jitter);
      speed_scale_ = 1.0 + u(jitter_rng_);
    }
    jittered_psi_ = std::fmod(jittered_psi_ + speed_scale_ * kTwoPi / static_cast<double>(p), kTwoPi);
  }

  SurrogatePlant plant_;
  DisturbanceModel disturbance_;
  FaultScenario fault_;
  std::mt19937_64 noise_rng_;
  std::mt19937_64 jitter_rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Vector y_;
  Vector e_;
  std::int64_t k_ = 0;
  double jittered_psi_ = 0.0;
  double speed_scale_ = 1.0;
};

}  // namespace sprc::plant
