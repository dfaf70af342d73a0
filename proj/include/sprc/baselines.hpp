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

// Comparison controllers: constant collective pitch and a Coleman-frame PI
// individual pitch controller.

#pragma once

#include "sprc/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace sprc::baselines {

/// Zero differential pitch; the caller adds the operating point.
inline Vector cpc_baseline(std::int64_t /*k*/, Index blades = 3) { return Vector::Zero(blades); }

struct FixedFrame {
  double tilt = 0.0;
  double yaw = 0.0;
};

inline double blade_azimuth(double psi, Index blade, Index blades = 3) {
  return psi + kTwoPi * static_cast<double>(blade) / static_cast<double>(blades);
}

/// tilt = 2/3 sum y_i cos psi_i, yaw = 2/3 sum y_i sin psi_i.
inline FixedFrame coleman_forward(const Vector& y, double psi) {
  detail::require(y.size() == 3, "coleman_forward: expects three blades");
  detail::require(std::isfinite(psi), "coleman_forward: non-finite azimuth");
  FixedFrame f;
  for (Index i = 0; i < 3; ++i) {
    const double a = blade_azimuth(psi, i);
    f.tilt += y(i) * std::cos(a);
    f.yaw += y(i) * std::sin(a);
  }
  f.tilt *= 2.0 / 3.0;
  f.yaw *= 2.0 / 3.0;
  return f;
}

/// u_i = tilt cos psi_i + yaw sin psi_i.
inline Vector coleman_inverse(const FixedFrame& f, double psi) {
  Vector u(3);
  for (Index i = 0; i < 3; ++i) {
    const double a = blade_azimuth(psi, i);
    u(i) = f.tilt * std::cos(a) + f.yaw * std::sin(a);
  }
  return u;
}

struct MbcIpcGains {
  double kp = 3e-4;  // deg per load unit
  double ki = 3e-4;  // deg per load unit per s
  double cap = 4.0;  // deg, fixed-frame authority and anti-windup bound
  double psi0 = 0.0; // azimuth offset

  void validate() const {
    detail::require(kp >= 0.0 && ki >= 0.0 && std::isfinite(kp) && std::isfinite(ki),
                    "MBC gains must be finite and >= 0");
    detail::require(cap > 0.0, "MBC authority must be positive");
  }
};

struct MbcIpcState {
  MbcIpcGains gains;
  FixedFrame integral;
};

/// One PI step in the fixed frame. The load-to-pitch sign is positive because
/// more pitch lowers the out-of-plane load.
inline Vector mbc_ipc_step(MbcIpcState& state, const Vector& y, double psi, double dt) {
  detail::require(dt > 0.0, "mbc_ipc_step: dt must be positive");
  const auto& g = state.gains;
  const double az = psi + g.psi0;
  const FixedFrame e = coleman_forward(y, az);
  state.integral.tilt = std::clamp(state.integral.tilt + g.ki * dt * e.tilt, -g.cap, g.cap);
  state.integral.yaw = std::clamp(state.integral.yaw + g.ki * dt * e.yaw, -g.cap, g.cap);
  FixedFrame cmd;
  cmd.tilt = std::clamp(g.kp * e.tilt + state.integral.tilt, -g.cap, g.cap);
  cmd.yaw = std::clamp(g.kp * e.yaw + state.integral.yaw, -g.cap, g.cap);
  return coleman_inverse(cmd, az);
}

/// Sample-level wrapper: the fixed-frame command computed from y_{k-1} is
/// mapped back to the blades at the azimuth of sample k.
class MbcIpcController {
 public:
  explicit MbcIpcController(const MbcIpcGains& gains, double dt) : dt_(dt) {
    gains.validate();
    detail::require(dt > 0.0, "MbcIpcController: dt must be positive");
    state_.gains = gains;
  }

  const MbcIpcState& state() const { return state_; }

  Vector command(std::int64_t /*k*/, double psi) const {
    return coleman_inverse(command_, psi + state_.gains.psi0);
  }

  void observe(std::int64_t /*k*/, const Vector& y, double psi) {
    const auto& g = state_.gains;
    const FixedFrame e = coleman_forward(y, psi + g.psi0);
    state_.integral.tilt = std::clamp(state_.integral.tilt + g.ki * dt_ * e.tilt, -g.cap, g.cap);
    state_.integral.yaw = std::clamp(state_.integral.yaw + g.ki * dt_ * e.yaw, -g.cap, g.cap);
    command_.tilt = std::clamp(g.kp * e.tilt + state_.integral.tilt, -g.cap, g.cap);
    command_.yaw = std::clamp(g.kp * e.yaw + state_.integral.yaw, -g.cap, g.cap);
  }

 private:
  double dt_;
  MbcIpcState state_;
  FixedFrame command_;
};

}  // namespace sprc::baselines
