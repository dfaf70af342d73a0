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

#pragma once

#include "sprc/common.hpp"
#include "sprc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sprc::metrics {

inline constexpr double kDefaultRateLimit = 10.0;  // deg/s

/// (sd_baseline - sd_ipc) / sd_baseline; negative when the load grows.
inline double rsd(double sd_baseline, double sd_ipc) {
  detail::require(std::isfinite(sd_baseline) && sd_baseline > 0.0,
                  "rsd: baseline SD must be positive");
  detail::require(std::isfinite(sd_ipc) && sd_ipc >= 0.0, "rsd: SD must be finite and >= 0");
  return (sd_baseline - sd_ipc) / sd_baseline;
}

/// Mean absolute pitch rate over the series as a fraction of the rate limit.
inline double adc(std::span<const double> pitch, double dt, double rate_limit = kDefaultRateLimit) {
  detail::require(dt > 0.0, "adc: dt must be positive");
  detail::require(rate_limit > 0.0, "adc: rate limit must be positive");
  if (pitch.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 1; i < pitch.size(); ++i) total += std::abs(pitch[i] - pitch[i - 1]);
  const double duration = static_cast<double>(pitch.size() - 1) * dt;
  return total / (duration * rate_limit);
}

using Band = std::pair<double, double>;

/// Bands [0.9, 1.1] x 1P and [0.9, 1.1] x 2P.
inline std::vector<Band> harmonic_bands(double f1p) {
  return {{0.9 * f1p, 1.1 * f1p}, {1.8 * f1p, 2.2 * f1p}};
}

/// Energy inside the bands over total energy.
inline double band_energy_ratio(const numerics::PsdEstimate& psd, const std::vector<Band>& bands) {
  detail::require(!bands.empty(), "band_energy_ratio: no bands given");
  const double nyquist = psd.frequencies.size() > 0 ? psd.frequencies(psd.frequencies.size() - 1) : 0.0;
  for (const auto& [lo, hi] : bands) {
    detail::require(lo >= 0.0 && hi > lo && hi <= nyquist + 1e-12,
                    "band_energy_ratio: band must satisfy 0 <= lo < hi <= fs/2");
  }
  const double total = numerics::integrate_psd(psd);
  if (!(total > 0.0)) return 0.0;
  double inside = 0.0;
  for (const auto& [lo, hi] : bands) inside += numerics::integrate_psd(psd, lo, hi);
  return std::clamp(inside / total, 0.0, 1.0);
}

enum class Regime { Healthy, Faulty };

/// Healthy window [t0, t1) and faulty window [t2, t3), seconds.
struct WindowSpec {
  double healthy_start = 800.0;
  double healthy_end = 1000.0;
  double faulty_start = 1800.0;
  double faulty_end = 2000.0;

  /// Last 20 % of each regime.
  static WindowSpec for_run(double duration, double onset) {
    WindowSpec w;
    w.healthy_start = 0.8 * onset;
    w.healthy_end = onset;
    w.faulty_start = onset + 0.8 * (duration - onset);
    w.faulty_end = duration;
    return w;
  }

  void validate(double duration, double onset) const {
    detail::require(0.0 <= healthy_start && healthy_start < healthy_end,
                    "healthy window must be non-empty and start at t >= 0");
    detail::require(healthy_end <= faulty_start && faulty_start < faulty_end,
                    "windows must be ordered and non-overlapping");
    detail::require(faulty_end <= duration + 1e-9, "faulty window exceeds the run duration");
    detail::require(onset <= faulty_start, "fault onset must not be after the faulty window start");
  }

  std::pair<double, double> range(Regime which) const {
    return which == Regime::Healthy ? std::pair{healthy_start, healthy_end}
                                    : std::pair{faulty_start, faulty_end};
  }
};

/// Sample index range [first, last) covering [t0, t1).
inline std::pair<std::size_t, std::size_t> window_indices(std::size_t n, double t0, double t1,
                                                          double dt) {
  detail::require(dt > 0.0, "window: dt must be positive");
  const auto first = std::llround(t0 / dt);
  const auto last = std::llround(t1 / dt);
  if (first < 0 || last <= first || static_cast<std::size_t>(last) > n) {
    throw InvalidArgument("window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                          ") s is outside a series of " + std::to_string(n) + " samples");
  }
  return {static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
}

inline std::span<const double> window_view(std::span<const double> series, const WindowSpec& w,
                                           Regime which, double dt) {
  const auto [t0, t1] = w.range(which);
  const auto [a, b] = window_indices(series.size(), t0, t1, dt);
  return series.subspan(a, b - a);
}

/// Population SD (1/n) about the mean.
inline double standard_deviation(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

inline double windowed_sd(std::span<const double> series, const WindowSpec& w, Regime which,
                          double dt) {
  return standard_deviation(window_view(series, w, which, dt));
}

/// Power of the 1P + 2P components of each rotation (samples jP+1 .. jP+P),
/// i.e. half the sum of squared sine/cosine coefficients.
inline std::vector<double> rotation_band_power(std::span<const double> series, Index period) {
  detail::require(period >= 8, "rotation_band_power: period must be >= 8");
  std::vector<double> out;
  const auto p = static_cast<std::size_t>(period);
  if (series.size() < p + 1) return out;
  const std::size_t rotations = (series.size() - 1) / p;
  out.reserve(rotations);
  std::vector<double> s1(p), c1(p), s2(p), c2(p);
  for (std::size_t m = 1; m <= p; ++m) {
    const double psi = kTwoPi * static_cast<double>(m) / static_cast<double>(p);
    s1[m - 1] = std::sin(psi);
    c1[m - 1] = std::cos(psi);
    s2[m - 1] = std::sin(2.0 * psi);
    c2[m - 1] = std::cos(2.0 * psi);
  }
  const double scale = 2.0 / static_cast<double>(p);
  for (std::size_t j = 0; j < rotations; ++j) {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    for (std::size_t m = 0; m < p; ++m) {
      const double v = series[j * p + 1 + m];
      a += v * s1[m];
      b += v * c1[m];
      c += v * s2[m];
      d += v * c2[m];
    }
    a *= scale;
    b *= scale;
    c *= scale;
    d *= scale;
    out.push_back(0.5 * (a * a + b * b + c * c + d * d));
  }
  return out;
}

/// Trailing moving average; entry i averages x[max(0, i-width+1) .. i].
inline std::vector<double> moving_average(const std::vector<double>& x, std::size_t width) {
  detail::require(width >= 1, "moving_average: width must be >= 1");
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i];
    if (i >= width) sum -= x[i - width];
    out[i] = sum / static_cast<double>(std::min(width, i + 1));
  }
  return out;
}

}  // namespace sprc::metrics
