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

// Online predictor-based subspace identification on rotor-period differences.
//
// Alignment: after y_k is measured the target is dy_k and the regressor is the
// window ending at k-1,
//   [du_{k-p} ... du_{k-1} | dy_{k-p} ... dy_{k-1}]   (oldest first),
// so that the estimated row multiplies lags p ... 1 exactly as the Markov
// matrix [c At^(p-1) b ... c b | c At^(p-1) l ... c l] does.

#pragma once

#include "sprc/common.hpp"
#include "sprc/numerics.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sprc::sysid {

inline constexpr double kDefaultLambda = 0.99999;

/// Ring buffer keeping the most recent P + p + 1 samples of every channel.
class PeriodicBuffer {
 public:
  PeriodicBuffer(Index channels, Index period, Index window)
      : channels_(channels), period_(period), window_(window),
        capacity_(period + window + 1),
        data_(static_cast<std::size_t>(channels * (period + window + 1)), 0.0) {
    detail::require(channels > 0, "PeriodicBuffer: need at least one channel");
    detail::require(period >= 1 && window >= 1, "PeriodicBuffer: period and window must be >= 1");
  }

  Index channels() const { return channels_; }
  Index period() const { return period_; }
  Index window() const { return window_; }
  /// Index of the newest stored sample, -1 when empty.
  std::int64_t newest() const { return newest_; }

  void push(std::int64_t k, const Eigen::Ref<const Vector>& values) {
    detail::require(values.size() == channels_, "PeriodicBuffer::push: wrong channel count");
    detail::require(k == newest_ + 1, "PeriodicBuffer::push: samples must be consecutive");
    const auto slot = static_cast<std::size_t>(k % capacity_);
    for (Index c = 0; c < channels_; ++c) {
      data_[slot * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)] = values(c);
    }
    newest_ = k;
  }

  bool holds(std::int64_t k) const { return k >= 0 && k <= newest_ && k > newest_ - capacity_; }

  double value(Index channel, std::int64_t k) const {
    detail::require(channel >= 0 && channel < channels_, "PeriodicBuffer: channel out of range");
    detail::require(holds(k), "PeriodicBuffer: sample " + std::to_string(k) + " not stored");
    const auto slot = static_cast<std::size_t>(k % capacity_);
    return data_[slot * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(channel)];
  }

 private:
  Index channels_;
  Index period_;
  Index window_;
  Index capacity_;
  std::vector<double> data_;
  std::int64_t newest_ = -1;
};

/// s_k - s_{k-P}.
inline double periodic_difference(const PeriodicBuffer& buffer, Index channel, std::int64_t k) {
  const Index period = buffer.period();
  if (k < period) {
    throw InvalidArgument("periodic_difference: sample " + std::to_string(k) +
                          " needs a warm-up of at least " + std::to_string(period) + " samples");
  }
  if (!buffer.holds(k) || !buffer.holds(k - period)) {
    throw InvalidArgument("periodic_difference: samples " + std::to_string(k - period) + " and " +
                          std::to_string(k) + " are not both stored");
  }
  return buffer.value(channel, k) - buffer.value(channel, k - period);
}

/// Per-blade SISO regressor [du_{k-p+1} ... du_k | dy_{k-p+1} ... dy_k].
/// Input channel of blade i is i, output channel is n_inputs + i.
inline void build_regressor(const PeriodicBuffer& buffer, Index blade, Index n_inputs,
                            std::int64_t k, Eigen::Ref<Vector> out) {
  const Index p = buffer.window();
  detail::require(out.size() == 2 * p, "build_regressor: output must have length 2p");
  const std::int64_t first = k - p + 1;
  if (first - buffer.period() < 0) {
    throw InvalidArgument("build_regressor: sample " + std::to_string(k) + " needs history back to " +
                          std::to_string(first - buffer.period()) + "; warm-up is " +
                          std::to_string(buffer.period() + p - 1) + " samples");
  }
  const Index in = blade;
  const Index outc = n_inputs + blade;
  for (Index s = 0; s < p; ++s) {
    out(s) = periodic_difference(buffer, in, first + s);
    out(p + s) = periodic_difference(buffer, outc, first + s);
  }
}

inline Vector build_regressor(const PeriodicBuffer& buffer, Index blade, Index n_inputs,
                              std::int64_t k) {
  Vector out(2 * buffer.window());
  build_regressor(buffer, blade, n_inputs, k, out);
  return out;
}

/// One RLS problem per blade; the assembled estimate stacks the blade rows.
class MarkovEstimate {
 public:
  MarkovEstimate(Index blades, Index window, Index period, double lambda = kDefaultLambda,
                 double prior = numerics::RlsState::kDefaultPrior)
      : window_(window), period_(period) {
    detail::require(blades > 0, "MarkovEstimate: need at least one blade");
    rls_.reserve(static_cast<std::size_t>(blades));
    for (Index i = 0; i < blades; ++i) rls_.emplace_back(1, 2 * window, lambda, prior);
  }

  Index blades() const { return static_cast<Index>(rls_.size()); }
  Index window() const { return window_; }
  Index period() const { return period_; }
  double lambda() const { return rls_.front().lambda(); }
  const numerics::RlsState& rls(Index blade) const { return rls_.at(static_cast<std::size_t>(blade)); }

  void update(Index blade, const Eigen::Ref<const Vector>& regressor, double target) {
    Vector t(1);
    t(0) = target;
    rls_.at(static_cast<std::size_t>(blade)).update(regressor, t);
  }

  /// Blade row [c At^(p-1) b ... c b | c At^(p-1) l ... c l] (length 2p).
  Vector row(Index blade) const {
    return rls_.at(static_cast<std::size_t>(blade)).estimate().row(0).transpose();
  }

  /// Stacked blade rows (blades x 2p).
  Matrix rows() const {
    Matrix out(blades(), 2 * window_);
    for (Index i = 0; i < blades(); ++i) out.row(i) = row(i).transpose();
    return out;
  }

  /// MIMO Markov matrix l x (r + l) p with the SISO rows on the blade
  /// diagonals and zero cross-blade entries (r = l = blades).
  Matrix assembled() const { return assemble_mimo(rows(), window_); }

  static Matrix assemble_mimo(const Matrix& rows, Index p) {
    const Index n = rows.rows();
    Matrix xi = Matrix::Zero(n, 2 * n * p);
    for (Index i = 0; i < n; ++i) {
      for (Index s = 0; s < p; ++s) {
        xi(i, s * n + i) = rows(i, s);
        xi(i, p * n + s * n + i) = rows(i, p + s);
      }
    }
    return xi;
  }

 private:
  Index window_;
  Index period_;
  std::vector<numerics::RlsState> rls_;
};

/// One identification step: blade i's RLS absorbs (regressors[i], dy(i)).
inline void identify_step(MarkovEstimate& est, const std::vector<Vector>& regressors,
                          const Vector& dy) {
  detail::require(static_cast<Index>(regressors.size()) == est.blades() && dy.size() == est.blades(),
                  "identify_step: need one regressor and one target per blade");
  for (Index i = 0; i < est.blades(); ++i) {
    est.update(i, regressors[static_cast<std::size_t>(i)], dy(i));
  }
}

/// Buffer plus estimator driven sample by sample with commanded pitch and
/// measured loads.
class OnlineIdentifier {
 public:
  OnlineIdentifier(Index blades, Index window, Index period, double lambda = kDefaultLambda,
                   double prior = numerics::RlsState::kDefaultPrior)
      : blades_(blades), buffer_(2 * blades, period, window),
        estimate_(blades, window, period, lambda, prior), regressor_(2 * window),
        sample_(2 * blades) {}

  const MarkovEstimate& estimate() const { return estimate_; }
  const PeriodicBuffer& buffer() const { return buffer_; }
  std::int64_t updates() const { return updates_; }

  /// First sample at which an update happens.
  std::int64_t warmup() const { return buffer_.period() + buffer_.window(); }

  void observe(std::int64_t k, const Vector& u_cmd, const Vector& y) {
    sample_.head(blades_) = u_cmd;
    sample_.tail(blades_) = y;
    buffer_.push(k, sample_);
    if (k < warmup()) return;
    for (Index i = 0; i < blades_; ++i) {
      build_regressor(buffer_, i, blades_, k - 1, regressor_);
      const double target = periodic_difference(buffer_, blades_ + i, k);
      estimate_.update(i, regressor_, target);
    }
    ++updates_;
  }

 private:
  Index blades_;
  PeriodicBuffer buffer_;
  MarkovEstimate estimate_;
  Vector regressor_;
  Vector sample_;
  std::int64_t updates_ = 0;
};

}  // namespace sprc::sysid
