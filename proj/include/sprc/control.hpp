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

// Repetitive control on top of the identified predictor.
//
// Lifted vectors stack one rotor period sample by sample: entry (m-1)*n + i is
// channel i at position m = 1..P of the rotation. Coefficient vectors theta
// are coefficient-major with the blade inner:
//   [sin1P(1..r), cos1P(1..r), sin2P(1..r), cos2P(1..r)].

#pragma once

#include "sprc/common.hpp"
#include "sprc/numerics.hpp"
#include "sprc/sysid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace sprc::control {

inline constexpr Index kHarmonicTerms = 4;  // sin/cos at 1P and 2P

// ---------------------------------------------------------------------------
// Lifted model
// ---------------------------------------------------------------------------

/// One-period-ahead predictor
///   dY_{j+1} = gamma_ku dU_j + gamma_ky dY_j + h_hat dU_{j+1}.
struct LiftedModel {
  Matrix gamma_ku;  // lP x rP
  Matrix gamma_ky;  // lP x lP
  Matrix h_hat;     // lP x rP
  Index period = 0;
  Index window = 0;
  Index inputs = 0;
  Index outputs = 0;

  Vector predict(const Vector& du_prev, const Vector& dy_prev, const Vector& du_next) const {
    detail::require(du_prev.size() == gamma_ku.cols() && dy_prev.size() == gamma_ky.cols() &&
                        du_next.size() == h_hat.cols(),
                    "LiftedModel::predict: dimension mismatch");
    return gamma_ku * du_prev + gamma_ky * dy_prev + h_hat * du_next;
  }
};

namespace internal {

struct MarkovBlocks {
  std::vector<Matrix> bu;  // bu[s] = C At^(s-1) B, s = 1..p (bu[0] unused)
  std::vector<Matrix> by;  // by[s] = C At^(s-1) L
};

inline MarkovBlocks split_markov(const Matrix& xi, Index p, Index r, Index l) {
  sprc::detail::require(p >= 1, "Markov window must be >= 1");
  sprc::detail::require(xi.rows() == l && xi.cols() == (r + l) * p,
                        "Markov matrix must be l x (r + l) p, got " + std::to_string(xi.rows()) +
                            " x " + std::to_string(xi.cols()));
  sprc::detail::require(xi.allFinite(), "Markov matrix has non-finite entries");
  MarkovBlocks out;
  out.bu.assign(static_cast<std::size_t>(p + 1), Matrix());
  out.by.assign(static_cast<std::size_t>(p + 1), Matrix());
  for (Index s = 1; s <= p; ++s) {
    out.bu[static_cast<std::size_t>(s)] = xi.block(0, (p - s) * r, l, r);
    out.by[static_cast<std::size_t>(s)] = xi.block(0, p * r + (p - s) * l, l, l);
  }
  return out;
}

inline constexpr double kMaxGrowth = 1e12;

/// Solves (I - G) X = rhs for the strictly block-lower-triangular Toeplitz G
/// built from by[1..p], by forward substitution over the P block rows.
inline Matrix solve_unit_lower(const MarkovBlocks& blocks, const Matrix& rhs, Index period,
                               Index p, Index l) {
  Matrix x = rhs;
  for (Index m = 1; m < period; ++m) {
    const Index smax = std::min(p, m);
    auto row = x.middleRows(m * l, l);
    for (Index s = 1; s <= smax; ++s) {
      row.noalias() += blocks.by[static_cast<std::size_t>(s)] * x.middleRows((m - s) * l, l);
    }
  }
  const double in = rhs.size() > 0 ? rhs.cwiseAbs().maxCoeff() : 0.0;
  const double out = x.size() > 0 ? x.cwiseAbs().maxCoeff() : 0.0;
  if (!x.allFinite() || (in > 0.0 && out / in > kMaxGrowth)) {
    throw Error("assemble_lifted: (I - G) solve is ill-conditioned (growth factor " +
                std::to_string(in > 0.0 ? out / in : INFINITY) + ")");
  }
  return x;
}

}  // namespace internal

/// Builds the lifted predictor from a Markov matrix (layout of
/// plant::markov_oracle). Lags beyond p are truncated to zero.
inline LiftedModel assemble_lifted(const Matrix& xi, Index period, Index p, Index r, Index l) {
  sprc::detail::require(period >= p, "assemble_lifted: period must be >= window");
  const auto blocks = internal::split_markov(xi, p, r, l);
  Matrix rhs = Matrix::Zero(l * period, r * period + l * period + r * period);
  auto tu = rhs.leftCols(r * period);
  auto ty = rhs.middleCols(r * period, l * period);
  auto ht = rhs.rightCols(r * period);
  for (Index m = 1; m <= period; ++m) {
    const Index row = (m - 1) * l;
    for (Index s = 1; s <= std::min(p, m - 1); ++s) {
      ht.block(row, (m - 1 - s) * r, l, r) = blocks.bu[static_cast<std::size_t>(s)];
    }
    for (Index s = m; s <= p; ++s) {
      const Index c = m + period - s;  // position in the previous rotation
      tu.block(row, (c - 1) * r, l, r) = blocks.bu[static_cast<std::size_t>(s)];
      ty.block(row, (c - 1) * l, l, l) = blocks.by[static_cast<std::size_t>(s)];
    }
  }
  const Matrix x = internal::solve_unit_lower(blocks, rhs, period, p, l);
  LiftedModel model;
  model.gamma_ku = x.leftCols(r * period);
  model.gamma_ky = x.middleCols(r * period, l * period);
  model.h_hat = x.rightCols(r * period);
  model.period = period;
  model.window = p;
  model.inputs = r;
  model.outputs = l;
  return model;
}

inline LiftedModel assemble_lifted(const sysid::MarkovEstimate& est, Index period) {
  return assemble_lifted(est.assembled(), period, est.window(), est.blades(), est.blades());
}

// ---------------------------------------------------------------------------
// Basis functions
// ---------------------------------------------------------------------------

/// [sin psi, cos psi, sin 2psi, cos 2psi].
inline std::array<double, kHarmonicTerms> harmonic_row(double psi) {
  return {std::sin(psi), std::cos(psi), std::sin(2.0 * psi), std::cos(2.0 * psi)};
}

struct BasisProjection {
  Matrix uf;        // P x 4, row m-1 evaluated at psi = 2 pi m / P
  Matrix phi;       // nP x 4n, uf kron I_n
  Matrix phi_pinv;  // 4n x nP
  Index period = 0;
  Index channels = 0;

  /// Rows of phi for rotation position m (1-based), n x 4n.
  auto rows_at(Index m) const { return phi.middleRows((m - 1) * channels, channels); }
};

inline BasisProjection build_basis(Index period, Index channels) {
  sprc::detail::require(period >= 8, "build_basis: period must be >= 8 to resolve 2P");
  sprc::detail::require(channels >= 1, "build_basis: need at least one channel");
  BasisProjection b;
  b.period = period;
  b.channels = channels;
  b.uf.resize(period, kHarmonicTerms);
  for (Index m = 1; m <= period; ++m) {
    const auto h = harmonic_row(kTwoPi * static_cast<double>(m) / static_cast<double>(period));
    for (Index c = 0; c < kHarmonicTerms; ++c) b.uf(m - 1, c) = h[static_cast<std::size_t>(c)];
  }
  b.phi = Matrix::Zero(period * channels, kHarmonicTerms * channels);
  for (Index m = 0; m < period; ++m) {
    for (Index c = 0; c < kHarmonicTerms; ++c) {
      for (Index i = 0; i < channels; ++i) b.phi(m * channels + i, c * channels + i) = b.uf(m, c);
    }
  }
  b.phi_pinv = numerics::pinv(b.phi);
  return b;
}

/// Ybar = phi^+ Y for one rotation of stacked outputs.
inline Vector project_output(const Vector& y_period, const BasisProjection& basis) {
  sprc::detail::require(y_period.size() == basis.phi_pinv.cols(),
                        "project_output: expected " + std::to_string(basis.phi_pinv.cols()) +
                            " samples, got " + std::to_string(y_period.size()));
  return basis.phi_pinv * y_period;
}

/// Differential pitch at azimuth psi for coefficient vector `coeffs` (4r).
inline void pitch_at(double psi, const Vector& coeffs, Index r, Eigen::Ref<Vector> out) {
  const auto h = harmonic_row(psi);
  for (Index i = 0; i < r; ++i) {
    double v = 0.0;
    for (Index c = 0; c < kHarmonicTerms; ++c) v += h[static_cast<std::size_t>(c)] * coeffs(c * r + i);
    out(i) = v;
  }
}

/// u_k = row_m(phi) (theta + eta) for rotation position m (1-based).
inline Vector pitch_command(const BasisProjection& basis, const Vector& theta, const Vector& eta,
                            Index m) {
  sprc::detail::require(m >= 1 && m <= basis.period, "pitch_command: position outside the rotation");
  sprc::detail::require(theta.size() == basis.phi.cols() && eta.size() == basis.phi.cols(),
                        "pitch_command: coefficient vector has the wrong size");
  return basis.rows_at(m) * (theta + eta);
}

// ---------------------------------------------------------------------------
// Projected state space
// ---------------------------------------------------------------------------

/// State [Ybar; dtheta; dYbar], input dtheta_{j+1}:
///   A = [I Mu My; 0 0 0; 0 Mu My],  B = [Mh; I; Mh].
struct ProjectedModel {
  Matrix a_bar;
  Matrix b_bar;
  Matrix mu;  // phi_y^+ (Gamma K_u) phi_u
  Matrix my;  // phi_y^+ (Gamma K_y) phi_y
  Matrix mh;  // phi_y^+ H phi_u
};

inline ProjectedModel make_projected(Matrix mu, Matrix my, Matrix mh) {
  const Index ny = my.rows();
  const Index nt = mu.cols();
  ProjectedModel out;
  out.a_bar = Matrix::Zero(2 * ny + nt, 2 * ny + nt);
  out.a_bar.topLeftCorner(ny, ny).setIdentity();
  out.a_bar.block(0, ny, ny, nt) = mu;
  out.a_bar.block(0, ny + nt, ny, ny) = my;
  out.a_bar.block(ny + nt, ny, ny, nt) = mu;
  out.a_bar.block(ny + nt, ny + nt, ny, ny) = my;
  out.b_bar = Matrix::Zero(2 * ny + nt, nt);
  out.b_bar.topRows(ny) = mh;
  out.b_bar.middleRows(ny, nt).setIdentity();
  out.b_bar.bottomRows(ny) = mh;
  out.mu = std::move(mu);
  out.my = std::move(my);
  out.mh = std::move(mh);
  return out;
}

inline ProjectedModel project_state_space(const LiftedModel& lifted, const BasisProjection& basis_u,
                                          const BasisProjection& basis_y) {
  sprc::detail::require(basis_u.phi.rows() == lifted.gamma_ku.cols() &&
                            basis_y.phi.rows() == lifted.gamma_ky.rows(),
                        "project_state_space: basis does not match the lifted model");
  return make_projected(basis_y.phi_pinv * lifted.gamma_ku * basis_u.phi,
                        basis_y.phi_pinv * lifted.gamma_ky * basis_y.phi,
                        basis_y.phi_pinv * lifted.h_hat * basis_u.phi);
}

inline ProjectedModel project_state_space(const LiftedModel& lifted, const BasisProjection& basis) {
  return project_state_space(lifted, basis, basis);
}

/// Same result as project_state_space(assemble_lifted(...)) without forming
/// the lP x rP blocks: the Toeplitz products with phi are built directly and
/// only the 4r + 4l + 4r projected columns go through the forward substitution.
inline ProjectedModel project_markov(const Matrix& xi, Index p, const BasisProjection& basis_u,
                                     const BasisProjection& basis_y) {
  const Index period = basis_u.period;
  const Index r = basis_u.channels;
  const Index l = basis_y.channels;
  sprc::detail::require(basis_y.period == period && period >= p,
                        "project_markov: inconsistent period");
  const auto blocks = internal::split_markov(xi, p, r, l);
  const Index nt = kHarmonicTerms * r;
  const Index ny = kHarmonicTerms * l;
  Matrix rhs = Matrix::Zero(l * period, nt + ny + nt);
  for (Index m = 1; m <= period; ++m) {
    auto row = rhs.middleRows((m - 1) * l, l);
    for (Index s = 1; s <= std::min(p, m - 1); ++s) {
      row.rightCols(nt).noalias() += blocks.bu[static_cast<std::size_t>(s)] * basis_u.rows_at(m - s);
    }
    for (Index s = m; s <= p; ++s) {
      const Index c = m + period - s;
      row.leftCols(nt).noalias() += blocks.bu[static_cast<std::size_t>(s)] * basis_u.rows_at(c);
      row.middleCols(nt, ny).noalias() += blocks.by[static_cast<std::size_t>(s)] * basis_y.rows_at(c);
    }
  }
  const Matrix x = internal::solve_unit_lower(blocks, rhs, period, p, l);
  const Matrix proj = basis_y.phi_pinv * x;
  return make_projected(proj.leftCols(nt), proj.middleCols(nt, ny), proj.rightCols(nt));
}

inline ProjectedModel project_markov(const sysid::MarkovEstimate& est, const BasisProjection& basis) {
  return project_markov(est.assembled(), est.window(), basis, basis);
}

// ---------------------------------------------------------------------------
// Gain synthesis
// ---------------------------------------------------------------------------

struct ControlWeights {
  double q_y = 1.0;
  double q_dtheta = 0.0;
  double q_dy = 1.0;
  double r = 5e-7;

  Matrix state_weight(Index l, Index r_inputs) const {
    const Index ny = kHarmonicTerms * l;
    const Index nt = kHarmonicTerms * r_inputs;
    Vector d(2 * ny + nt);
    d.head(ny).setConstant(q_y);
    d.segment(ny, nt).setConstant(q_dtheta);
    d.tail(ny).setConstant(q_dy);
    return d.asDiagonal();
  }
  Matrix input_weight(Index r_inputs) const {
    return r * Matrix::Identity(kHarmonicTerms * r_inputs, kHarmonicTerms * r_inputs);
  }
};

struct GainUpdate {
  Matrix gain;
  bool solved = false;
  double residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double closed_loop_radius = std::numeric_limits<double>::quiet_NaN();
  Matrix cost_matrix;  // empty on failure
  std::string failure;
};

/// K_f from the DARE; on failure the previous gain is returned unchanged and
/// `solved` is false.
inline GainUpdate synthesize_gain(const Matrix& a_bar, const Matrix& b_bar, const Matrix& q,
                                  const Matrix& r, const Matrix& previous,
                                  const Matrix* warm_start = nullptr, double tol = 1e-9,
                                  int max_iter = 500) {
  GainUpdate out;
  try {
    auto sol = numerics::solve_dare(a_bar, b_bar, q, r, tol, max_iter, warm_start);
    out.gain = std::move(sol.gain);
    out.solved = true;
    out.residual = sol.residual;
    out.iterations = sol.iterations;
    out.closed_loop_radius = sol.closed_loop_radius;
    out.cost_matrix = std::move(sol.cost_matrix);
  } catch (const numerics::DareError& e) {
    out.gain = previous;
    out.residual = e.residual();
    out.iterations = e.iterations();
    out.failure = e.what();
  }
  return out;
}

inline Matrix synthesize_gain(const Matrix& a_bar, const Matrix& b_bar, const Matrix& q,
                              const Matrix& r) {
  return synthesize_gain(a_bar, b_bar, q, r, Matrix::Zero(b_bar.cols(), a_bar.rows())).gain;
}

// ---------------------------------------------------------------------------
// Coefficient update
// ---------------------------------------------------------------------------

struct ControllerState {
  Vector theta;        // 4r
  Vector delta_theta;  // 4r
  Matrix gain;         // 4r x (8l + 4r)
  double alpha = 1.0;
  double beta = 0.3;
  double theta_cap = 4.0;  // deg per coefficient
  std::int64_t j = 0;
  std::int64_t clamp_events = 0;
  std::int64_t dare_failures = 0;

  ControllerState() = default;
  ControllerState(Index r, Index l, double alpha_, double beta_, double cap)
      : theta(Vector::Zero(kHarmonicTerms * r)), delta_theta(Vector::Zero(kHarmonicTerms * r)),
        gain(Matrix::Zero(kHarmonicTerms * r, kHarmonicTerms * (2 * l + r))), alpha(alpha_),
        beta(beta_), theta_cap(cap) {
    sprc::detail::require(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0, 1]");
    sprc::detail::require(beta >= 0.0 && beta <= 1.0, "beta must be in [0, 1]");
    sprc::detail::require(cap > 0.0, "theta cap must be positive");
  }
};

/// theta <- alpha theta - beta K [Ybar; dtheta; dYbar], clamped elementwise to
/// the cap. Returns the number of clamped coefficients.
inline int update_theta(ControllerState& cs, const Vector& y_bar, const Vector& delta_theta,
                        const Vector& delta_y_bar) {
  const Index n = y_bar.size() + delta_theta.size() + delta_y_bar.size();
  sprc::detail::require(cs.gain.cols() == n && cs.gain.rows() == cs.theta.size(),
                        "update_theta: gain does not match the state");
  Vector state(n);
  state << y_bar, delta_theta, delta_y_bar;
  const Vector prev = cs.theta;
  cs.theta = cs.alpha * cs.theta - cs.beta * (cs.gain * state);
  int clamped = 0;
  for (Index i = 0; i < cs.theta.size(); ++i) {
    if (!std::isfinite(cs.theta(i))) cs.theta(i) = prev(i);
    if (std::abs(cs.theta(i)) > cs.theta_cap) {
      cs.theta(i) = std::copysign(cs.theta_cap, cs.theta(i));
      ++clamped;
    }
  }
  cs.delta_theta = cs.theta - prev;
  cs.clamp_events += clamped;
  ++cs.j;
  return clamped;
}

// ---------------------------------------------------------------------------
// Excitation
// ---------------------------------------------------------------------------

namespace internal {

inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x5eedu};
  return std::mt19937_64(seq);
}

}  // namespace internal

/// Coefficient-space excitation: one PRBS stream per coefficient, smoothed by
/// eta_j = a eta_{j-1} + (1 - a) b_j with b_j = +-cap, so |eta| <= cap.
class ExcitationGenerator {
 public:
  ExcitationGenerator(Index coefficients, double cap, std::uint64_t seed, double smoothing = 0.7)
      : cap_(cap), smoothing_(smoothing), eta_(Vector::Zero(coefficients)) {
    sprc::detail::require(coefficients >= 1, "ExcitationGenerator: need at least one coefficient");
    sprc::detail::require(cap >= 0.0 && std::isfinite(cap), "ExcitationGenerator: cap must be >= 0");
    sprc::detail::require(smoothing >= 0.0 && smoothing < 1.0,
                          "ExcitationGenerator: smoothing must be in [0, 1)");
    streams_.reserve(static_cast<std::size_t>(coefficients));
    for (Index i = 0; i < coefficients; ++i) {
      streams_.push_back(internal::stream_rng(seed, static_cast<std::uint64_t>(i)));
    }
  }

  double cap() const { return cap_; }
  Index size() const { return eta_.size(); }

  const Vector& next() {
    for (Index i = 0; i < eta_.size(); ++i) {
      const bool bit = (streams_[static_cast<std::size_t>(i)]() >> 63) != 0;
      const double b = bit ? cap_ : -cap_;
      eta_(i) = std::clamp(smoothing_ * eta_(i) + (1.0 - smoothing_) * b, -cap_, cap_);
    }
    return eta_;
  }

 private:
  double cap_;
  double smoothing_;
  Vector eta_;
  std::vector<std::mt19937_64> streams_;
};

inline Vector generate_excitation(ExcitationGenerator& gen) { return gen.next(); }

/// Second-order Butterworth low-pass (bilinear transform, prewarped).
class Biquad {
 public:
  Biquad() = default;
  Biquad(double cutoff_hz, double fs) {
    sprc::detail::require(cutoff_hz > 0.0 && cutoff_hz < 0.5 * fs,
                          "Biquad: cutoff must lie in (0, fs/2)");
    const double k = std::tan(std::numbers::pi * cutoff_hz / fs);
    const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k * k);
    b0_ = k * k * norm;
    b1_ = 2.0 * b0_;
    b2_ = b0_;
    a1_ = 2.0 * (k * k - 1.0) * norm;
    a2_ = (1.0 - std::numbers::sqrt2 * k + k * k) * norm;
  }

  double step(double x) {
    const double y = b0_ * x + z1_;
    z1_ = b1_ * x - a1_ * y + z2_;
    z2_ = b2_ * x - a2_ * y;
    return y;
  }

 private:
  double b0_ = 1.0, b1_ = 0.0, b2_ = 0.0, a1_ = 0.0, a2_ = 0.0;
  double z1_ = 0.0, z2_ = 0.0;
};

/// Per-sample broadband excitation added directly to the pitch: a PRBS of
/// +-amplitude held for `hold_s`, low-pass filtered, clamped to +-amplitude.
class UnrestrictedExcitation {
 public:
  UnrestrictedExcitation(Index channels, double amplitude_deg, double cutoff_hz, double hold_s,
                         double dt, std::uint64_t seed)
      : amplitude_(amplitude_deg), value_(Vector::Zero(channels)) {
    sprc::detail::require(amplitude_deg >= 0.0 && std::isfinite(amplitude_deg),
                          "unrestricted excitation amplitude must be >= 0");
    sprc::detail::require(hold_s > 0.0 && dt > 0.0, "hold time and dt must be positive");
    hold_ = std::max<std::int64_t>(1, std::llround(hold_s / dt));
    for (Index i = 0; i < channels; ++i) {
      filters_.emplace_back(cutoff_hz, 1.0 / dt);
      streams_.push_back(internal::stream_rng(seed, 0x1000u + static_cast<std::uint64_t>(i)));
      level_.push_back(0.0);
    }
  }

  const Vector& next() {
    for (Index i = 0; i < value_.size(); ++i) {
      const auto s = static_cast<std::size_t>(i);
      if (count_ % hold_ == 0) level_[s] = (streams_[s]() >> 63) != 0 ? amplitude_ : -amplitude_;
      value_(i) = std::clamp(filters_[s].step(level_[s]), -amplitude_, amplitude_);
    }
    ++count_;
    return value_;
  }

 private:
  double amplitude_;
  std::int64_t hold_ = 1;
  std::int64_t count_ = 0;
  Vector value_;
  std::vector<Biquad> filters_;
  std::vector<std::mt19937_64> streams_;
  std::vector<double> level_;
};

// ---------------------------------------------------------------------------
// Closed-loop controller
// ---------------------------------------------------------------------------

struct SprcConfig {
  Index period = 100;
  Index window = 21;
  Index blades = 3;
  double dt = 0.01;
  double lambda = sysid::kDefaultLambda;
  double alpha = 1.0;
  double beta = 0.3;
  ControlWeights weights;
  double theta_cap = 4.0;
  double excitation_cap = 0.1;
  double excitation_smoothing = 0.7;
  Index warmup_rotations = 20;
  bool restricted = true;  // false: per-sample broadband excitation instead of eta
  double unrestricted_amplitude = 0.25;
  double unrestricted_cutoff_hz = 6.0;
  double unrestricted_hold_s = 0.25;
  double dare_tol = 1e-9;
  int dare_max_iter = 500;
  std::uint64_t seed = 0;

  void validate() const {
    sprc::detail::require(period >= 8 && window >= 1 && window <= period,
                          "controller needs 8 <= P and 1 <= p <= P");
    sprc::detail::require(blades >= 1, "controller needs at least one blade");
    sprc::detail::require(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0, 1]");
    sprc::detail::require(beta >= 0.0 && beta <= 1.0, "beta must be in [0, 1]");
    sprc::detail::require(weights.q_y >= 0.0 && weights.q_dtheta >= 0.0 && weights.q_dy >= 0.0,
                          "state weights must be >= 0");
    sprc::detail::require(weights.r > 0.0, "input weight must be > 0");
    sprc::detail::require(theta_cap > 0.0, "theta cap must be > 0");
    sprc::detail::require(excitation_cap >= 0.0, "excitation cap must be >= 0");
    sprc::detail::require(warmup_rotations >= 1, "warm-up must be at least one rotation");
  }
};

struct RotationRecord {
  std::int64_t j = 0;
  double theta_norm = 0.0;
  double delta_theta_norm = 0.0;
  double dare_residual = std::numeric_limits<double>::quiet_NaN();
  int dare_iterations = 0;
  bool gain_updated = false;
  int clamp_events = 0;
};

/// Sample-level driver. Rotation j covers samples jP+1 .. jP+P; sample 0 is a
/// pre-roll with zero differential pitch. Per sample: command(k, psi), apply,
/// then observe(k, u, y) with the commanded absolute pitch.
class SprcController {
 public:
  explicit SprcController(const SprcConfig& cfg)
      : cfg_((cfg.validate(), cfg)),
        basis_(build_basis(cfg.period, cfg.blades)),
        identifier_(cfg.blades, cfg.window, cfg.period, cfg.lambda),
        state_(cfg.blades, cfg.blades, cfg.alpha, cfg.beta, cfg.theta_cap),
        excitation_(kHarmonicTerms * cfg.blades, cfg.restricted ? cfg.excitation_cap : 0.0,
                    cfg.seed, cfg.excitation_smoothing),
        broadband_(cfg.blades, cfg.restricted ? 0.0 : cfg.unrestricted_amplitude,
                   cfg.unrestricted_cutoff_hz, cfg.unrestricted_hold_s, cfg.dt, cfg.seed),
        q_(cfg.weights.state_weight(cfg.blades, cfg.blades)),
        r_(cfg.weights.input_weight(cfg.blades)),
        y_period_(Vector::Zero(cfg.period * cfg.blades)),
        y_bar_prev_(Vector::Zero(kHarmonicTerms * cfg.blades)),
        applied_prev_(Vector::Zero(kHarmonicTerms * cfg.blades)),
        command_(cfg.blades) {
    applied_ = state_.theta + excitation_.next();
  }

  const SprcConfig& config() const { return cfg_; }
  const BasisProjection& basis() const { return basis_; }
  const sysid::OnlineIdentifier& identifier() const { return identifier_; }
  const ControllerState& state() const { return state_; }
  const Vector& applied_coefficients() const { return applied_; }
  const std::vector<RotationRecord>& log() const { return log_; }
  const std::optional<ProjectedModel>& last_model() const { return model_; }

  /// Differential pitch (deg) for sample k at azimuth psi.
  const Vector& command(std::int64_t k, double psi) {
    if (k == 0) {
      command_.setZero();
    } else {
      pitch_at(psi, applied_, cfg_.blades, command_);
    }
    if (!cfg_.restricted) command_ += broadband_.next();
    return command_;
  }

  void observe(std::int64_t k, const Vector& u_cmd, const Vector& y) {
    identifier_.observe(k, u_cmd, y);
    if (k == 0) return;
    const Index m = (k - 1) % cfg_.period;
    y_period_.segment(m * cfg_.blades, cfg_.blades) = y;
    if (m == cfg_.period - 1) end_rotation();
  }

 private:
  void end_rotation() {
    const Vector y_bar = project_output(y_period_, basis_);
    const Vector delta_y_bar = have_prev_ ? Vector(y_bar - y_bar_prev_) : Vector(Vector::Zero(y_bar.size()));
    const Vector delta_applied = applied_ - applied_prev_;
    const std::int64_t completed = state_.j + 1;

    RotationRecord rec;
    rec.j = state_.j;
    if (completed >= cfg_.warmup_rotations && identifier_.updates() > 0) {
      model_ = project_markov(identifier_.estimate(), basis_);
      const Matrix* warm = cost_.size() > 0 ? &cost_ : nullptr;
      auto upd = synthesize_gain(model_->a_bar, model_->b_bar, q_, r_, state_.gain, warm,
                                 cfg_.dare_tol, cfg_.dare_max_iter);
      rec.dare_residual = upd.residual;
      rec.dare_iterations = upd.iterations;
      rec.gain_updated = upd.solved;
      if (upd.solved) {
        state_.gain = std::move(upd.gain);
        cost_ = std::move(upd.cost_matrix);
      } else {
        ++state_.dare_failures;
      }
      rec.clamp_events = update_theta(state_, y_bar, delta_applied, delta_y_bar);
    } else {
      state_.delta_theta.setZero();
      ++state_.j;
    }
    rec.theta_norm = state_.theta.norm();
    rec.delta_theta_norm = state_.delta_theta.norm();
    log_.push_back(rec);

    y_bar_prev_ = y_bar;
    have_prev_ = true;
    applied_prev_ = applied_;
    applied_ = state_.theta + excitation_.next();
  }

  SprcConfig cfg_;
  BasisProjection basis_;
  sysid::OnlineIdentifier identifier_;
  ControllerState state_;
  ExcitationGenerator excitation_;
  UnrestrictedExcitation broadband_;
  Matrix q_;
  Matrix r_;
  Matrix cost_;
  Vector y_period_;
  Vector y_bar_prev_;
  Vector applied_;
  Vector applied_prev_;
  Vector command_;
  bool have_prev_ = false;
  std::optional<ProjectedModel> model_;
  std::vector<RotationRecord> log_;
};

}  // namespace sprc::control
