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

// Shared numerical kernels: square-root recursive least squares, the
// Moore-Penrose pseudo-inverse, a Riccati-iteration DARE solver and a Welch
// power spectral density estimator.

#pragma once

#include "sprc/common.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

namespace sprc::numerics {

// ---------------------------------------------------------------------------
// Square-root recursive least squares
// ---------------------------------------------------------------------------

/// Exponentially weighted least-squares estimator in square-root (information)
/// form. The state is the upper-triangular factor R of the information matrix
/// together with the right-hand side z, so that R * estimate^T = z. Each update
/// appends one weighted row and re-triangularizes with Givens rotations; the
/// covariance is never formed.
class RlsState {
 public:
  static constexpr double kDefaultPrior = 1e-3;
  static constexpr double kMinLambda = 0.9;

  RlsState(Index n_out, Index n_reg, double lambda,
           double prior = kDefaultPrior)
      : n_out_(n_out), n_reg_(n_reg), lambda_(lambda),
        sqrt_lambda_(std::sqrt(lambda)) {
    detail::require(n_out > 0 && n_reg > 0, "RlsState: dimensions must be positive");
    detail::require(std::isfinite(lambda) && lambda > kMinLambda && lambda <= 1.0,
                    "RlsState: forgetting factor must satisfy 0.9 < lambda <= 1, got " +
                        std::to_string(lambda));
    detail::require(std::isfinite(prior) && prior > 0.0, "RlsState: prior must be positive");
    aug_ = RowMatrix::Zero(n_reg, n_reg + n_out);
    aug_.leftCols(n_reg).diagonal().setConstant(std::sqrt(prior));
    row_.resize(n_reg + n_out);
  }

  Index n_out() const { return n_out_; }
  Index n_reg() const { return n_reg_; }
  double lambda() const { return lambda_; }
  std::int64_t updates() const { return updates_; }

  /// Upper-triangular square root of the (weighted) information matrix.
  Matrix sqrt_inv_cov() const { return aug_.leftCols(n_reg_); }

  void update(const Eigen::Ref<const Vector>& regressor,
              const Eigen::Ref<const Vector>& target) {
    detail::require(regressor.size() == n_reg_,
                    "rls_update: regressor length " + std::to_string(regressor.size()) +
                        " != " + std::to_string(n_reg_));
    detail::require(target.size() == n_out_,
                    "rls_update: target length " + std::to_string(target.size()) +
                        " != " + std::to_string(n_out_));
    detail::require(regressor.allFinite() && target.allFinite(),
                    "rls_update: non-finite regressor or target");

    if (lambda_ != 1.0) aug_ *= sqrt_lambda_;
    row_.head(n_reg_) = regressor.transpose();
    row_.tail(n_out_) = target.transpose();

    const Index width = n_reg_ + n_out_;
    for (Index i = 0; i < n_reg_; ++i) {
      const double b = row_(i);
      if (b == 0.0) continue;
      const double a = aug_(i, i);
      const double r = std::hypot(a, b);
      const double c = a / r;
      const double s = b / r;
      double* top = aug_.row(i).data();
      double* bottom = row_.data();
      for (Index j = i; j < width; ++j) {
        const double t1 = top[j];
        const double t2 = bottom[j];
        top[j] = c * t1 + s * t2;
        bottom[j] = -s * t1 + c * t2;
      }
    }
    ++updates_;
  }

  /// Current estimate (n_out x n_reg): the minimizer of the weighted
  /// least-squares cost including the decayed prior.
  Matrix estimate() const {
    const auto r = aug_.leftCols(n_reg_);
    Matrix rhs = aug_.rightCols(n_out_);
    r.triangularView<Eigen::Upper>().solveInPlace(rhs);
    return rhs.transpose();
  }

 private:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Index n_out_;
  Index n_reg_;
  double lambda_;
  double sqrt_lambda_;
  std::int64_t updates_ = 0;
  RowMatrix aug_;  // [R | z]
  Eigen::Matrix<double, 1, Eigen::Dynamic> row_;
};

/// One RLS step; returns the post-update estimate.
inline Matrix rls_update(RlsState& state, const Eigen::Ref<const Vector>& regressor,
                         const Eigen::Ref<const Vector>& target) {
  state.update(regressor, target);
  return state.estimate();
}

// ---------------------------------------------------------------------------
// Pseudo-inverse
// ---------------------------------------------------------------------------

inline double default_pinv_tol(const Matrix& m) {
  return 1e-12 * static_cast<double>(std::max(m.rows(), m.cols()));
}

/// Moore-Penrose pseudo-inverse. Singular values below tol * sigma_max are
/// treated as zero; a negative tol selects 1e-12 * max(rows, cols).
inline Matrix pinv(const Matrix& m, double tol = -1.0) {
  detail::require(m.allFinite(), "pinv: non-finite matrix");
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  if (tol < 0.0) tol = default_pinv_tol(m);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  if (sigma_max == 0.0) return Matrix::Zero(m.cols(), m.rows());
  const double cutoff = tol * sigma_max;
  Vector inv = Vector::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// ---------------------------------------------------------------------------
// Discrete algebraic Riccati equation
// ---------------------------------------------------------------------------

struct DareSolution {
  Matrix cost_matrix;  // P
  Matrix gain;         // K = (R + B'PB)^-1 B'PA
  double residual = 0.0;
  int iterations = 0;
  double closed_loop_radius = 0.0;  // rho(A - BK)

  bool stabilizing() const { return closed_loop_radius < 1.0; }
};

/// Raised when the Riccati iteration does not reach the tolerance.
class DareError : public Error {
 public:
  DareError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

inline double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace internal {

struct RiccatiStep {
  Matrix next;
  Matrix gain;
};

inline RiccatiStep riccati_step(const Matrix& a, const Matrix& b, const Matrix& q,
                                const Matrix& r, const Matrix& p) {
  const Matrix pb = p * b;
  const Matrix s = r + b.transpose() * pb;
  const Matrix bpa = pb.transpose() * a;
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) {
    throw DareError("solve_dare: R + B'PB is not positive definite", INFINITY, 0);
  }
  Matrix gain = llt.solve(bpa);
  Matrix next = a.transpose() * p * a - bpa.transpose() * gain + q;
  next = 0.5 * (next + next.transpose()).eval();
  return {std::move(next), std::move(gain)};
}

inline double relative_gap(const Matrix& p, const Matrix& next) {
  const double scale = next.norm();
  const double gap = (next - p).norm();
  if (scale == 0.0) return gap;
  return gap / scale;
}

}  // namespace internal

/// Solves P = A'PA - A'PB (R + B'PB)^-1 B'PA + Q by iterating the Riccati
/// difference recursion from P0 = Q, or from `initial` when given (a previous
/// solution of a nearby problem).
inline DareSolution solve_dare(const Matrix& a, const Matrix& b, const Matrix& q,
                               const Matrix& r, double tol = 1e-9, int max_iter = 500,
                               const Matrix* initial = nullptr) {
  const Index n = a.rows();
  detail::require(a.cols() == n && b.rows() == n && q.rows() == n && q.cols() == n &&
                      r.rows() == b.cols() && r.cols() == b.cols(),
                  "solve_dare: inconsistent dimensions");
  detail::require(a.allFinite() && b.allFinite() && q.allFinite() && r.allFinite(),
                  "solve_dare: non-finite input");
  detail::require((q - q.transpose()).norm() <= 1e-10 * std::max(1.0, q.norm()),
                  "solve_dare: Q must be symmetric");
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> qe(q, Eigen::EigenvaluesOnly);
    detail::require(qe.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, q.norm()),
                    "solve_dare: Q must be positive semidefinite");
  }
  Eigen::LLT<Matrix> rl(r);
  detail::require(rl.info() == Eigen::Success, "solve_dare: R must be positive definite");

  Matrix p = q;
  if (initial != nullptr && initial->rows() == n && initial->cols() == n && initial->allFinite()) {
    p = *initial;
  }
  // The residual is the relative change of one more step from the returned P,
  // so the stopping test and the reported residual are the same number.
  double residual = INFINITY;
  int it = 0;
  internal::RiccatiStep step;
  for (;;) {
    step = internal::riccati_step(a, b, q, r, p);
    residual = internal::relative_gap(p, step.next);
    if (!step.next.allFinite()) {
      throw DareError("solve_dare: iteration diverged", INFINITY, it);
    }
    if (residual < tol) break;
    if (it == max_iter) {
      char msg[128];
      std::snprintf(msg, sizeof msg, "solve_dare: no convergence after %d iterations (residual %.3g)",
                    it, residual);
      throw DareError(msg, residual, it);
    }
    p = std::move(step.next);
    ++it;
  }

  DareSolution sol;
  sol.cost_matrix = std::move(p);
  sol.gain = std::move(step.gain);
  sol.residual = residual;
  sol.iterations = it;
  sol.closed_loop_radius = spectral_radius(a - b * sol.gain);
  return sol;
}

// ---------------------------------------------------------------------------
// Welch PSD
// ---------------------------------------------------------------------------

enum class WindowKind { Hann, Rectangular };

struct PsdEstimate {
  Vector frequencies;  // Hz
  Vector power;        // units^2 / Hz, one-sided
  Index segment_length = 0;
  double overlap_fraction = 0.0;
  WindowKind window_kind = WindowKind::Hann;
};

inline Vector make_window(Index n, WindowKind kind) {
  Vector w(n);
  if (kind == WindowKind::Rectangular) {
    w.setOnes();
    return w;
  }
  // Periodic Hann.
  for (Index i = 0; i < n; ++i) {
    w(i) = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

/// Averaged modified periodogram, one-sided, constant detrend per segment.
inline PsdEstimate welch_psd(std::span<const double> signal, double fs,
                             Index segment_length = 2048, double overlap_fraction = 0.5,
                             WindowKind window_kind = WindowKind::Hann) {
  detail::require(fs > 0.0 && std::isfinite(fs), "welch_psd: sampling rate must be positive");
  detail::require(segment_length >= 2, "welch_psd: segment length must be >= 2");
  detail::require(overlap_fraction >= 0.0 && overlap_fraction < 1.0,
                  "welch_psd: overlap fraction must be in [0, 1)");
  const auto n = static_cast<Index>(signal.size());
  if (n < segment_length) {
    throw InvalidArgument("welch_psd: signal has " + std::to_string(n) +
                          " samples, at least " + std::to_string(segment_length) +
                          " required");
  }
  const Index overlap = static_cast<Index>(std::lround(overlap_fraction * segment_length));
  const Index step = std::max<Index>(1, segment_length - overlap);
  const Index segments = 1 + (n - segment_length) / step;

  const Vector window = make_window(segment_length, window_kind);
  const double window_power = window.squaredNorm();
  const Index bins = segment_length / 2 + 1;

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buffer(static_cast<std::size_t>(segment_length));
  std::vector<std::complex<double>> spectrum;
  Vector accum = Vector::Zero(bins);

  for (Index s = 0; s < segments; ++s) {
    const Index start = s * step;
    double mean = 0.0;
    for (Index i = 0; i < segment_length; ++i) mean += signal[static_cast<std::size_t>(start + i)];
    mean /= static_cast<double>(segment_length);
    for (Index i = 0; i < segment_length; ++i) {
      buffer[static_cast<std::size_t>(i)] =
          (signal[static_cast<std::size_t>(start + i)] - mean) * window(i);
    }
    fft.fwd(spectrum, buffer);
    for (Index k = 0; k < bins; ++k) accum(k) += std::norm(spectrum[static_cast<std::size_t>(k)]);
  }

  PsdEstimate out;
  out.segment_length = segment_length;
  out.overlap_fraction = overlap_fraction;
  out.window_kind = window_kind;
  out.frequencies.resize(bins);
  out.power = accum / (static_cast<double>(segments) * fs * window_power);
  for (Index k = 0; k < bins; ++k) {
    out.frequencies(k) = static_cast<double>(k) * fs / static_cast<double>(segment_length);
    const bool edge = (k == 0) || (segment_length % 2 == 0 && k == bins - 1);
    if (!edge) out.power(k) *= 2.0;
  }
  return out;
}

/// Trapezoidal integral of a PSD between two frequencies, with linear
/// interpolation at the band edges.
inline double integrate_psd(const PsdEstimate& psd, double f_lo, double f_hi) {
  const Vector& f = psd.frequencies;
  const Vector& p = psd.power;
  const Index n = f.size();
  if (n < 2 || f_hi <= f_lo) return 0.0;
  f_lo = std::max(f_lo, f(0));
  f_hi = std::min(f_hi, f(n - 1));
  if (f_hi <= f_lo) return 0.0;
  auto value_at = [&](double x) {
    auto it = std::upper_bound(f.data(), f.data() + n, x);
    Index hi = std::clamp<Index>(static_cast<Index>(it - f.data()), 1, n - 1);
    Index lo = hi - 1;
    const double t = (x - f(lo)) / (f(hi) - f(lo));
    return p(lo) + t * (p(hi) - p(lo));
  };
  double total = 0.0;
  double prev_x = f_lo;
  double prev_y = value_at(f_lo);
  for (Index k = 0; k < n; ++k) {
    if (f(k) <= f_lo) continue;
    if (f(k) >= f_hi) break;
    total += 0.5 * (prev_y + p(k)) * (f(k) - prev_x);
    prev_x = f(k);
    prev_y = p(k);
  }
  total += 0.5 * (prev_y + value_at(f_hi)) * (f_hi - prev_x);
  return total;
}

inline double integrate_psd(const PsdEstimate& psd) {
  const Index n = psd.frequencies.size();
  if (n < 2) return 0.0;
  return integrate_psd(psd, psd.frequencies(0), psd.frequencies(n - 1));
}

}  // namespace sprc::numerics
