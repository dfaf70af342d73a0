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

#include "sprc/plant.hpp"
#include "sprc/sysid.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace sprc::sysid {
namespace {

constexpr Index kP = 100;

PeriodicBuffer filled(Index channels, Index period, Index window, std::int64_t n,
                      const std::function<double(Index, std::int64_t)>& f) {
  PeriodicBuffer b(channels, period, window);
  Vector v(channels);
  for (std::int64_t k = 0; k < n; ++k) {
    for (Index c = 0; c < channels; ++c) v(c) = f(c, k);
    b.push(k, v);
  }
  return b;
}

TEST(PeriodicDifference, PeriodicSignalGivesZero) {
  const auto b = filled(2, kP, 21, 400, [](Index c, std::int64_t k) {
    return std::sin(kTwoPi * static_cast<double>(k) / kP) * (1.0 + static_cast<double>(c)) +
           0.3 * std::cos(2.0 * kTwoPi * static_cast<double>(k % kP) / kP);
  });
  for (std::int64_t k = b.newest() - b.window(); k <= b.newest(); ++k) {
    EXPECT_NEAR(periodic_difference(b, 0, k), 0.0, 1e-12);
    EXPECT_NEAR(periodic_difference(b, 1, k), 0.0, 1e-12);
  }
}

TEST(PeriodicDifference, ConstantAndRamp) {
  const auto c = filled(1, kP, 5, 300, [](Index, std::int64_t) { return 7.25; });
  const auto r = filled(1, kP, 5, 300, [](Index, std::int64_t k) { return static_cast<double>(k); });
  for (std::int64_t k = 294; k < 300; ++k) {
    EXPECT_EQ(periodic_difference(c, 0, k), 0.0);
    EXPECT_EQ(periodic_difference(r, 0, k), 100.0);
  }
}

TEST(PeriodicDifference, WarmUpAndEvictionAreReported) {
  const auto b = filled(1, kP, 5, 50, [](Index, std::int64_t k) { return static_cast<double>(k); });
  EXPECT_THROW(periodic_difference(b, 0, 20), InvalidArgument);
  const auto old = filled(1, kP, 5, 1000, [](Index, std::int64_t k) { return static_cast<double>(k); });
  EXPECT_THROW(periodic_difference(old, 0, 500), InvalidArgument);
  PeriodicBuffer gap(1, kP, 5);
  gap.push(0, Vector::Zero(1));
  EXPECT_THROW(gap.push(2, Vector::Zero(1)), InvalidArgument);
}

TEST(Regressor, WindowOfOneIsTheCurrentDifferences) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::vector<Vector> rows;
  PeriodicBuffer b(6, kP, 1);
  for (std::int64_t k = 0; k < 250; ++k) {
    Vector v(6);
    for (Index c = 0; c < 6; ++c) v(c) = n(rng);
    rows.push_back(v);
    b.push(k, v);
  }
  for (Index blade = 0; blade < 3; ++blade) {
    const Vector x = build_regressor(b, blade, 3, 249);
    ASSERT_EQ(x.size(), 2);
    EXPECT_EQ(x(0), rows[249](blade) - rows[149](blade));
    EXPECT_EQ(x(1), rows[249](3 + blade) - rows[149](3 + blade));
  }
}

TEST(Regressor, PeriodicDataGivesZeroAndWindowsShiftByOne) {
  const auto b = filled(6, kP, 21, 400, [](Index c, std::int64_t k) {
    return std::cos(kTwoPi * static_cast<double>(k) / kP + static_cast<double>(c));
  });
  EXPECT_LT(build_regressor(b, 1, 3, 399).cwiseAbs().maxCoeff(), 1e-12);

  const auto r = filled(6, kP, 21, 400, [](Index c, std::int64_t k) {
    return std::sin(0.37 * static_cast<double>(k) * static_cast<double>(c + 1));
  });
  const Vector a = build_regressor(r, 2, 3, 398);
  const Vector n = build_regressor(r, 2, 3, 399);
  EXPECT_EQ(a.segment(1, 20), n.segment(0, 20));
  EXPECT_EQ(a.segment(22, 20), n.segment(21, 20));
}

TEST(Regressor, RejectsShortHistory) {
  const auto b = filled(6, kP, 21, 115, [](Index, std::int64_t k) { return static_cast<double>(k); });
  EXPECT_THROW(build_regressor(b, 0, 3, 110), InvalidArgument);
  Vector wrong(5);
  EXPECT_THROW(build_regressor(b, 0, 3, 114, wrong), InvalidArgument);
}

TEST(MarkovEstimate, AssemblyRoundTripsThroughTheOracleLayout) {
  const Index p = 21;
  const Matrix xi = plant::markov_oracle(plant::make_plant([] {
    plant::PlantParams pp;
    pp.coupling = 0.0;
    return pp;
  }()), p);
  Matrix rows(3, 2 * p);
  for (Index i = 0; i < 3; ++i) rows.row(i) = plant::siso_markov_row(xi, p, 3, 3, i).transpose();
  EXPECT_EQ(MarkovEstimate::assemble_mimo(rows, p), xi);
}

TEST(OnlineIdentifier, ZeroDataKeepsTheZeroEstimate) {
  plant::PlantSimulator sim(plant::default_plant(), plant::DisturbanceModel{}, {});
  OnlineIdentifier id(3, 21, kP);
  const Vector u = Vector::Zero(3);
  for (std::int64_t k = 0; k < 20 * kP; ++k) id.observe(k, u, sim.step(u, k));
  EXPECT_GT(id.updates(), 0);
  EXPECT_EQ(id.estimate().rows().cwiseAbs().maxCoeff(), 0.0);
}

// Batch weighted least squares with the decayed prior, on regressors built
// straight from the recorded series.
Vector batch_row(const std::vector<Vector>& u, const std::vector<Vector>& y, Index blade, Index p,
                 double lambda, double prior, std::int64_t first, std::int64_t last) {
  Matrix g = Matrix::Zero(2 * p, 2 * p);
  Vector c = Vector::Zero(2 * p);
  const auto du = [&](std::int64_t k) { return u[k](blade) - u[k - kP](blade); };
  const auto dy = [&](std::int64_t k) { return y[k](blade) - y[k - kP](blade); };
  const auto n = last - first + 1;
  for (std::int64_t k = first; k <= last; ++k) {
    Vector x(2 * p);
    for (Index s = 0; s < p; ++s) {
      x(s) = du(k - p + s);
      x(p + s) = dy(k - p + s);
    }
    const double w = std::pow(lambda, static_cast<double>(last - k));
    g += w * x * x.transpose();
    c += w * dy(k) * x;
  }
  g.diagonal().array() += std::pow(lambda, static_cast<double>(n)) * prior;
  return g.ldlt().solve(c);
}

TEST(OnlineIdentifier, MatchesBatchLeastSquaresOnIndependentRegressors) {
  const Index p = 8;
  const double lambda = 0.999;
  const double prior = 1.0;
  plant::PlantSimulator sim(plant::default_plant(),
                            plant::DisturbanceModel::uniform(20.0, 5.0, 3.0, 17), {});
  OnlineIdentifier id(3, p, kP, lambda, prior);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  std::vector<Vector> us, ys;
  const std::int64_t total = 6 * kP;
  for (std::int64_t k = 0; k < total; ++k) {
    Vector u(3);
    for (Index i = 0; i < 3; ++i) u(i) = 0.01 * n(rng);
    const Vector y = sim.step(u, k) / 1e3;
    us.push_back(u);
    ys.push_back(y);
    id.observe(k, u, y);
  }
  EXPECT_EQ(id.updates(), total - id.warmup());
  for (Index blade = 0; blade < 3; ++blade) {
    const Vector ref = batch_row(us, ys, blade, p, lambda, prior, id.warmup(), total - 1);
    const Vector est = id.estimate().row(blade);
    EXPECT_LT((est - ref).norm(), 1e-8 * ref.norm()) << "blade " << blade + 1;
  }
}

plant::SurrogatePlant decoupled() {
  plant::PlantParams pp;
  pp.coupling = 0.0;
  return plant::make_plant(pp);
}

double identify(const plant::SurrogatePlant& pl, double noise_sd, int rotations,
                const Index p, std::vector<double>* per_blade = nullptr) {
  plant::PlantSimulator sim(pl, plant::DisturbanceModel::uniform(300.0, 80.0, noise_sd, 41), {});
  OnlineIdentifier id(3, p, kP);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  for (std::int64_t k = 0; k <= rotations * kP; ++k) {
    Vector u(3);
    for (Index i = 0; i < 3; ++i) u(i) = n(rng);
    id.observe(k, u, sim.step(u, k));
  }
  const Matrix xi = plant::markov_oracle(pl, p);
  double worst = 0.0;
  for (Index i = 0; i < 3; ++i) {
    const Vector truth = plant::siso_markov_row(xi, p, 3, 3, i);
    const double err = (id.estimate().row(i) - truth).norm() / truth.norm();
    if (per_blade) per_blade->push_back(err);
    worst = std::max(worst, err);
  }
  return worst;
}

TEST(OnlineIdentifier, InnovationDrivenDataConvergesToTheOracle) {
  const double short_run = identify(decoupled(), 100.0, 50, 21);
  const double long_run = identify(decoupled(), 100.0, 500, 21);
  EXPECT_LT(long_run, 5e-2);
  EXPECT_LT(long_run, short_run);
}

// With e = 0 the observer gain never acts, so plants that differ only in L
// produce the same data while their predictor Markov parameters differ.
TEST(OnlineIdentifier, NoiseFreeDataDoesNotFixTheObserverGain) {
  plant::PlantParams a;
  plant::PlantParams b;
  b.observer_poles = {0.0, 0.1};
  const auto pa = plant::make_plant(a);
  const auto pb = plant::make_plant(b);
  plant::PlantSimulator sa(pa, plant::DisturbanceModel::uniform(300.0, 80.0, 0.0, 1), {});
  plant::PlantSimulator sb(pb, plant::DisturbanceModel::uniform(300.0, 80.0, 0.0, 1), {});
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (std::int64_t k = 0; k < 5 * kP; ++k) {
    Vector u(3);
    for (Index i = 0; i < 3; ++i) u(i) = n(rng);
    ASSERT_EQ(sa.step(u, k), sb.step(u, k));
  }
  const Matrix xa = plant::markov_oracle(pa, 21);
  const Matrix xb = plant::markov_oracle(pb, 21);
  EXPECT_GT((xa - xb).norm(), 0.1 * xa.norm());
}

TEST(OnlineIdentifier, TracksActuatorDegradation) {
  const auto pl = decoupled();
  plant::FaultScenario fault;
  fault.kind = plant::FaultKind::PitchActuatorDegradation;
  fault.blade = 3;
  fault.parameter = 0.5;
  fault.onset = 50 * kP;
  plant::PlantSimulator sim(pl, plant::DisturbanceModel::uniform(300.0, 80.0, 50.0, 3), fault);
  OnlineIdentifier id(3, 21, kP, 0.999);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  // c b is the newest input lag and does not depend on the observer gain.
  const auto gain = [&](Index blade) { return id.estimate().row(blade)(20); };
  double before = 0.0;
  for (std::int64_t k = 0; k <= 150 * kP; ++k) {
    Vector u(3);
    for (Index i = 0; i < 3; ++i) u(i) = n(rng);
    id.observe(k, u, sim.step(u, k));
    if (k == fault.onset - 1) before = gain(2) / gain(0);
  }
  EXPECT_NEAR(before, 1.0, 0.1);
  EXPECT_NEAR(gain(2) / gain(0), 0.5, 0.1);
}

}  // namespace
}  // namespace sprc::sysid
