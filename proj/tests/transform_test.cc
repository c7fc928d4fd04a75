/*
 * Copyright 2026 The DIPW Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dipw/transform.h"

#include <cmath>
#include <functional>
#include <vector>

#include "dipw/forest.h"
#include "dipw/random.h"
#include "dipw/sim.h"
#include "gtest/gtest.h"

namespace dipw {
namespace {

Dataset MakeDataset(const Vector& y, const Vector& t, const Vector& p) {
  Dataset d;
  d.y = y;
  d.t = t;
  d.propensity = p;
  d.x = Matrix::Zero(y.size(), 1);
  d.column_names = {"x"};
  return d;
}

double PopulationVariance(const Vector& v) {
  return (v.array() - v.mean()).square().mean();
}

TEST(IpwWeight, HandValues) {
  EXPECT_DOUBLE_EQ(IpwWeight(1, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(IpwWeight(0, 0.5), -2.0);
  EXPECT_DOUBLE_EQ(IpwWeight(1, 0.2), 5.0);
  EXPECT_DOUBLE_EQ(IpwWeight(0, 0.2), -1.25);
  EXPECT_THROW(IpwWeight(2, 0.5), ArgumentError);
  EXPECT_THROW(IpwWeight(1, 1.0), ArgumentError);
  EXPECT_THROW(IpwWeight(1, 0.0), ArgumentError);
}

TEST(IpwTransform, RawIsOutcomeTimesWeight) {
  Vector y(3), t(3), p(3);
  y << 3, 3, -1;
  t << 1, 0, 1;
  p << 0.5, 0.5, 0.2;
  const auto set = IpwTransform(MakeDataset(y, t, p));
  EXPECT_DOUBLE_EQ(set.raw[0], 6.0);
  EXPECT_DOUBLE_EQ(set.raw[1], -6.0);
  EXPECT_DOUBLE_EQ(set.raw[2], -5.0);
  EXPECT_FALSE(set.denoised.has_value());
}

TEST(IpwTransform, MeanWeightAtBalancedPropensity) {
  Rng rng(1);
  const Eigen::Index n = 1001;
  Vector t(n);
  for (Eigen::Index i = 0; i < n; ++i) t[i] = rng.Bernoulli(0.5);
  const auto set = IpwTransform(
      MakeDataset(Vector::Ones(n), t, Vector::Constant(n, 0.5)));
  const double treated = t.mean();
  EXPECT_NEAR(set.w.mean(), 2.0 * treated - 2.0 * (1.0 - treated), 1e-12);
}

TEST(IpwTransform, RawIsUnbiasedForAte) {
  DgpSpec spec;
  const auto sample = SampleDgp(spec, 100000, 2);
  const auto set = IpwTransform(sample.data);
  const double se =
      SampleSd(set.raw) / std::sqrt(static_cast<double>(sample.data.n()));
  EXPECT_LT(std::abs(set.raw.mean() - sample.tau_true.mean()), 3.0 * se);
}

TEST(BStar, HandValues) {
  EXPECT_DOUBLE_EQ(BStar(0.5, 2, 1), 1.5);
  EXPECT_DOUBLE_EQ(BStar(0.2, 10, 0), 8.0);
  for (const double p : {0.1, 0.37, 0.9}) EXPECT_DOUBLE_EQ(BStar(p, 4, 4), 4.0);
  EXPECT_THROW(BStar(1.0, 1, 1), ArgumentError);
}

TEST(AipwTransform, HandValueAndIdentity) {
  Vector one(1);
  one << 3;
  Vector t(1), p(1), mu1(1), mu0(1);
  t << 1;
  p << 0.5;
  mu1 << 2;
  mu0 << 1;
  const Dataset d = MakeDataset(one, t, p);
  const Vector aipw = AipwTransform(d, mu1, mu0);
  EXPECT_DOUBLE_EQ(aipw[0], 3.0);
  const auto set = IpwTransform(d);
  EXPECT_DOUBLE_EQ(set.raw[0] - BStar(0.5, 2, 1) * set.w[0], 3.0);
}

TEST(AipwTransform, ZeroModelsReduceToRaw) {
  Rng rng(3);
  const Eigen::Index n = 50;
  Vector y(n), t(n), p(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = rng.Normal();
    t[i] = rng.Bernoulli(0.3);
    p[i] = 0.05 + 0.9 * rng.Uniform();
  }
  const Dataset d = MakeDataset(y, t, p);
  const Vector aipw = AipwTransform(d, Vector::Zero(n), Vector::Zero(n));
  const auto set = IpwTransform(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    EXPECT_NEAR(aipw[i], set.raw[i], 1e-12 * (1.0 + std::abs(set.raw[i])));
  }
}

TEST(AipwTransform, IdentityHoldsForRandomInputs) {
  Rng rng(4);
  const Eigen::Index n = 10000;
  Vector y(n), t(n), p(n), mu1(n), mu0(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = 10.0 * rng.Normal();
    t[i] = rng.Bernoulli(0.5);
    p[i] = 0.02 + 0.96 * rng.Uniform();
    mu1[i] = 10.0 * rng.Normal();
    mu0[i] = 10.0 * rng.Normal();
  }
  const Dataset d = MakeDataset(y, t, p);
  const Vector aipw = AipwTransform(d, mu1, mu0);
  const auto set = IpwTransform(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lhs = set.raw[i] - BStar(p[i], mu1[i], mu0[i]) * set.w[i];
    const double scale = 1.0 + std::abs(lhs) + std::abs(set.raw[i]);
    EXPECT_LT(std::abs(lhs - aipw[i]) / scale, 1e-12);
  }
}

TEST(Denoise, ZeroBaselineIsDegenerate) {
  Vector y(4), t(4);
  y << 1, 2, 3, 4;
  t << 1, 0, 1, 0;
  const Dataset d = MakeDataset(y, t, Vector::Constant(4, 0.5));
  // Clipping lifts b_hat to min(y), which is still constant.
  EXPECT_THROW(Denoise(d, Vector::Zero(4), MakeFolds(4, 2, 1)),
               DegeneracyError);
}

TEST(Denoise, ZeroResponseGivesZero) {
  Vector t(4), b(4);
  t << 1, 0, 1, 0;
  b << 1, 2, 3, 4;
  const Dataset d = MakeDataset(Vector::Zero(4), t, Vector::Constant(4, 0.5));
  const auto set = Denoise(d, b, MakeFolds(4, 2, 1));
  ASSERT_TRUE(set.denoised.has_value());
  EXPECT_TRUE(set.denoised->isZero(0.0));
  EXPECT_EQ(set.r_squared, 0.0);
}

TEST(Denoise, ResidualOrthogonalAndRSquaredInRange) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(50 + seed);
    const Eigen::Index n = 400;
    Vector y(n), t(n), p(n), b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      b[i] = 5.0 * rng.Uniform();
      t[i] = rng.Bernoulli(0.4);
      p[i] = 0.4;
      y[i] = b[i] + t[i] + rng.Normal();
    }
    const Dataset d = MakeDataset(y, t, p);
    const auto set = Denoise(d, b, MakeFolds(n, 5, seed));
    const Vector bw = set.b_hat.cwiseProduct(set.w);
    EXPECT_LT(std::abs(set.denoised->dot(set.w)), 1e-8 * set.raw.norm() * set.w.norm());
    EXPECT_LT(std::abs(set.denoised->dot(bw)), 1e-8 * set.raw.norm() * bw.norm());
    const double sst = (set.raw.array() - set.raw.mean()).square().sum();
    const double expected =
        std::clamp(1.0 - set.denoised->squaredNorm() / sst, 0.0, 1.0);
    EXPECT_NEAR(set.r_squared, expected, 1e-12);
    EXPECT_GE(set.r_squared, 0.0);
    EXPECT_LE(set.r_squared, 1.0);
    EXPECT_LE(PopulationVariance(*set.denoised), PopulationVariance(set.raw));
  }
}

TEST(Denoise, ClipsBaselineToOutcomeRange) {
  Vector y(4), t(4), b(4);
  y << 0, 1, 2, 3;
  t << 1, 0, 1, 0;
  b << -10, 1, 2, 10;
  const auto set = Denoise(MakeDataset(y, t, Vector::Constant(4, 0.5)), b,
                           MakeFolds(4, 2, 1));
  EXPECT_EQ(set.b_hat[0], 0.0);
  EXPECT_EQ(set.b_hat[3], 3.0);
}

TEST(Denoise, ForestBaselineReducesVarianceOnDgp) {
  const auto sample = SampleDgp(DgpSpec{}, 1000, 5);
  const auto plan = MakeFolds(1000, 5, 5);
  const Vector b_hat = CrossFitPredict(sample.data, sample.data.y, plan,
                                       ForestLearner(ForestSpec{}), 5);
  const auto set = Denoise(sample.data, b_hat, plan);
  EXPECT_LT(PopulationVariance(*set.denoised), PopulationVariance(set.raw));
  EXPECT_GT(set.r_squared, 0.0);
}

TEST(NoiseDecomposition, ReconstructsRaw) {
  const auto sample = SampleDgp(DgpSpec{}, 2000, 6);
  const auto [signal, noise] =
      NoiseDecomposition(sample.data, sample.Outcomes());
  const auto set = IpwTransform(sample.data);
  for (Eigen::Index i = 0; i < signal.size(); ++i) {
    EXPECT_NEAR(signal[i] + noise[i] - set.raw[i], 0.0,
                1e-12 * (1.0 + std::abs(set.raw[i])));
  }
  EXPECT_THROW(NoiseDecomposition(sample.data, std::nullopt), UnsupportedError);
}

TEST(NoiseDecomposition, NoEffectGivesZeroSignal) {
  DgpSpec spec;
  spec.null_effect = true;
  const auto sample = SampleDgp(spec, 500, 7);
  const auto [signal, noise] =
      NoiseDecomposition(sample.data, sample.Outcomes());
  EXPECT_TRUE(signal.isZero(0.0));
}

TEST(NoiseDecomposition, NoiseHasZeroMean) {
  const auto sample = SampleDgp(DgpSpec{}, 100000, 8);
  const auto [signal, noise] =
      NoiseDecomposition(sample.data, sample.Outcomes());
  const double n = static_cast<double>(noise.size());
  EXPECT_LT(std::abs(noise.mean()), 3.0 * SampleSd(noise) / std::sqrt(n));
}

TEST(Orthogonality, BoundedBaselinesDoNotShiftTheTarget) {
  const auto sample = SampleDgp(DgpSpec{}, 100000, 9);
  const auto set = IpwTransform(sample.data);
  const std::vector<std::function<double(const Matrix&, Eigen::Index)>> bs = {
      [](const Matrix&, Eigen::Index) { return 1.0; },
      [](const Matrix& x, Eigen::Index i) { return x(i, 0); },
      [](const Matrix& x, Eigen::Index i) { return std::sin(3.0 * x(i, 1)); },
      [](const Matrix& x, Eigen::Index i) { return x(i, 30) > 0 ? 2.0 : -1.0; },
      [](const Matrix& x, Eigen::Index i) { return std::tanh(x(i, 31)); },
  };
  const Eigen::Index n = set.w.size();
  for (size_t k = 0; k < bs.size(); ++k) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      v[i] = bs[k](sample.data.x, i) * set.w[i] * sample.tau_true[i];
    }
    EXPECT_LT(std::abs(v.mean()),
              3.0 * SampleSd(v) / std::sqrt(static_cast<double>(n)))
        << "baseline " << k;
  }
}

TEST(SampleSd, UsesNMinusOne) {
  Vector v(4);
  v << 1, 2, 3, 4;
  EXPECT_NEAR(SampleSd(v), std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(SampleSd(Vector::Ones(1)), 0.0);
}

}  // namespace
}  // namespace dipw
