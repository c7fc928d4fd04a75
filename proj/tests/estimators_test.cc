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

#include "dipw/estimators.h"

#include <cmath>
#include <vector>

#include "dipw/eval.h"
#include "dipw/random.h"
#include "dipw/sim.h"
#include "gtest/gtest.h"

namespace dipw {
namespace {

EstimatorConfig FastConfig(uint64_t seed) {
  EstimatorConfig cfg;
  cfg.nuisance.n_trees = 30;
  cfg.seed = seed;
  return cfg;
}

TEST(ParseKind, NamesRoundTrip) {
  for (const auto kind : {CateKind::kDipwAlgo1, CateKind::kDipwAlgo2,
                          CateKind::kIpw, CateKind::kDr, CateKind::kTLearner}) {
    EXPECT_EQ(ParseKind(KindName(kind)), kind);
  }
  EXPECT_EQ(ParseKind("dipw"), CateKind::kDipwAlgo1);
  EXPECT_THROW(ParseKind("x-learner"), ArgumentError);
}

TEST(FitDipwAlgo1, DeterministicForFixedSeed) {
  const auto [train, test] = Generate(DgpSpec{.n_train = 400, .n_test = 10});
  const auto a = FitDipwAlgo1(train.data, FastConfig(3));
  const auto b = FitDipwAlgo1(train.data, FastConfig(3));
  EXPECT_EQ(a.beta, b.beta);
  EXPECT_EQ(a.intercept, b.intercept);
  EXPECT_EQ(a.lambda, b.lambda);
  EXPECT_EQ(*a.alpha_w, *b.alpha_w);
}

TEST(FitDipwAlgo1, DiagnosticsAreConsistent) {
  DgpSpec spec;
  spec.n_train = 1000;
  spec.n_test = 10;
  spec.seed = 4;
  const auto [train, test] = Generate(spec);
  const auto model = FitDipwAlgo1(train.data, FastConfig(4));
  const auto& diag = model.diagnostics;
  ASSERT_TRUE(diag.sigma_e_hat && diag.sigma_u_hat && diag.r_squared);
  EXPECT_LT(*diag.sigma_u_hat, *diag.sigma_e_hat);
  EXPECT_GE(*diag.r_squared, 0.0);
  EXPECT_LE(*diag.r_squared, 1.0);
  EXPECT_EQ(model.beta.size(), 50);
  EXPECT_TRUE(model.converged);
}

TEST(FitDipwAlgo1, NullEffectGivesSmallCoefficients) {
  double total = 0.0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    DgpSpec spec;
    spec.n_test = 10;
    spec.seed = DeriveSeed(seed, SeedStream::kReplicate);
    const auto [train, test] = NullDgp(spec);
    EstimatorConfig cfg;
    cfg.seed = DeriveSeed(seed, SeedStream::kEstimator);
    total += FitDipwAlgo1(train.data, cfg).beta.lpNorm<1>();
  }
  EXPECT_LT(total / 20.0, 0.1);
}

TEST(FitDipwAlgo2, ZeroAlphaEqualsIpw) {
  const auto [train, test] = Generate(DgpSpec{.n_train = 300, .n_test = 10});
  EstimatorConfig cfg = FastConfig(5);
  cfg.zero_alpha = true;
  const auto algo2 = FitDipwAlgo2(train.data, cfg);
  const auto ipw = FitIpw(train.data, cfg);
  EXPECT_EQ(algo2.lambda, ipw.lambda);
  EXPECT_LT((algo2.beta - ipw.beta).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(algo2.intercept, ipw.intercept, 1e-12);
}

TEST(FitDipwAlgo2, CloseToAlgorithmOne) {
  DgpSpec spec;
  spec.n_test = 5000;
  spec.seed = 6;
  const auto [train, test] = Generate(spec);
  const EstimatorConfig cfg = FastConfig(6);
  const double r1 = Rmse(PredictCate(FitDipwAlgo1(train.data, cfg), test.data.x),
                         test.tau_true);
  const double r2 = Rmse(PredictCate(FitDipwAlgo2(train.data, cfg), test.data.x),
                         test.tau_true);
  EXPECT_LT(std::abs(r2 - r1), 0.1 * r1);
}

TEST(FitDr, ZeroOutcomeModelsEqualIpw) {
  const auto [train, test] = Generate(DgpSpec{.n_train = 300, .n_test = 10});
  EstimatorConfig cfg = FastConfig(7);
  cfg.zero_outcome_models = true;
  const auto dr = FitDr(train.data, cfg);
  const auto ipw = FitIpw(train.data, cfg);
  EXPECT_EQ(dr.lambda, ipw.lambda);
  EXPECT_LT((dr.beta - ipw.beta).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitIpw, RecoversNoiselessLinearEffect) {
  // y0 = 0 and y1 = 1 + 2 x1 - x2 with no noise.
  Rng rng(8);
  const Eigen::Index n = 4000, p = 5;
  Dataset d;
  d.x.resize(n, p);
  d.y.resize(n);
  d.t.resize(n);
  d.propensity = Vector::Constant(n, 0.5);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) d.x(i, j) = rng.Normal();
    d.t[i] = rng.Bernoulli(0.5);
    d.y[i] = d.t[i] * (1.0 + 2.0 * d.x(i, 0) - d.x(i, 1));
  }
  d.column_names = {"a", "b", "c", "d", "e"};
  const auto model = FitIpw(d, FastConfig(8));
  EXPECT_NEAR(model.beta[0], 2.0, 0.25);
  EXPECT_NEAR(model.beta[1], -1.0, 0.25);
  EXPECT_NEAR(model.intercept, 1.0, 0.25);
}

TEST(FitIpw, ReportsRawDiagnosticsOnly) {
  const auto [train, test] = Generate(DgpSpec{.n_train = 200, .n_test = 10});
  const auto model = FitIpw(train.data, FastConfig(9));
  EXPECT_TRUE(model.diagnostics.sigma_e_hat.has_value());
  EXPECT_FALSE(model.diagnostics.r_squared.has_value());
  EXPECT_FALSE(model.diagnostics.sigma_u_hat.has_value());
}

TEST(FitTLearner, NoEffectGivesSmallPredictions) {
  Rng rng(10);
  const Eigen::Index n = 1000;
  Dataset d;
  d.x.resize(n, 3);
  d.y.resize(n);
  d.t.resize(n);
  d.propensity = Vector::Constant(n, 0.5);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) d.x(i, j) = rng.Uniform();
    d.t[i] = rng.Bernoulli(0.5);
    d.y[i] = d.x(i, 0) + rng.Normal();
  }
  d.column_names = {"a", "b", "c"};
  const auto model = FitTLearner(d, FastConfig(10));
  const Vector tau = PredictCate(model, d.x);
  // Each forest predicts a mean of about n / 2 noisy rows.
  const double se = 2.0 * std::sqrt(2.0 / static_cast<double>(n / 2));
  EXPECT_LT(std::abs(tau.mean()), 3.0 * se);
  const auto again = FitTLearner(d, FastConfig(10));
  EXPECT_EQ(PredictCate(again, d.x), tau);
}

TEST(PredictCate, LinearModel) {
  CateModel model;
  model.kind = CateKind::kIpw;
  model.feature_names = {"a", "b", "c"};
  model.intercept = 0.5;
  model.beta = Vector::Zero(3);
  model.beta[1] = 2.0;
  Matrix x(2, 3);
  x << 0, 0, 0, 1, 3, -1;
  const Vector pred = PredictCate(model, x);
  EXPECT_EQ(pred[0], 0.5);
  EXPECT_EQ(pred[1], 6.5);
  EXPECT_THROW(PredictCate(model, x, {"a", "c", "b"}), SchemaError);
  EXPECT_THROW(PredictCate(model, Matrix::Zero(2, 2)), ArgumentError);
}

TEST(CateModelJson, RoundTripPreservesPredictions) {
  const auto [train, test] = Generate(DgpSpec{.n_train = 300, .n_test = 50});
  for (const auto kind : {CateKind::kDipwAlgo1, CateKind::kTLearner}) {
    const auto model = FitCate(kind, train.data, FastConfig(11));
    const auto json = CateModelToJson(model);
    EXPECT_EQ(json.at("format_version"), kFormatVersion);
    const auto back = CateModelFromJson(nlohmann::json::parse(json.dump()));
    EXPECT_EQ(back.kind, kind);
    EXPECT_EQ(PredictCate(back, test.data.x), PredictCate(model, test.data.x));
    if (kind == CateKind::kDipwAlgo1) {
      EXPECT_EQ(json.at("coefficients").at(0).at("variable"), "Intercept");
      EXPECT_EQ(back.diagnostics.r_squared, model.diagnostics.r_squared);
    }
  }
}

TEST(EstimatorConfigJson, RoundTrip) {
  EstimatorConfig cfg;
  cfg.k_folds = 3;
  cfg.nuisance.n_trees = 7;
  cfg.nuisance.max_depth = 4;
  cfg.b_choice = BChoice::kBStar;
  cfg.penalty.selection_rule = SelectionRule::kOneSe;
  cfg.penalty.standardize = false;
  cfg.seed = 123456789012345ULL;
  const auto back = EstimatorConfigFromJson(EstimatorConfigToJson(cfg));
  EXPECT_EQ(EstimatorConfigToJson(back), EstimatorConfigToJson(cfg));
  EXPECT_EQ(back.seed, cfg.seed);
  EXPECT_EQ(back.nuisance.max_depth, 4);
}

// Residualizes every column of `m` on the columns of `basis`.
Matrix Residualize(const Matrix& m, const Matrix& basis) {
  const Eigen::ColPivHouseholderQR<Matrix> qr(basis);
  return m - basis * qr.solve(m);
}

TEST(FitDipwAlgo1, FrischWaughLovellEquivalence) {
  for (uint64_t seed = 0; seed < 3; ++seed) {
    DgpSpec spec;
    spec.n_train = 500;
    spec.n_test = 10;
    spec.seed = 100 + seed;
    const auto [train, test] = Generate(spec);
    EstimatorConfig cfg = FastConfig(seed);
    const DipwInputs in = BuildDipwInputs(train.data, cfg);
    const auto [z, rec] = Standardize(train.data.x);
    const Eigen::Index n = z.rows(), p = z.cols();
    const Vector bw = in.b_hat.cwiseProduct(in.w);

    Matrix design(n, p + 2);
    design << z, in.w, bw;
    std::vector<bool> mask(p, true);
    mask.push_back(false);
    mask.push_back(false);
    PenaltySpec penalty;
    penalty.standardize = false;
    penalty.tolerance = 1e-10;
    const double lambda = 0.2 * LambdaMax(design, in.raw, mask);
    const auto joint = FitLassoAtLambda(design, in.raw, mask, penalty, lambda);

    Matrix basis(n, 3);
    basis << Vector::Ones(n), in.w, bw;
    const Matrix z_res = Residualize(z, basis);
    const Vector y_res = Residualize(in.raw, basis);
    const auto two_step = FitLassoAtLambda(z_res, y_res,
                                           std::vector<bool>(p, true), penalty,
                                           lambda);
    EXPECT_LT((joint.coef.head(p) - two_step.coef).cwiseAbs().maxCoeff(),
              10.0 * 1e-7);
  }
}

}  // namespace
}  // namespace dipw
