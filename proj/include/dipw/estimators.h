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

// CATE estimators sharing one model type: denoised-IPW lasso (joint and
// two-step variants), plain IPW lasso, DR-learner, and T-learner.

#ifndef DIPW_ESTIMATORS_H_
#define DIPW_ESTIMATORS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dipw/common.h"
#include "dipw/data.h"
#include "dipw/forest.h"
#include "dipw/lasso.h"
#include "dipw/transform.h"
#include "json.hpp"

namespace dipw {

enum class CateKind { kDipwAlgo1, kDipwAlgo2, kIpw, kDr, kTLearner };

std::string KindName(CateKind kind);
// Accepts the KindName spellings plus "dipw" (the joint variant).
CateKind ParseKind(const std::string& name);

enum class BChoice { kPooledMu, kBStar };

struct EstimatorConfig {
  int k_folds = 5;
  ForestSpec nuisance;
  BChoice b_choice = BChoice::kPooledMu;
  PenaltySpec penalty;
  uint64_t seed = 0;
  // Two-step variant only: skip the projection (pseudo-outcome = y * w).
  bool zero_alpha = false;
  // DR only: force both outcome models to 0.
  bool zero_outcome_models = false;
};

void ValidateEstimatorConfig(const EstimatorConfig& cfg);
nlohmann::json EstimatorConfigToJson(const EstimatorConfig& cfg);
EstimatorConfig EstimatorConfigFromJson(const nlohmann::json& j);

struct CateModel {
  CateKind kind = CateKind::kDipwAlgo1;
  std::vector<std::string> feature_names;
  // Linear kinds.
  double intercept = 0.0;
  Vector beta;
  double lambda = 0.0;
  std::vector<CvPoint> cv;
  bool converged = true;
  std::optional<double> alpha_w;
  std::optional<double> alpha_bw;
  // T-learner.
  std::optional<RegressionForest> forest_treated;
  std::optional<RegressionForest> forest_control;

  DenoisingDiagnostics diagnostics;
  EstimatorConfig config;
  uint64_t cross_fit_seed = 0;
  uint64_t cv_seed = 0;

  bool IsLinear() const { return kind != CateKind::kTLearner; }
};

// Intermediate quantities shared by both denoised variants.
struct DipwInputs {
  FoldPlan plan;
  Vector w;
  Vector raw;    // y * w
  Vector b_hat;  // Out-of-fold B(x), clipped to [min y, max y].
};

// Cross-fits B(x) (pooled mu or B*) on cfg.k_folds folds.
DipwInputs BuildDipwInputs(const Dataset& d, const EstimatorConfig& cfg);

// Lasso of y*w on [X | w | b_hat*w] with the last two columns unpenalized.
CateModel FitDipwAlgo1(const Dataset& d, const EstimatorConfig& cfg);
// Projection residual of y*w on (w, b_hat*w), then lasso on X.
CateModel FitDipwAlgo2(const Dataset& d, const EstimatorConfig& cfg);
CateModel FitIpw(const Dataset& d, const EstimatorConfig& cfg);
CateModel FitDr(const Dataset& d, const EstimatorConfig& cfg);
CateModel FitTLearner(const Dataset& d, const EstimatorConfig& cfg);

CateModel FitCate(CateKind kind, const Dataset& d, const EstimatorConfig& cfg);

Vector PredictCate(const CateModel& model, const Matrix& x);
// Also checks that column names match the training names, in order, and
// throws SchemaError otherwise.
Vector PredictCate(const CateModel& model, const Matrix& x,
                   const std::vector<std::string>& column_names);

nlohmann::json CateModelToJson(const CateModel& model);
CateModel CateModelFromJson(const nlohmann::json& j);

}  // namespace dipw

#endif  // DIPW_ESTIMATORS_H_
