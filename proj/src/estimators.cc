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

#include <algorithm>
#include <vector>

#include "dipw/random.h"

namespace dipw {
namespace {

nlohmann::json OptionalToJson(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> OptionalFromJson(const nlohmann::json& j,
                                       const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

void CheckMinimumRows(const Dataset& d, const EstimatorConfig& cfg) {
  ValidateEstimatorConfig(cfg);
  if (d.n() < static_cast<size_t>(cfg.k_folds)) {
    throw ArgumentError("fewer units than cross-fitting folds");
  }
}

uint64_t CrossFitSeed(const EstimatorConfig& cfg) {
  return DeriveSeed(cfg.seed, SeedStream::kCrossFit);
}

uint64_t CvSeed(const EstimatorConfig& cfg) {
  return DeriveSeed(cfg.seed, SeedStream::kCrossValidation);
}

std::vector<bool> TreatedMask(const Dataset& d, bool treated) {
  std::vector<bool> mask(d.n());
  for (size_t i = 0; i < d.n(); ++i) {
    mask[i] = (d.t[static_cast<Eigen::Index>(i)] == 1.0) == treated;
  }
  return mask;
}

// std::vector<bool> has no contiguous storage; CrossFitPredict takes a span.
Vector CrossFitOnArm(const Dataset& d, const FoldPlan& plan,
                     const NuisanceLearner& learner, uint64_t seed,
                     bool treated) {
  const auto mask = TreatedMask(d, treated);
  std::unique_ptr<bool[]> flags(new bool[mask.size()]);
  std::copy(mask.begin(), mask.end(), flags.get());
  return CrossFitPredict(d.x, d.y, plan, learner, seed,
                         std::span<const bool>(flags.get(), mask.size()));
}

CateModel LinearModel(CateKind kind, const Dataset& d,
                      const EstimatorConfig& cfg, const SparseLinearFit& fit,
                      Eigen::Index p) {
  CateModel model;
  model.kind = kind;
  model.feature_names = d.column_names;
  model.beta = fit.coef.head(p);
  model.intercept = fit.intercept;
  model.lambda = fit.lambda;
  model.cv = fit.cv;
  model.converged = fit.converged;
  model.config = cfg;
  model.cross_fit_seed = CrossFitSeed(cfg);
  model.cv_seed = CvSeed(cfg);
  return model;
}

std::vector<bool> AllPenalized(size_t p) { return std::vector<bool>(p, true); }

}  // namespace

std::string KindName(CateKind kind) {
  switch (kind) {
    case CateKind::kDipwAlgo1:
      return "dipw-algo1";
    case CateKind::kDipwAlgo2:
      return "dipw-algo2";
    case CateKind::kIpw:
      return "ipw";
    case CateKind::kDr:
      return "dr";
    case CateKind::kTLearner:
      return "t-learner";
  }
  return "unknown";
}

CateKind ParseKind(const std::string& name) {
  if (name == "dipw" || name == "dipw-algo1") return CateKind::kDipwAlgo1;
  if (name == "dipw-algo2") return CateKind::kDipwAlgo2;
  if (name == "ipw") return CateKind::kIpw;
  if (name == "dr") return CateKind::kDr;
  if (name == "t-learner") return CateKind::kTLearner;
  throw ArgumentError("unknown method '" + name +
                      "' (expected dipw, dipw-algo1, dipw-algo2, ipw, dr, "
                      "t-learner)");
}

void ValidateEstimatorConfig(const EstimatorConfig& cfg) {
  if (cfg.k_folds < 2) throw ArgumentError("k_folds must be at least 2");
  ValidatePenaltySpec(cfg.penalty);
  if (cfg.nuisance.n_trees < 1 || cfg.nuisance.min_leaf < 1) {
    throw ArgumentError("invalid nuisance forest settings");
  }
}

nlohmann::json EstimatorConfigToJson(const EstimatorConfig& cfg) {
  const auto& f = cfg.nuisance;
  const auto& pen = cfg.penalty;
  return {
      {"k_folds", cfg.k_folds},
      {"b_choice", cfg.b_choice == BChoice::kPooledMu ? "pooled-mu" : "b-star"},
      {"seed", cfg.seed},
      {"zero_alpha", cfg.zero_alpha},
      {"zero_outcome_models", cfg.zero_outcome_models},
      {"nuisance",
       {{"n_trees", f.n_trees},
        {"mtry", f.mtry},
        {"min_leaf", f.min_leaf},
        {"max_depth",
         f.max_depth ? nlohmann::json(*f.max_depth) : nlohmann::json(nullptr)},
        {"bootstrap", f.bootstrap}}},
      {"penalty",
       {{"grid_size", pen.grid_size},
        {"lambda_min_ratio", pen.lambda_min_ratio},
        {"cv_folds", pen.cv_folds},
        {"selection_rule",
         pen.selection_rule == SelectionRule::kMinMse ? "min-mse" : "one-se"},
        {"tolerance", pen.tolerance},
        {"max_iterations", pen.max_iterations},
        {"standardize", pen.standardize}}},
  };
}

EstimatorConfig EstimatorConfigFromJson(const nlohmann::json& j) {
  EstimatorConfig cfg;
  cfg.k_folds = j.value("k_folds", cfg.k_folds);
  const std::string b = j.value("b_choice", std::string("pooled-mu"));
  if (b == "pooled-mu") {
    cfg.b_choice = BChoice::kPooledMu;
  } else if (b == "b-star") {
    cfg.b_choice = BChoice::kBStar;
  } else {
    throw ArgumentError("unknown b_choice '" + b + "'");
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.zero_alpha = j.value("zero_alpha", false);
  cfg.zero_outcome_models = j.value("zero_outcome_models", false);
  if (j.contains("nuisance")) {
    const auto& f = j.at("nuisance");
    cfg.nuisance.n_trees = f.value("n_trees", cfg.nuisance.n_trees);
    cfg.nuisance.mtry = f.value("mtry", cfg.nuisance.mtry);
    cfg.nuisance.min_leaf = f.value("min_leaf", cfg.nuisance.min_leaf);
    if (f.contains("max_depth") && !f.at("max_depth").is_null()) {
      cfg.nuisance.max_depth = f.at("max_depth").get<int>();
    }
    cfg.nuisance.bootstrap = f.value("bootstrap", cfg.nuisance.bootstrap);
  }
  if (j.contains("penalty")) {
    const auto& pen = j.at("penalty");
    cfg.penalty.grid_size = pen.value("grid_size", cfg.penalty.grid_size);
    cfg.penalty.lambda_min_ratio =
        pen.value("lambda_min_ratio", cfg.penalty.lambda_min_ratio);
    cfg.penalty.cv_folds = pen.value("cv_folds", cfg.penalty.cv_folds);
    const std::string rule = pen.value("selection_rule", std::string("min-mse"));
    if (rule == "min-mse") {
      cfg.penalty.selection_rule = SelectionRule::kMinMse;
    } else if (rule == "one-se") {
      cfg.penalty.selection_rule = SelectionRule::kOneSe;
    } else {
      throw ArgumentError("unknown selection_rule '" + rule + "'");
    }
    cfg.penalty.tolerance = pen.value("tolerance", cfg.penalty.tolerance);
    cfg.penalty.max_iterations =
        pen.value("max_iterations", cfg.penalty.max_iterations);
    cfg.penalty.standardize = pen.value("standardize", cfg.penalty.standardize);
  }
  return cfg;
}

DipwInputs BuildDipwInputs(const Dataset& d, const EstimatorConfig& cfg) {
  CheckMinimumRows(d, cfg);
  DipwInputs in;
  in.plan = MakeFolds(d.n(), cfg.k_folds, CrossFitSeed(cfg));
  const PseudoOutcomeSet ipw = IpwTransform(d);
  in.w = ipw.w;
  in.raw = ipw.raw;
  const ForestLearner learner(cfg.nuisance);
  const uint64_t nuisance_seed = DeriveSeed(cfg.seed, SeedStream::kNuisance);
  Vector b_hat;
  if (cfg.b_choice == BChoice::kPooledMu) {
    b_hat = CrossFitPredict(d.x, d.y, in.plan, learner, nuisance_seed);
  } else {
    const Vector mu1 = CrossFitOnArm(d, in.plan, learner,
                                     DeriveSeed(nuisance_seed, SeedStream::kNuisance, 1),
                                     true);
    const Vector mu0 = CrossFitOnArm(d, in.plan, learner,
                                     DeriveSeed(nuisance_seed, SeedStream::kNuisance, 0),
                                     false);
    b_hat.resize(mu1.size());
    for (Eigen::Index i = 0; i < b_hat.size(); ++i) {
      b_hat[i] = BStar(d.propensity[i], mu1[i], mu0[i]);
    }
  }
  in.b_hat = b_hat.cwiseMax(d.y.minCoeff()).cwiseMin(d.y.maxCoeff());
  return in;
}

CateModel FitDipwAlgo1(const Dataset& d, const EstimatorConfig& cfg) {
  const DipwInputs in = BuildDipwInputs(d, cfg);
  const auto p = static_cast<Eigen::Index>(d.p());
  const Vector bw = in.b_hat.cwiseProduct(in.w);
  Matrix design(d.x.rows(), p + 2);
  design << d.x, in.w, bw;
  std::vector<bool> penalized = AllPenalized(d.p());
  penalized.push_back(false);
  penalized.push_back(false);
  const SparseLinearFit fit =
      CvLasso(design, in.raw, penalized, cfg.penalty, CvSeed(cfg));

  CateModel model = LinearModel(CateKind::kDipwAlgo1, d, cfg, fit, p);
  model.alpha_w = fit.coef[p];
  model.alpha_bw = fit.coef[p + 1];
  const Vector tau_hat = (d.x * model.beta).array() + model.intercept;
  const Vector denoised = in.raw - *model.alpha_w * in.w - *model.alpha_bw * bw;
  auto& diag = model.diagnostics;
  diag.sigma_e_hat = SampleSd(in.raw - tau_hat);
  diag.sigma_u_hat = SampleSd(denoised - tau_hat);
  diag.r_squared = Denoise(d, in.b_hat, in.plan).r_squared;
  diag.lambda_denoised = fit.lambda;
  return model;
}

CateModel FitDipwAlgo2(const Dataset& d, const EstimatorConfig& cfg) {
  const DipwInputs in = BuildDipwInputs(d, cfg);
  Vector pseudo;
  double r_squared = 0.0;
  std::optional<double> alpha_w, alpha_bw;
  if (cfg.zero_alpha) {
    pseudo = in.raw;
    alpha_w = 0.0;
    alpha_bw = 0.0;
  } else {
    const PseudoOutcomeSet denoised = Denoise(d, in.b_hat, in.plan);
    pseudo = *denoised.denoised;
    r_squared = denoised.r_squared;
    alpha_w = denoised.alpha_w;
    alpha_bw = denoised.alpha_bw;
  }
  const SparseLinearFit fit =
      CvLasso(d.x, pseudo, AllPenalized(d.p()), cfg.penalty, CvSeed(cfg));
  CateModel model = LinearModel(CateKind::kDipwAlgo2, d, cfg, fit,
                                static_cast<Eigen::Index>(d.p()));
  model.alpha_w = alpha_w;
  model.alpha_bw = alpha_bw;
  const Vector tau_hat = (d.x * model.beta).array() + model.intercept;
  auto& diag = model.diagnostics;
  diag.sigma_e_hat = SampleSd(in.raw - tau_hat);
  diag.sigma_u_hat = SampleSd(pseudo - tau_hat);
  diag.r_squared = r_squared;
  diag.lambda_denoised = fit.lambda;
  return model;
}

CateModel FitIpw(const Dataset& d, const EstimatorConfig& cfg) {
  CheckMinimumRows(d, cfg);
  const PseudoOutcomeSet ipw = IpwTransform(d);
  const SparseLinearFit fit =
      CvLasso(d.x, ipw.raw, AllPenalized(d.p()), cfg.penalty, CvSeed(cfg));
  CateModel model = LinearModel(CateKind::kIpw, d, cfg, fit,
                                static_cast<Eigen::Index>(d.p()));
  const Vector tau_hat = (d.x * model.beta).array() + model.intercept;
  model.diagnostics.sigma_e_hat = SampleSd(ipw.raw - tau_hat);
  model.diagnostics.lambda_raw = fit.lambda;
  return model;
}

CateModel FitDr(const Dataset& d, const EstimatorConfig& cfg) {
  CheckMinimumRows(d, cfg);
  const FoldPlan plan = MakeFolds(d.n(), cfg.k_folds, CrossFitSeed(cfg));
  Vector mu1 = Vector::Zero(static_cast<Eigen::Index>(d.n()));
  Vector mu0 = mu1;
  if (!cfg.zero_outcome_models) {
    const ForestLearner learner(cfg.nuisance);
    const uint64_t nuisance_seed = DeriveSeed(cfg.seed, SeedStream::kNuisance);
    mu1 = CrossFitOnArm(d, plan, learner,
                        DeriveSeed(nuisance_seed, SeedStream::kNuisance, 1),
                        true);
    mu0 = CrossFitOnArm(d, plan, learner,
                        DeriveSeed(nuisance_seed, SeedStream::kNuisance, 0),
                        false);
  }
  const Vector pseudo = AipwTransform(d, mu1, mu0);
  const SparseLinearFit fit =
      CvLasso(d.x, pseudo, AllPenalized(d.p()), cfg.penalty, CvSeed(cfg));
  CateModel model = LinearModel(CateKind::kDr, d, cfg, fit,
                                static_cast<Eigen::Index>(d.p()));
  model.diagnostics.lambda_denoised = fit.lambda;
  return model;
}

CateModel FitTLearner(const Dataset& d, const EstimatorConfig& cfg) {
  ValidateEstimatorConfig(cfg);
  std::vector<size_t> treated, control;
  for (size_t i = 0; i < d.n(); ++i) {
    (d.t[static_cast<Eigen::Index>(i)] == 1.0 ? treated : control).push_back(i);
  }
  const auto minimum = 2 * static_cast<size_t>(cfg.nuisance.min_leaf);
  if (treated.size() < minimum || control.size() < minimum) {
    throw DegeneracyError("t-learner needs at least " +
                          std::to_string(minimum) +
                          " units in each arm (treated " +
                          std::to_string(treated.size()) + ", control " +
                          std::to_string(control.size()) + ")");
  }
  ForestSpec spec = cfg.nuisance;
  CateModel model;
  model.kind = CateKind::kTLearner;
  model.feature_names = d.column_names;
  model.config = cfg;
  spec.seed = DeriveSeed(cfg.seed, SeedStream::kEstimator, 1);
  model.forest_treated =
      FitForest(SubsetRows(d.x, treated), SubsetRows(d.y, treated), spec);
  spec.seed = DeriveSeed(cfg.seed, SeedStream::kEstimator, 0);
  model.forest_control =
      FitForest(SubsetRows(d.x, control), SubsetRows(d.y, control), spec);
  return model;
}

CateModel FitCate(CateKind kind, const Dataset& d, const EstimatorConfig& cfg) {
  switch (kind) {
    case CateKind::kDipwAlgo1:
      return FitDipwAlgo1(d, cfg);
    case CateKind::kDipwAlgo2:
      return FitDipwAlgo2(d, cfg);
    case CateKind::kIpw:
      return FitIpw(d, cfg);
    case CateKind::kDr:
      return FitDr(d, cfg);
    case CateKind::kTLearner:
      return FitTLearner(d, cfg);
  }
  throw ArgumentError("unknown estimator kind");
}

Vector PredictCate(const CateModel& model, const Matrix& x) {
  const auto p = static_cast<Eigen::Index>(model.feature_names.size());
  if (x.cols() != p) {
    throw ArgumentError("model expects " + std::to_string(p) +
                        " covariates, got " + std::to_string(x.cols()));
  }
  if (model.IsLinear()) return (x * model.beta).array() + model.intercept;
  if (!model.forest_treated || !model.forest_control) {
    throw ArgumentError("t-learner model is missing a forest");
  }
  return PredictForest(*model.forest_treated, x) -
         PredictForest(*model.forest_control, x);
}

Vector PredictCate(const CateModel& model, const Matrix& x,
                   const std::vector<std::string>& column_names) {
  if (column_names != model.feature_names) {
    for (size_t j = 0; j < std::min(column_names.size(),
                                    model.feature_names.size());
         ++j) {
      if (column_names[j] != model.feature_names[j]) {
        throw SchemaError("covariate " + std::to_string(j) + " is '" +
                          column_names[j] + "', model expects '" +
                          model.feature_names[j] + "'");
      }
    }
    throw SchemaError("covariate count differs from the model's");
  }
  return PredictCate(model, x);
}

nlohmann::json CateModelToJson(const CateModel& model) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = KindName(model.kind);
  j["feature_names"] = model.feature_names;
  if (model.IsLinear()) {
    nlohmann::json coefficients = nlohmann::json::array();
    coefficients.push_back({{"variable", "Intercept"},
                            {"coefficient", model.intercept}});
    for (size_t j2 = 0; j2 < model.feature_names.size(); ++j2) {
      coefficients.push_back(
          {{"variable", model.feature_names[j2]},
           {"coefficient", model.beta[static_cast<Eigen::Index>(j2)]}});
    }
    j["coefficients"] = std::move(coefficients);
    j["lambda"] = model.lambda;
    j["converged"] = model.converged;
    j["alpha_w"] = OptionalToJson(model.alpha_w);
    j["alpha_bw"] = OptionalToJson(model.alpha_bw);
    nlohmann::json cv = nlohmann::json::array();
    for (const auto& point : model.cv) {
      cv.push_back({point.lambda, point.mean_mse, point.se});
    }
    j["cv"] = std::move(cv);
  } else {
    j["forest_treated"] = ForestToJson(*model.forest_treated);
    j["forest_control"] = ForestToJson(*model.forest_control);
  }
  const auto& diag = model.diagnostics;
  j["diagnostics"] = {{"sigma_e_hat", OptionalToJson(diag.sigma_e_hat)},
                      {"sigma_u_hat", OptionalToJson(diag.sigma_u_hat)},
                      {"r_squared", OptionalToJson(diag.r_squared)},
                      {"lambda_raw", OptionalToJson(diag.lambda_raw)},
                      {"lambda_denoised", OptionalToJson(diag.lambda_denoised)}};
  j["config"] = EstimatorConfigToJson(model.config);
  j["seeds"] = {{"master", model.config.seed},
                {"cross_fit", model.cross_fit_seed},
                {"cv", model.cv_seed}};
  return j;
}

CateModel CateModelFromJson(const nlohmann::json& j) {
  if (!j.contains("format_version") ||
      j.at("format_version").get<int>() != kFormatVersion) {
    throw ArgumentError("unsupported model format_version");
  }
  CateModel model;
  model.kind = ParseKind(j.at("kind").get<std::string>());
  model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  if (model.IsLinear()) {
    const auto& coefficients = j.at("coefficients");
    if (coefficients.size() != model.feature_names.size() + 1) {
      throw ArgumentError("coefficient count does not match feature names");
    }
    model.intercept = coefficients.at(0).at("coefficient").get<double>();
    model.beta.resize(static_cast<Eigen::Index>(model.feature_names.size()));
    for (size_t k = 0; k < model.feature_names.size(); ++k) {
      const auto& entry = coefficients.at(k + 1);
      if (entry.at("variable").get<std::string>() != model.feature_names[k]) {
        throw ArgumentError("coefficient order does not match feature names");
      }
      model.beta[static_cast<Eigen::Index>(k)] =
          entry.at("coefficient").get<double>();
    }
    model.lambda = j.at("lambda").get<double>();
    model.converged = j.value("converged", true);
    model.alpha_w = OptionalFromJson(j, "alpha_w");
    model.alpha_bw = OptionalFromJson(j, "alpha_bw");
    for (const auto& point : j.value("cv", nlohmann::json::array())) {
      model.cv.push_back({point.at(0).get<double>(), point.at(1).get<double>(),
                          point.at(2).get<double>()});
    }
  } else {
    model.forest_treated = ForestFromJson(j.at("forest_treated"));
    model.forest_control = ForestFromJson(j.at("forest_control"));
  }
  const auto& diag = j.at("diagnostics");
  model.diagnostics.sigma_e_hat = OptionalFromJson(diag, "sigma_e_hat");
  model.diagnostics.sigma_u_hat = OptionalFromJson(diag, "sigma_u_hat");
  model.diagnostics.r_squared = OptionalFromJson(diag, "r_squared");
  model.diagnostics.lambda_raw = OptionalFromJson(diag, "lambda_raw");
  model.diagnostics.lambda_denoised = OptionalFromJson(diag, "lambda_denoised");
  model.config = EstimatorConfigFromJson(j.at("config"));
  if (j.contains("seeds")) {
    model.cross_fit_seed = j.at("seeds").value("cross_fit", uint64_t{0});
    model.cv_seed = j.at("seeds").value("cv", uint64_t{0});
  }
  return model;
}

}  // namespace dipw
