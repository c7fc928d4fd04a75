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

// Regression random forest used as the nuisance learner, and the
// cross-fitting driver that produces out-of-fold nuisance predictions.

#ifndef DIPW_FOREST_H_
#define DIPW_FOREST_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dipw/common.h"
#include "dipw/data.h"
#include "json.hpp"

namespace dipw {

struct ForestSpec {
  int n_trees = 100;
  int mtry = 0;  // 0 means max(1, floor(p / 3)).
  int min_leaf = 5;
  std::optional<int> max_depth;
  uint64_t seed = 0;
  bool bootstrap = true;

  int ResolvedMtry(int p) const;
};

void ValidateForestSpec(const ForestSpec& spec, int p);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf.
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // Mean target of the training rows in the node.
  int count = 0;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes)
      : nodes_(std::move(nodes)) {}

  // Rows with x[feature] <= threshold go left.
  double Predict(const Matrix& x, Eigen::Index row) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

struct RegressionForest {
  std::vector<RegressionTree> trees;
  ForestSpec spec;
  int feature_count = 0;
};

// Grows spec.n_trees trees. Tree i draws its bootstrap sample and feature
// subsets from DeriveSeed(spec.seed, kTree, i). Splits minimize the summed
// squared error; thresholds are midpoints between adjacent distinct values;
// ties go to the lowest feature index, then the lowest threshold. Throws
// ArgumentError when n < 2 * min_leaf.
RegressionForest FitForest(const Matrix& x, const Vector& y,
                           const ForestSpec& spec);

// Mean of per-tree leaf values. Throws ArgumentError on a width mismatch.
Vector PredictForest(const RegressionForest& forest, const Matrix& x);

nlohmann::json ForestToJson(const RegressionForest& forest);
RegressionForest ForestFromJson(const nlohmann::json& j);

// A fitted nuisance model.
class FittedRegressor {
 public:
  virtual ~FittedRegressor() = default;
  virtual Vector Predict(const Matrix& x) const = 0;
};

// Pluggable nuisance learner. Fit must be a deterministic function of its
// arguments.
class NuisanceLearner {
 public:
  virtual ~NuisanceLearner() = default;
  virtual std::unique_ptr<FittedRegressor> Fit(const Matrix& x,
                                               const Vector& y,
                                               uint64_t seed) const = 0;
  // Fewest training rows Fit accepts.
  virtual size_t MinimumSamples() const = 0;
  virtual std::string Name() const = 0;
};

class ForestLearner : public NuisanceLearner {
 public:
  explicit ForestLearner(ForestSpec spec) : spec_(spec) {}

  // The forest seed is `seed`; spec.seed is ignored.
  std::unique_ptr<FittedRegressor> Fit(const Matrix& x, const Vector& y,
                                       uint64_t seed) const override;
  size_t MinimumSamples() const override;
  std::string Name() const override { return "random-forest"; }

 private:
  ForestSpec spec_;
};

// Predicts the training mean everywhere.
class MeanLearner : public NuisanceLearner {
 public:
  std::unique_ptr<FittedRegressor> Fit(const Matrix& x, const Vector& y,
                                       uint64_t seed) const override;
  size_t MinimumSamples() const override { return 1; }
  std::string Name() const override { return "mean"; }
};

// For each fold k, fits `learner` on the rows outside fold k (restricted to
// rows where train_mask is true, when given) and predicts every row in fold
// k. Fold k's learner seed is DeriveSeed(seed, kNuisance, k). Throws
// DegeneracyError naming the fold when its training rows number fewer than
// learner.MinimumSamples().
Vector CrossFitPredict(const Matrix& x, const Vector& target,
                       const FoldPlan& plan, const NuisanceLearner& learner,
                       uint64_t seed,
                       std::span<const bool> train_mask = {});

Vector CrossFitPredict(const Dataset& d, const Vector& target,
                       const FoldPlan& plan, const NuisanceLearner& learner,
                       uint64_t seed);

}  // namespace dipw

#endif  // DIPW_FOREST_H_
