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

#include "dipw/forest.h"

#include <algorithm>
#include <numeric>
#include <utility>

#include "dipw/parallel.h"
#include "dipw/random.h"

namespace dipw {
namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const Vector& y, const ForestSpec& spec,
              uint64_t seed)
      : x_(x),
        y_(y),
        spec_(spec),
        mtry_(spec.ResolvedMtry(static_cast<int>(x.cols()))),
        rng_(seed),
        features_(static_cast<size_t>(x.cols())) {
    std::iota(features_.begin(), features_.end(), 0);
  }

  RegressionTree Build() {
    const auto n = static_cast<size_t>(x_.rows());
    sample_.resize(n);
    if (spec_.bootstrap) {
      for (auto& row : sample_) row = static_cast<int>(rng_.UniformIndex(n));
    } else {
      std::iota(sample_.begin(), sample_.end(), 0);
    }
    scratch_.reserve(n);
    Grow(0, n, 0);
    return RegressionTree(std::move(nodes_));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
  };

  int Grow(size_t begin, size_t end, int depth) {
    const size_t count = end - begin;
    double sum = 0.0;
    double lo = y_[sample_[begin]];
    double hi = lo;
    for (size_t i = begin; i < end; ++i) {
      const double v = y_[sample_[i]];
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[static_cast<size_t>(index)].value = sum / static_cast<double>(count);
    nodes_[static_cast<size_t>(index)].count = static_cast<int>(count);

    const auto min_leaf = static_cast<size_t>(spec_.min_leaf);
    if (count < 2 * min_leaf || lo == hi ||
        (spec_.max_depth && depth >= *spec_.max_depth)) {
      return index;
    }
    const Split split = FindSplit(begin, end, sum);
    if (split.feature < 0) return index;

    const auto middle = std::partition(
        sample_.begin() + static_cast<long>(begin),
        sample_.begin() + static_cast<long>(end), [&](int row) {
          return x_(row, split.feature) <= split.threshold;
        });
    const auto mid = static_cast<size_t>(middle - sample_.begin());
    const int left = Grow(begin, mid, depth + 1);
    const int right = Grow(mid, end, depth + 1);
    auto& node = nodes_[static_cast<size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  Split FindSplit(size_t begin, size_t end, double sum) {
    const size_t count = end - begin;
    const auto min_leaf = static_cast<size_t>(spec_.min_leaf);
    // Partial Fisher-Yates draw of mtry features, visited in index order.
    const size_t p = features_.size();
    for (size_t i = 0; i < static_cast<size_t>(mtry_); ++i) {
      const size_t j = i + rng_.UniformIndex(p - i);
      std::swap(features_[i], features_[j]);
    }
    std::vector<int> candidates(features_.begin(),
                                features_.begin() + mtry_);
    std::sort(candidates.begin(), candidates.end());

    const double parent_score = sum * sum / static_cast<double>(count);
    Split best;
    best.score = parent_score;
    double total_sq = 0.0;
    for (size_t i = begin; i < end; ++i) {
      total_sq += y_[sample_[i]] * y_[sample_[i]];
    }
    // Minimum SSE reduction worth a split.
    const double min_gain = 1e-12 * std::max(total_sq, 1e-300);

    for (const int feature : candidates) {
      scratch_.clear();
      for (size_t i = begin; i < end; ++i) {
        scratch_.emplace_back(x_(sample_[i], feature), y_[sample_[i]]);
      }
      std::sort(scratch_.begin(), scratch_.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (scratch_.front().first == scratch_.back().first) continue;
      double left_sum = 0.0;
      for (size_t i = 1; i < count; ++i) {
        left_sum += scratch_[i - 1].second;
        if (i < min_leaf || count - i < min_leaf) continue;
        if (!(scratch_[i - 1].first < scratch_[i].first)) continue;
        const double right_sum = sum - left_sum;
        const double score =
            left_sum * left_sum / static_cast<double>(i) +
            right_sum * right_sum / static_cast<double>(count - i);
        if (score > best.score && score - parent_score > min_gain) {
          const double lo = scratch_[i - 1].first;
          const double hi = scratch_[i].first;
          double threshold = lo + 0.5 * (hi - lo);
          if (!(threshold < hi)) threshold = lo;
          best = {feature, threshold, score};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const Vector& y_;
  const ForestSpec& spec_;
  int mtry_;
  Rng rng_;
  std::vector<int> features_;
  std::vector<int> sample_;
  std::vector<std::pair<double, double>> scratch_;
  std::vector<TreeNode> nodes_;
};

class FittedForest : public FittedRegressor {
 public:
  explicit FittedForest(RegressionForest forest) : forest_(std::move(forest)) {}
  Vector Predict(const Matrix& x) const override {
    return PredictForest(forest_, x);
  }

 private:
  RegressionForest forest_;
};

class FittedConstant : public FittedRegressor {
 public:
  explicit FittedConstant(double value) : value_(value) {}
  Vector Predict(const Matrix& x) const override {
    return Vector::Constant(x.rows(), value_);
  }

 private:
  double value_;
};

}  // namespace

int ForestSpec::ResolvedMtry(int p) const {
  return mtry > 0 ? mtry : std::max(1, p / 3);
}

void ValidateForestSpec(const ForestSpec& spec, int p) {
  if (spec.n_trees < 1) throw ArgumentError("n_trees must be at least 1");
  if (spec.min_leaf < 1) throw ArgumentError("min_leaf must be at least 1");
  if (spec.max_depth && *spec.max_depth < 0) {
    throw ArgumentError("max_depth must be non-negative");
  }
  const int mtry = spec.ResolvedMtry(p);
  if (p < 1) throw ArgumentError("forest needs at least one feature");
  if (mtry < 1 || mtry > p) {
    throw ArgumentError("mtry must lie in [1, " + std::to_string(p) + "]");
  }
}

double RegressionTree::Predict(const Matrix& x, Eigen::Index row) const {
  size_t node = 0;
  while (nodes_[node].feature >= 0) {
    const auto& n = nodes_[node];
    node = static_cast<size_t>(x(row, n.feature) <= n.threshold ? n.left
                                                                 : n.right);
  }
  return nodes_[node].value;
}

RegressionForest FitForest(const Matrix& x, const Vector& y,
                           const ForestSpec& spec) {
  ValidateForestSpec(spec, static_cast<int>(x.cols()));
  if (x.rows() != y.size()) {
    throw ArgumentError("forest: covariate rows and target length differ");
  }
  if (x.rows() < 2 * static_cast<Eigen::Index>(spec.min_leaf)) {
    throw ArgumentError("forest needs at least 2 * min_leaf = " +
                        std::to_string(2 * spec.min_leaf) + " rows, got " +
                        std::to_string(x.rows()));
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw ArgumentError("forest inputs must be finite");
  }
  RegressionForest forest;
  forest.spec = spec;
  forest.feature_count = static_cast<int>(x.cols());
  forest.trees.resize(static_cast<size_t>(spec.n_trees));
  ParallelFor(forest.trees.size(), [&](size_t i) {
    TreeBuilder builder(x, y, spec, DeriveSeed(spec.seed, SeedStream::kTree, i));
    forest.trees[i] = builder.Build();
  });
  return forest;
}

Vector PredictForest(const RegressionForest& forest, const Matrix& x) {
  if (x.rows() > 0 && x.cols() != forest.feature_count) {
    throw ArgumentError("forest expects " +
                        std::to_string(forest.feature_count) +
                        " features, got " + std::to_string(x.cols()));
  }
  Vector out = Vector::Zero(x.rows());
  if (forest.trees.empty()) return out;
  for (Eigen::Index row = 0; row < x.rows(); ++row) {
    double total = 0.0;
    for (const auto& tree : forest.trees) total += tree.Predict(x, row);
    out[row] = total / static_cast<double>(forest.trees.size());
  }
  return out;
}

nlohmann::json ForestToJson(const RegressionForest& forest) {
  nlohmann::json j;
  j["n_trees"] = forest.spec.n_trees;
  j["mtry"] = forest.spec.ResolvedMtry(forest.feature_count);
  j["min_leaf"] = forest.spec.min_leaf;
  j["max_depth"] = forest.spec.max_depth
                       ? nlohmann::json(*forest.spec.max_depth)
                       : nlohmann::json(nullptr);
  j["seed"] = forest.spec.seed;
  j["bootstrap"] = forest.spec.bootstrap;
  j["feature_count"] = forest.feature_count;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : forest.trees) {
    std::vector<int> feature, left, right, count;
    std::vector<double> threshold, value;
    for (const auto& node : tree.nodes()) {
      feature.push_back(node.feature);
      threshold.push_back(node.threshold);
      left.push_back(node.left);
      right.push_back(node.right);
      value.push_back(node.value);
      count.push_back(node.count);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"value", value},
                     {"count", count}});
  }
  j["trees"] = std::move(trees);
  return j;
}

RegressionForest ForestFromJson(const nlohmann::json& j) {
  RegressionForest forest;
  forest.spec.n_trees = j.at("n_trees").get<int>();
  forest.spec.mtry = j.at("mtry").get<int>();
  forest.spec.min_leaf = j.at("min_leaf").get<int>();
  if (!j.at("max_depth").is_null()) {
    forest.spec.max_depth = j.at("max_depth").get<int>();
  }
  forest.spec.seed = j.at("seed").get<uint64_t>();
  forest.spec.bootstrap = j.at("bootstrap").get<bool>();
  forest.feature_count = j.at("feature_count").get<int>();
  for (const auto& t : j.at("trees")) {
    const auto feature = t.at("feature").get<std::vector<int>>();
    const auto threshold = t.at("threshold").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<int>>();
    const auto right = t.at("right").get<std::vector<int>>();
    const auto value = t.at("value").get<std::vector<double>>();
    const auto count = t.at("count").get<std::vector<int>>();
    std::vector<TreeNode> nodes(feature.size());
    for (size_t i = 0; i < nodes.size(); ++i) {
      nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i],
                  count[i]};
      if (feature[i] >= forest.feature_count ||
          (feature[i] >= 0 &&
           (left[i] < 0 || right[i] < 0 ||
            static_cast<size_t>(std::max(left[i], right[i])) >=
                nodes.size()))) {
        throw ArgumentError("malformed tree in forest JSON");
      }
    }
    if (nodes.empty()) throw ArgumentError("empty tree in forest JSON");
    forest.trees.emplace_back(std::move(nodes));
  }
  return forest;
}

std::unique_ptr<FittedRegressor> ForestLearner::Fit(const Matrix& x,
                                                    const Vector& y,
                                                    uint64_t seed) const {
  ForestSpec spec = spec_;
  spec.seed = seed;
  return std::make_unique<FittedForest>(FitForest(x, y, spec));
}

size_t ForestLearner::MinimumSamples() const {
  return 2 * static_cast<size_t>(spec_.min_leaf);
}

std::unique_ptr<FittedRegressor> MeanLearner::Fit(const Matrix& x,
                                                  const Vector& y,
                                                  uint64_t seed) const {
  (void)x;
  (void)seed;
  if (y.size() == 0) throw ArgumentError("mean learner needs data");
  return std::make_unique<FittedConstant>(y.mean());
}

Vector CrossFitPredict(const Matrix& x, const Vector& target,
                       const FoldPlan& plan, const NuisanceLearner& learner,
                       uint64_t seed, std::span<const bool> train_mask) {
  const auto n = static_cast<size_t>(x.rows());
  if (plan.n() != n) throw ArgumentError("fold plan does not cover the data");
  if (static_cast<size_t>(target.size()) != n) {
    throw ArgumentError("cross-fit target length differs from row count");
  }
  if (!train_mask.empty() && train_mask.size() != n) {
    throw ArgumentError("train mask length differs from row count");
  }
  // Validate every fold before fitting anything.
  std::vector<std::vector<size_t>> train_rows(static_cast<size_t>(plan.k));
  for (int fold = 0; fold < plan.k; ++fold) {
    for (const size_t row : plan.Complement(fold)) {
      if (train_mask.empty() || train_mask[row]) {
        train_rows[static_cast<size_t>(fold)].push_back(row);
      }
    }
    if (train_rows[static_cast<size_t>(fold)].size() <
        learner.MinimumSamples()) {
      throw DegeneracyError(
          "fold " + std::to_string(fold) + ": complement has " +
          std::to_string(train_rows[static_cast<size_t>(fold)].size()) +
          " training rows, learner '" + learner.Name() + "' needs " +
          std::to_string(learner.MinimumSamples()));
    }
  }
  Vector out(static_cast<Eigen::Index>(n));
  ParallelFor(static_cast<size_t>(plan.k), [&](size_t fold) {
    const auto& rows = train_rows[fold];
    const auto model =
        learner.Fit(SubsetRows(x, rows), SubsetRows(target, rows),
                    DeriveSeed(seed, SeedStream::kNuisance, fold));
    const auto members = plan.Members(static_cast<int>(fold));
    const Vector pred = model->Predict(SubsetRows(x, members));
    for (size_t i = 0; i < members.size(); ++i) {
      out[static_cast<Eigen::Index>(members[i])] =
          pred[static_cast<Eigen::Index>(i)];
    }
  });
  return out;
}

Vector CrossFitPredict(const Dataset& d, const Vector& target,
                       const FoldPlan& plan, const NuisanceLearner& learner,
                       uint64_t seed) {
  return CrossFitPredict(d.x, target, plan, learner, seed);
}

}  // namespace dipw
