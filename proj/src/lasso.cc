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

#include "dipw/lasso.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "dipw/data.h"
#include "dipw/parallel.h"

namespace dipw {
namespace {

double SoftThreshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

void CheckInputs(const Matrix& design, const Vector& response,
                 const std::vector<bool>& penalized) {
  if (design.rows() < 1) throw ArgumentError("lasso needs at least one row");
  if (design.rows() != response.size()) {
    throw ArgumentError("design rows and response length differ");
  }
  if (static_cast<Eigen::Index>(penalized.size()) != design.cols()) {
    throw ArgumentError("penalized mask length differs from column count");
  }
  if (!design.allFinite() || !response.allFinite()) {
    throw ArgumentError("lasso inputs must be finite");
  }
}

struct SolveStats {
  bool converged = false;
  int iterations = 0;
};

// Coordinate descent state for one (design, response) pair. Columns and
// response are centered once; the residual is kept in sync with theta.
class Solver {
 public:
  Solver(const Matrix& design, const Vector& response,
         const std::vector<bool>& penalized)
      : n_(static_cast<double>(design.rows())),
        col_mean_(design.colwise().mean().transpose()),
        response_mean_(response.mean()),
        centered_(design.rowwise() - col_mean_.transpose()),
        centered_response_(response.array() - response_mean_),
        col_sq_(centered_.colwise().squaredNorm().transpose() / n_) {
    for (Eigen::Index j = 0; j < design.cols(); ++j) {
      if (col_sq_[j] <= 0.0) continue;  // Constant: coefficient stays 0.
      if (penalized[static_cast<size_t>(j)]) {
        penalized_.push_back(j);
      } else {
        unpenalized_.push_back(j);
      }
    }
    if (!unpenalized_.empty()) {
      block_.resize(design.rows(),
                    static_cast<Eigen::Index>(unpenalized_.size()));
      for (size_t k = 0; k < unpenalized_.size(); ++k) {
        block_.col(static_cast<Eigen::Index>(k)) =
            centered_.col(unpenalized_[k]);
      }
      const Matrix gram = block_.transpose() * block_ / n_;
      Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
      const double largest = eig.eigenvalues().maxCoeff();
      if (!(eig.eigenvalues().minCoeff() > 1e-12 * largest)) {
        throw ArgumentError("unpenalized columns are collinear");
      }
      block_llt_.compute(gram);
      block_scale_ = gram.diagonal().cwiseSqrt();
      block_residual_solver_ = block_llt_.solve(block_.transpose()) / n_;
    }
    // Response residualized on the unpenalized block.
    Vector r_perp = centered_response_;
    if (!unpenalized_.empty()) {
      r_perp -= block_ * (block_residual_solver_ * centered_response_);
    }
    lambda_max_ = 0.0;
    for (const auto j : penalized_) {
      lambda_max_ =
          std::max(lambda_max_, std::abs(centered_.col(j).dot(r_perp)) / n_);
    }
    null_block_coef_ = unpenalized_.empty()
                           ? Vector()
                           : Vector(block_residual_solver_ * centered_response_);
  }

  double lambda_max() const { return lambda_max_; }
  bool has_penalized() const { return !penalized_.empty(); }

  SolveStats Solve(double lambda, Vector& theta, const LassoOptions& options,
                   std::vector<double>* trace) {
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      if (col_sq_[j] <= 0.0) theta[j] = 0.0;
    }
    SolveStats stats;
    if (lambda >= lambda_max_) {
      // Closed form: every penalized coefficient is zero and the block is
      // the least-squares fit of the centered response.
      for (const auto j : penalized_) theta[j] = 0.0;
      for (size_t k = 0; k < unpenalized_.size(); ++k) {
        theta[unpenalized_[k]] = null_block_coef_[static_cast<Eigen::Index>(k)];
      }
      stats.converged = true;
      if (trace) trace->push_back(Objective(lambda, theta, Residual(theta)));
      return stats;
    }

    Vector residual = Residual(theta);
    std::vector<Eigen::Index> active;
    while (stats.iterations < options.max_iterations) {
      double change = Sweep(penalized_, lambda, theta, residual);
      ++stats.iterations;
      if (trace) trace->push_back(Objective(lambda, theta, residual));
      if (change < options.tolerance) {
        stats.converged = true;
        break;
      }
      // Iterate on the active set until it settles, then re-check with a
      // full sweep.
      while (stats.iterations < options.max_iterations) {
        active.clear();
        for (const auto j : penalized_) {
          if (theta[j] != 0.0) active.push_back(j);
        }
        change = Sweep(active, lambda, theta, residual);
        ++stats.iterations;
        if (trace) trace->push_back(Objective(lambda, theta, residual));
        if (change < options.tolerance) break;
      }
    }
    return stats;
  }

  double Intercept(const Vector& theta) const {
    return response_mean_ - col_mean_.dot(theta);
  }

 private:
  Vector Residual(const Vector& theta) const {
    return centered_response_ - centered_ * theta;
  }

  double Objective(double lambda, const Vector& theta,
                   const Vector& residual) const {
    double penalty = 0.0;
    for (const auto j : penalized_) penalty += std::abs(theta[j]);
    return 0.5 * residual.squaredNorm() / n_ + lambda * penalty;
  }

  // One pass over `coords`, then an exact solve of the unpenalized block.
  // Returns the largest coefficient move measured in column-sd units.
  double Sweep(const std::vector<Eigen::Index>& coords, double lambda,
               Vector& theta, Vector& residual) {
    double max_change = 0.0;
    for (const auto j : coords) {
      const double old = theta[j];
      const double grad =
          centered_.col(j).dot(residual) / n_ + col_sq_[j] * old;
      const double updated = SoftThreshold(grad, lambda) / col_sq_[j];
      if (updated != old) {
        residual.noalias() -= (updated - old) * centered_.col(j);
        theta[j] = updated;
        max_change =
            std::max(max_change, std::abs(updated - old) * std::sqrt(col_sq_[j]));
      }
    }
    if (!unpenalized_.empty()) {
      const Vector delta = block_residual_solver_ * residual;
      residual.noalias() -= block_ * delta;
      for (size_t k = 0; k < unpenalized_.size(); ++k) {
        const auto idx = static_cast<Eigen::Index>(k);
        theta[unpenalized_[k]] += delta[idx];
        max_change =
            std::max(max_change, std::abs(delta[idx]) * block_scale_[idx]);
      }
    }
    return max_change;
  }

  double n_;
  Vector col_mean_;
  double response_mean_;
  Matrix centered_;
  Vector centered_response_;
  Vector col_sq_;
  std::vector<Eigen::Index> penalized_;
  std::vector<Eigen::Index> unpenalized_;
  Matrix block_;
  Eigen::LLT<Matrix> block_llt_;
  Vector block_scale_;
  Matrix block_residual_solver_;  // (B'B)^{-1} B' for the centered block.
  Vector null_block_coef_;
  double lambda_max_ = 0.0;
};

// Scales penalized, non-constant columns; records what was done.
struct ScaledDesign {
  Matrix design;
  Vector mean;
  Vector sd;
};

ScaledDesign ScalePenalized(const Matrix& design,
                            const std::vector<bool>& penalized,
                            bool standardize) {
  ScaledDesign out{design, Vector::Zero(design.cols()),
                   Vector::Ones(design.cols())};
  if (!standardize) return out;
  const auto [_, record] = Standardize(design);
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    if (!penalized[static_cast<size_t>(j)] ||
        record.constant[static_cast<size_t>(j)]) {
      continue;
    }
    out.mean[j] = record.mean[j];
    out.sd[j] = record.sd[j];
    out.design.col(j) = (design.col(j).array() - out.mean[j]) / out.sd[j];
  }
  return out;
}

PathPoint Unscale(const ScaledDesign& scaled, double lambda,
                  const Vector& theta, double intercept) {
  PathPoint point;
  point.lambda = lambda;
  point.coef = theta.cwiseQuotient(scaled.sd);
  point.intercept = intercept - point.coef.dot(scaled.mean);
  return point;
}

}  // namespace

void ValidatePenaltySpec(const PenaltySpec& spec) {
  if (spec.grid_size < 2) throw ArgumentError("grid_size must be at least 2");
  if (!(spec.lambda_min_ratio > 0.0 && spec.lambda_min_ratio < 1.0)) {
    throw ArgumentError("lambda_min_ratio must lie in (0, 1)");
  }
  if (spec.cv_folds < 2) throw ArgumentError("cv_folds must be at least 2");
  if (!(spec.tolerance > 0.0)) throw ArgumentError("tolerance must be positive");
  if (spec.max_iterations < 1) {
    throw ArgumentError("max_iterations must be positive");
  }
}

Vector SparseLinearFit::Penalized() const {
  std::vector<double> values;
  for (size_t j = 0; j < penalized.size(); ++j) {
    if (penalized[j]) values.push_back(coef[static_cast<Eigen::Index>(j)]);
  }
  return Eigen::Map<Vector>(values.data(),
                            static_cast<Eigen::Index>(values.size()));
}

Vector SparseLinearFit::Unpenalized() const {
  std::vector<double> values;
  for (size_t j = 0; j < penalized.size(); ++j) {
    if (!penalized[j]) values.push_back(coef[static_cast<Eigen::Index>(j)]);
  }
  return Eigen::Map<Vector>(values.data(),
                            static_cast<Eigen::Index>(values.size()));
}

Vector SparseLinearFit::Predict(const Matrix& design) const {
  if (design.cols() != coef.size()) {
    throw ArgumentError("design width differs from coefficient count");
  }
  return (design * coef).array() + intercept;
}

SparseLinearFit FitLasso(const Matrix& design, const Vector& response,
                         const std::vector<bool>& penalized, double lambda,
                         const std::optional<Vector>& warm_start,
                         const LassoOptions& options) {
  CheckInputs(design, response, penalized);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ArgumentError("lambda must be a finite non-negative number");
  }
  Vector theta = Vector::Zero(design.cols());
  if (warm_start) {
    if (warm_start->size() != design.cols()) {
      throw ArgumentError("warm start length differs from column count");
    }
    theta = *warm_start;
  }
  Solver solver(design, response, penalized);
  SparseLinearFit fit;
  const auto stats = solver.Solve(
      lambda, theta, options,
      options.record_objective ? &fit.objective_trace : nullptr);
  fit.coef = theta;
  fit.intercept = solver.Intercept(theta);
  fit.penalized = penalized;
  fit.lambda = lambda;
  fit.converged = stats.converged;
  fit.iterations = stats.iterations;
  fit.path.push_back({lambda, theta, fit.intercept});
  return fit;
}

double LambdaMax(const Matrix& design, const Vector& response,
                 const std::vector<bool>& penalized) {
  CheckInputs(design, response, penalized);
  return Solver(design, response, penalized).lambda_max();
}

std::vector<double> LambdaPath(const Matrix& design, const Vector& response,
                               const std::vector<bool>& penalized,
                               const PenaltySpec& spec) {
  ValidatePenaltySpec(spec);
  if (std::none_of(penalized.begin(), penalized.end(),
                   [](bool b) { return b; })) {
    throw ArgumentError("lambda path needs at least one penalized column");
  }
  const double lambda_max = LambdaMax(design, response, penalized);
  if (!(lambda_max > 0.0)) {
    throw DegeneracyError(
        "lambda path is degenerate: response is orthogonal to every "
        "penalized column");
  }
  std::vector<double> grid(static_cast<size_t>(spec.grid_size));
  const double log_ratio = std::log(spec.lambda_min_ratio);
  for (int i = 0; i < spec.grid_size; ++i) {
    grid[static_cast<size_t>(i)] =
        lambda_max *
        std::exp(log_ratio * static_cast<double>(i) / (spec.grid_size - 1));
  }
  grid.front() = lambda_max;
  return grid;
}

std::vector<SparseLinearFit> FitLassoPath(const Matrix& design,
                                          const Vector& response,
                                          const std::vector<bool>& penalized,
                                          const std::vector<double>& lambdas,
                                          const LassoOptions& options) {
  CheckInputs(design, response, penalized);
  Solver solver(design, response, penalized);
  Vector theta = Vector::Zero(design.cols());
  std::vector<SparseLinearFit> fits;
  fits.reserve(lambdas.size());
  for (const double lambda : lambdas) {
    SparseLinearFit fit;
    const auto stats = solver.Solve(
        lambda, theta, options,
        options.record_objective ? &fit.objective_trace : nullptr);
    fit.coef = theta;
    fit.intercept = solver.Intercept(theta);
    fit.penalized = penalized;
    fit.lambda = lambda;
    fit.converged = stats.converged;
    fit.iterations = stats.iterations;
    fits.push_back(std::move(fit));
  }
  return fits;
}

SparseLinearFit CvLasso(const Matrix& design, const Vector& response,
                        const std::vector<bool>& penalized,
                        const PenaltySpec& spec, uint64_t seed) {
  CheckInputs(design, response, penalized);
  ValidatePenaltySpec(spec);
  const auto n = static_cast<size_t>(design.rows());
  if (n < static_cast<size_t>(spec.cv_folds)) {
    throw ArgumentError("fewer rows than cross-validation folds");
  }
  const ScaledDesign scaled =
      ScalePenalized(design, penalized, spec.standardize);
  const auto lambdas = LambdaPath(scaled.design, response, penalized, spec);
  const LassoOptions options{spec.tolerance, spec.max_iterations, false};

  const FoldPlan plan = MakeFolds(n, spec.cv_folds, seed);
  const size_t grid = lambdas.size();
  std::vector<std::vector<double>> fold_mse(
      static_cast<size_t>(spec.cv_folds), std::vector<double>(grid));
  ParallelFor(static_cast<size_t>(spec.cv_folds), [&](size_t fold) {
    const auto train = plan.Complement(static_cast<int>(fold));
    const auto holdout = plan.Members(static_cast<int>(fold));
    const Matrix train_x = SubsetRows(scaled.design, train);
    const Vector train_y = SubsetRows(response, train);
    const Matrix hold_x = SubsetRows(scaled.design, holdout);
    const Vector hold_y = SubsetRows(response, holdout);
    const auto fits =
        FitLassoPath(train_x, train_y, penalized, lambdas, options);
    for (size_t l = 0; l < grid; ++l) {
      const Vector pred = (hold_x * fits[l].coef).array() + fits[l].intercept;
      fold_mse[fold][l] = (hold_y - pred).squaredNorm() /
                          static_cast<double>(holdout.size());
    }
  });

  SparseLinearFit result;
  result.cv.resize(grid);
  const double k = static_cast<double>(spec.cv_folds);
  for (size_t l = 0; l < grid; ++l) {
    double mean = 0.0;
    for (const auto& row : fold_mse) mean += row[l];
    mean /= k;
    double ss = 0.0;
    for (const auto& row : fold_mse) ss += (row[l] - mean) * (row[l] - mean);
    result.cv[l] = {lambdas[l], mean, std::sqrt(ss / (k - 1.0) / k)};
  }

  // Lambdas are decreasing, so a strict comparison keeps the larger lambda
  // on ties.
  size_t best = 0;
  for (size_t l = 1; l < grid; ++l) {
    if (result.cv[l].mean_mse < result.cv[best].mean_mse) best = l;
  }
  size_t chosen = best;
  if (spec.selection_rule == SelectionRule::kOneSe) {
    const double limit = result.cv[best].mean_mse + result.cv[best].se;
    for (size_t l = 0; l <= best; ++l) {
      if (result.cv[l].mean_mse <= limit) {
        chosen = l;
        break;
      }
    }
  }

  const auto full = FitLassoPath(scaled.design, response, penalized, lambdas,
                                 options);
  result.path.reserve(grid);
  for (const auto& fit : full) {
    result.path.push_back(Unscale(scaled, fit.lambda, fit.coef, fit.intercept));
  }
  result.penalized = penalized;
  result.lambda = lambdas[chosen];
  result.coef = result.path[chosen].coef;
  result.intercept = result.path[chosen].intercept;
  result.converged = full[chosen].converged;
  result.iterations = full[chosen].iterations;
  return result;
}

SparseLinearFit FitLassoAtLambda(const Matrix& design, const Vector& response,
                                 const std::vector<bool>& penalized,
                                 const PenaltySpec& spec, double lambda) {
  CheckInputs(design, response, penalized);
  const ScaledDesign scaled =
      ScalePenalized(design, penalized, spec.standardize);
  std::vector<double> lambdas;
  for (const double l : LambdaPath(scaled.design, response, penalized, spec)) {
    if (l > lambda) lambdas.push_back(l);
  }
  lambdas.push_back(lambda);
  const LassoOptions options{spec.tolerance, spec.max_iterations, false};
  const auto fits =
      FitLassoPath(scaled.design, response, penalized, lambdas, options);
  SparseLinearFit result;
  for (const auto& fit : fits) {
    result.path.push_back(Unscale(scaled, fit.lambda, fit.coef, fit.intercept));
  }
  result.penalized = penalized;
  result.lambda = lambda;
  result.coef = result.path.back().coef;
  result.intercept = result.path.back().intercept;
  result.converged = fits.back().converged;
  result.iterations = fits.back().iterations;
  return result;
}

double LassoObjective(const Matrix& design, const Vector& response,
                      const std::vector<bool>& penalized, double lambda,
                      const Vector& coef, double intercept) {
  const Vector residual =
      response - (design * coef).array().matrix() -
      Vector::Constant(response.size(), intercept);
  double penalty = 0.0;
  for (size_t j = 0; j < penalized.size(); ++j) {
    if (penalized[j]) penalty += std::abs(coef[static_cast<Eigen::Index>(j)]);
  }
  return 0.5 * residual.squaredNorm() / static_cast<double>(response.size()) +
         lambda * penalty;
}

double KktViolation(const Matrix& design, const Vector& response,
                    const std::vector<bool>& penalized, double lambda,
                    const Vector& coef, double intercept) {
  const double n = static_cast<double>(response.size());
  const Vector residual =
      (response - design * coef).array() - intercept;
  double worst = std::abs(residual.sum()) / n;
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    const double grad = design.col(j).dot(residual) / n;
    double violation = 0.0;
    if (!penalized[static_cast<size_t>(j)]) {
      violation = std::abs(grad);
    } else if (coef[j] != 0.0) {
      violation = std::abs(grad - lambda * (coef[j] > 0.0 ? 1.0 : -1.0));
    } else {
      violation = std::max(0.0, std::abs(grad) - lambda);
    }
    worst = std::max(worst, violation);
  }
  return worst;
}

}  // namespace dipw
