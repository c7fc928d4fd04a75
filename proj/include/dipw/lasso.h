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

// l1-penalized least squares by cyclic coordinate descent.
//
// Objective, for design D (n x m), response r and intercept c:
//
//   (1 / 2n) * || r - c - D theta ||^2 + lambda * sum_{j penalized} |theta_j|
//
// The intercept and every unpenalized column are never shrunk. The
// intercept is profiled out by centering; the unpenalized columns form one
// block that is re-solved exactly (small Cholesky system) after every
// sweep over the penalized coordinates. Penalized coordinates use the usual
// soft-thresholding update. Every update is an exact minimization along its
// coordinate (or block), so the objective never increases between sweeps.

#ifndef DIPW_LASSO_H_
#define DIPW_LASSO_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "dipw/common.h"

namespace dipw {

enum class SelectionRule { kMinMse, kOneSe };

struct PenaltySpec {
  int grid_size = 100;
  double lambda_min_ratio = 1e-3;
  int cv_folds = 10;
  SelectionRule selection_rule = SelectionRule::kMinMse;
  double tolerance = 1e-7;
  int max_iterations = 100000;
  // Scale penalized columns to unit n-denominator variance before fitting
  // (coefficients are reported on the original scale).
  bool standardize = true;
};

void ValidatePenaltySpec(const PenaltySpec& spec);

struct PathPoint {
  double lambda = 0.0;
  Vector coef;
  double intercept = 0.0;
};

struct CvPoint {
  double lambda = 0.0;
  double mean_mse = 0.0;
  double se = 0.0;
};

struct SparseLinearFit {
  Vector coef;  // One entry per design column, original units.
  double intercept = 0.0;
  std::vector<bool> penalized;
  double lambda = 0.0;
  std::vector<PathPoint> path;  // Strictly decreasing lambda.
  std::vector<CvPoint> cv;      // Parallel to path when CV was run.
  bool converged = false;
  int iterations = 0;           // Coordinate-descent sweeps.
  // Penalized objective after each sweep; filled when requested.
  std::vector<double> objective_trace;

  Vector Penalized() const;    // Coefficients of penalized columns.
  Vector Unpenalized() const;  // Coefficients of unpenalized columns.
  Vector Predict(const Matrix& design) const;
};

struct LassoOptions {
  double tolerance = 1e-7;
  int max_iterations = 100000;
  bool record_objective = false;
};

// Solves at a single lambda. `warm_start`, when given, must have one entry
// per column. Throws ArgumentError on non-finite input or shape mismatch;
// non-convergence is reported through SparseLinearFit::converged.
SparseLinearFit FitLasso(const Matrix& design, const Vector& response,
                         const std::vector<bool>& penalized, double lambda,
                         const std::optional<Vector>& warm_start = std::nullopt,
                         const LassoOptions& options = {});

// Smallest lambda at which every penalized coefficient is zero: the largest
// |<D_j, r_perp>| / n over penalized j, where r_perp is the response
// residualized on the intercept and the unpenalized columns.
double LambdaMax(const Matrix& design, const Vector& response,
                 const std::vector<bool>& penalized);

// Geometric grid from LambdaMax down to lambda_min_ratio * LambdaMax.
// Throws ArgumentError when nothing is penalized and DegeneracyError when
// LambdaMax is zero.
std::vector<double> LambdaPath(const Matrix& design, const Vector& response,
                               const std::vector<bool>& penalized,
                               const PenaltySpec& spec);

// Warm-started fits along `lambdas` (in the given order).
std::vector<SparseLinearFit> FitLassoPath(const Matrix& design,
                                          const Vector& response,
                                          const std::vector<bool>& penalized,
                                          const std::vector<double>& lambdas,
                                          const LassoOptions& options = {});

// K-fold cross-validated lasso. Penalized columns are standardized (when
// spec.standardize), the grid is computed once on the full data, each fold
// fits the whole path on its complement, and the chosen lambda is refit on
// all rows. Ties in mean CV error go to the larger lambda.
SparseLinearFit CvLasso(const Matrix& design, const Vector& response,
                        const std::vector<bool>& penalized,
                        const PenaltySpec& spec, uint64_t seed);

// Fits the full path on (optionally standardized) data without CV and
// returns the solution at `lambda`, which must be one of the path values or
// any non-negative value (appended at the end of the warm-start chain).
SparseLinearFit FitLassoAtLambda(const Matrix& design, const Vector& response,
                                 const std::vector<bool>& penalized,
                                 const PenaltySpec& spec, double lambda);

// Penalized objective at (coef, intercept).
double LassoObjective(const Matrix& design, const Vector& response,
                      const std::vector<bool>& penalized, double lambda,
                      const Vector& coef, double intercept);

// Largest violation of the stationarity conditions: for penalized j with
// coef_j != 0, | g_j - lambda sign(coef_j) |; for coef_j == 0,
// max(0, |g_j| - lambda); for unpenalized j, |g_j|; where
// g_j = <D_j, r - c - D coef> / n.
double KktViolation(const Matrix& design, const Vector& response,
                    const std::vector<bool>& penalized, double lambda,
                    const Vector& coef, double intercept);

}  // namespace dipw

#endif  // DIPW_LASSO_H_
