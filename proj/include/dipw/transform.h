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

// Pseudo-outcome arithmetic: IPW weights, the denoising projection, the
// optimal B*, and the AIPW transformation.

#ifndef DIPW_TRANSFORM_H_
#define DIPW_TRANSFORM_H_

#include <optional>
#include <utility>

#include "dipw/common.h"
#include "dipw/data.h"

namespace dipw {

struct PseudoOutcomeSet {
  Vector w;    // IPW weight per unit.
  Vector raw;  // y * w.
  std::optional<Vector> denoised;
  Vector b_hat;  // Clipped out-of-fold B(x) predictions (empty if unused).
  double alpha_w = 0.0;      // Coefficient on w.
  double alpha_bw = 0.0;     // Coefficient on b_hat * w.
  std::optional<FoldPlan> fold_plan;
  double r_squared = 0.0;
};

// Fit diagnostics for pseudo-outcome lasso models. Fields that a model kind
// cannot supply are left empty.
struct DenoisingDiagnostics {
  std::optional<double> sigma_e_hat;  // sd(raw - fitted CATE).
  std::optional<double> sigma_u_hat;  // sd(denoised - fitted CATE).
  std::optional<double> r_squared;
  std::optional<double> lambda_raw;
  std::optional<double> lambda_denoised;
};

// (t - p) / (p (1 - p)). Throws ArgumentError unless t is 0/1 and p in (0,1).
double IpwWeight(double t, double p);

// Fills w and raw; leaves denoised empty.
PseudoOutcomeSet IpwTransform(const Dataset& d);

// (1 - p) mu1 + p mu0. Throws ArgumentError unless p in (0, 1).
double BStar(double p, double mu1, double mu0);

// Least-squares projection of y*w on (w, b_hat*w), no intercept. b_hat is
// clipped to [min(y), max(y)] first. A zero response yields a zero
// projection with zero coefficients. R^2 = 1 - SSR / SST with centered SST,
// floored at 0, and defined as 0 when SST is 0. Throws DegeneracyError when
// the 2x2 Gram matrix is numerically singular.
PseudoOutcomeSet Denoise(const Dataset& d, const Vector& b_hat,
                         const FoldPlan& plan);

// T (Y - mu1) / p - (1 - T) (Y - mu0) / (1 - p) + mu1 - mu0, per unit.
Vector AipwTransform(const Dataset& d, const Vector& mu1_hat,
                     const Vector& mu0_hat);

struct PotentialOutcomes {
  Vector y0;
  Vector y1;
};

// Splits y*w into (y1 - y0) t w (signal) and y0 w (noise). Needs simulated
// potential outcomes; throws UnsupportedError without them.
std::pair<Vector, Vector> NoiseDecomposition(
    const Dataset& d, const std::optional<PotentialOutcomes>& outcomes);

// Sample standard deviation, n - 1 denominator. Zero for fewer than 2 values.
double SampleSd(const Vector& v);

}  // namespace dipw

#endif  // DIPW_TRANSFORM_H_
