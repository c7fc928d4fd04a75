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

#include <algorithm>
#include <cmath>

namespace dipw {

double IpwWeight(double t, double p) {
  if (t != 0.0 && t != 1.0) throw ArgumentError("treatment must be 0 or 1");
  if (!(p > 0.0 && p < 1.0)) {
    throw ArgumentError("propensity must lie strictly inside (0, 1)");
  }
  return t == 1.0 ? 1.0 / p : -1.0 / (1.0 - p);
}

PseudoOutcomeSet IpwTransform(const Dataset& d) {
  PseudoOutcomeSet out;
  const auto n = static_cast<Eigen::Index>(d.n());
  out.w.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.w[i] = IpwWeight(d.t[i], d.propensity[i]);
  }
  out.raw = d.y.cwiseProduct(out.w);
  return out;
}

double BStar(double p, double mu1, double mu0) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ArgumentError("propensity must lie strictly inside (0, 1)");
  }
  return (1.0 - p) * mu1 + p * mu0;
}

PseudoOutcomeSet Denoise(const Dataset& d, const Vector& b_hat,
                         const FoldPlan& plan) {
  if (b_hat.size() != static_cast<Eigen::Index>(d.n())) {
    throw ArgumentError("b_hat length differs from sample size");
  }
  if (plan.n() != d.n()) throw ArgumentError("fold plan does not cover data");
  PseudoOutcomeSet out = IpwTransform(d);
  const double lo = d.y.minCoeff();
  const double hi = d.y.maxCoeff();
  out.b_hat = b_hat.cwiseMax(lo).cwiseMin(hi);
  out.fold_plan = plan;

  const Vector bw = out.b_hat.cwiseProduct(out.w);
  const double g11 = out.w.squaredNorm();
  const double g12 = out.w.dot(bw);
  const double g22 = bw.squaredNorm();
  const double det = g11 * g22 - g12 * g12;
  if (out.raw.isZero(0.0)) {
    // A zero response projects to zero on any regressors.
    out.denoised = Vector::Zero(out.raw.size());
    out.r_squared = 0.0;
    return out;
  }
  if (!(g11 > 0.0 && g22 > 0.0) || !(det > 1e-10 * g11 * g22)) {
    throw DegeneracyError(
        "denoising regressors (w, b_hat * w) are collinear; B(x) must vary "
        "across units (choose a different B)");
  }
  const double c1 = out.w.dot(out.raw);
  const double c2 = bw.dot(out.raw);
  out.alpha_w = (g22 * c1 - g12 * c2) / det;
  out.alpha_bw = (g11 * c2 - g12 * c1) / det;
  out.denoised = out.raw - out.alpha_w * out.w - out.alpha_bw * bw;

  const double mean = out.raw.mean();
  const double sst = (out.raw.array() - mean).square().sum();
  const double ssr = out.denoised->squaredNorm();
  out.r_squared = sst > 0.0 ? std::clamp(1.0 - ssr / sst, 0.0, 1.0) : 0.0;
  return out;
}

Vector AipwTransform(const Dataset& d, const Vector& mu1_hat,
                     const Vector& mu0_hat) {
  const auto n = static_cast<Eigen::Index>(d.n());
  if (mu1_hat.size() != n || mu0_hat.size() != n) {
    throw ArgumentError("outcome-model predictions differ in length from data");
  }
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = d.propensity[i];
    const double t = d.t[i];
    out[i] = t * (d.y[i] - mu1_hat[i]) / p -
             (1.0 - t) * (d.y[i] - mu0_hat[i]) / (1.0 - p) + mu1_hat[i] -
             mu0_hat[i];
  }
  return out;
}

std::pair<Vector, Vector> NoiseDecomposition(
    const Dataset& d, const std::optional<PotentialOutcomes>& outcomes) {
  if (!outcomes) {
    throw UnsupportedError(
        "noise decomposition needs potential outcomes (simulation mode)");
  }
  const auto n = static_cast<Eigen::Index>(d.n());
  if (outcomes->y0.size() != n || outcomes->y1.size() != n) {
    throw ArgumentError("potential outcomes differ in length from data");
  }
  const PseudoOutcomeSet ipw = IpwTransform(d);
  Vector signal =
      (outcomes->y1 - outcomes->y0).cwiseProduct(d.t).cwiseProduct(ipw.w);
  Vector noise = outcomes->y0.cwiseProduct(ipw.w);
  return {std::move(signal), std::move(noise)};
}

double SampleSd(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() /
                   static_cast<double>(v.size() - 1));
}

}  // namespace dipw
