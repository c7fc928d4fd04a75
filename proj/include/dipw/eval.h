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

// Model evaluation: RMSE against known effects, uplift curves and AUUC,
// bootstrap bands, subgroup treatment effects, and budgeted targeting.

#ifndef DIPW_EVAL_H_
#define DIPW_EVAL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dipw/common.h"
#include "dipw/data.h"
#include "dipw/estimators.h"
#include "json.hpp"

namespace dipw {

double Rmse(const Vector& predicted, const Vector& truth);
double RmseCate(const CateModel& model, const Matrix& x_test,
                const Vector& tau_true);

struct UpliftBand {
  double level = 0.95;
  std::vector<double> lower;
  std::vector<double> upper;
};

struct UpliftCurve {
  std::vector<double> u;         // u[k - 1] = U(k), k = 1..n.
  double auuc = 0.0;             // Sum of u.
  std::vector<double> baseline;  // k * (full-sample difference in means).
  std::optional<UpliftBand> band;
  uint64_t ordering_seed = 0;    // Ties are broken by index; no randomness.

  size_t size() const { return u.size(); }
};

// Units ranked by score descending, ties by ascending index. U(k) is the
// top-k difference in means times k, or 0 while either arm is absent from
// the top k. Throws ArgumentError on length mismatch or non-binary t, and
// DegeneracyError when the set has no treated or no control unit.
UpliftCurve ComputeUpliftCurve(const Vector& scores, const Vector& y,
                               const Vector& t);

// Percentile bootstrap band over resampled (score, y, t) triples. Each
// resample is drawn from DeriveSeed(seed, kBootstrap, b); a resample with a
// single arm is redrawn up to 100 times, then DegeneracyError.
UpliftBand ComputeUpliftBand(const Vector& scores, const Vector& y,
                             const Vector& t, double level, int n_boot,
                             uint64_t seed);

struct AuucRow {
  std::string name;
  double auuc = 0.0;
};

// Sorted by AUUC descending, then name ascending.
std::vector<AuucRow> AuucTable(
    const std::vector<std::pair<std::string, CateModel>>& models,
    const Dataset& test);

struct SubgroupBin {
  std::string label;
  double lower = 0.0;  // Smallest value in the bin (edges) or the level.
  double upper = 0.0;
  size_t n_treated = 0;
  size_t n_control = 0;
  double ate = 0.0;
  double se = 0.0;
};

struct SubgroupReport {
  std::string variable;
  std::vector<SubgroupBin> bins;
};

// Binning for SubgroupAte.
struct LevelBins {};                  // One bin per distinct value.
struct EdgeBins {                     // [e_i, e_{i+1}); last bin closed.
  std::vector<double> edges;
};
struct QuantileBins {                 // Equal-count bins by rank.
  int count = 4;
};
using Binning = std::variant<LevelBins, EdgeBins, QuantileBins>;

// Difference in means per bin with SE sqrt(s1^2/n1 + s0^2/n0). Throws
// DegeneracyError naming any bin that lacks an arm.
SubgroupReport SubgroupAte(const Dataset& test, const std::string& variable,
                           const Binning& binning);

struct BudgetGain {
  size_t k = 0;
  double treated_gain = 0.0;
  double random_gain = 0.0;
  std::optional<double> improvement_ratio;  // Empty when random_gain == 0.
};

BudgetGain ComputeBudgetGain(const UpliftCurve& curve, size_t k);

// Recorded diagnostics; throws UnsupportedError for the T-learner.
DenoisingDiagnostics DiagnosticsReport(const CateModel& model);

// Columns k, u, baseline and, when a band is present, lower, upper.
std::string UpliftCurveCsv(const UpliftCurve& curve);
nlohmann::json UpliftCurveJson(const UpliftCurve& curve);

}  // namespace dipw

#endif  // DIPW_EVAL_H_
