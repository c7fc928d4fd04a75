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

#include "dipw/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "dipw/parallel.h"
#include "dipw/random.h"

namespace dipw {
namespace {

void CheckUpliftInputs(const Vector& scores, const Vector& y, const Vector& t) {
  if (scores.size() != y.size() || scores.size() != t.size()) {
    throw ArgumentError("scores, outcomes and treatments differ in length");
  }
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t[i] != 0.0 && t[i] != 1.0) {
      throw ArgumentError("treatment must be 0 or 1");
    }
  }
}

// Descending score order, ties by ascending index.
std::vector<size_t> RankOrder(const Vector& scores) {
  std::vector<size_t> order(static_cast<size_t>(scores.size()));
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[static_cast<Eigen::Index>(a)] >
           scores[static_cast<Eigen::Index>(b)];
  });
  return order;
}

// U(k) for k = 1..n given a ranking.
std::vector<double> CurveValues(const std::vector<size_t>& order,
                                const Vector& y, const Vector& t) {
  std::vector<double> u(order.size());
  double sum1 = 0.0, sum0 = 0.0;
  size_t n1 = 0, n0 = 0;
  for (size_t k = 0; k < order.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(order[k]);
    if (t[i] == 1.0) {
      sum1 += y[i];
      ++n1;
    } else {
      sum0 += y[i];
      ++n0;
    }
    u[k] = (n1 > 0 && n0 > 0)
               ? (sum1 / static_cast<double>(n1) -
                  sum0 / static_cast<double>(n0)) *
                     static_cast<double>(k + 1)
               : 0.0;
  }
  return u;
}

double Quantile(std::vector<double>& values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::string FormatReal(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

struct ArmStats {
  size_t n = 0;
  double mean = 0.0;
  double var = 0.0;  // n - 1 denominator; 0 when n < 2.
};

ArmStats Summarize(const std::vector<double>& values) {
  ArmStats s;
  s.n = values.size();
  if (s.n == 0) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    s.var = ss / static_cast<double>(s.n - 1);
  }
  return s;
}

}  // namespace

double Rmse(const Vector& predicted, const Vector& truth) {
  if (predicted.size() != truth.size()) {
    throw ArgumentError("prediction and truth differ in length");
  }
  if (predicted.size() == 0) throw ArgumentError("RMSE of an empty set");
  return std::sqrt((predicted - truth).squaredNorm() /
                   static_cast<double>(truth.size()));
}

double RmseCate(const CateModel& model, const Matrix& x_test,
                const Vector& tau_true) {
  return Rmse(PredictCate(model, x_test), tau_true);
}

UpliftCurve ComputeUpliftCurve(const Vector& scores, const Vector& y,
                               const Vector& t) {
  CheckUpliftInputs(scores, y, t);
  const double treated = t.sum();
  if (treated == 0.0 || treated == static_cast<double>(t.size())) {
    throw DegeneracyError(
        "uplift curve needs both treated and control units in the test set");
  }
  UpliftCurve curve;
  curve.u = CurveValues(RankOrder(scores), y, t);
  curve.auuc = std::accumulate(curve.u.begin(), curve.u.end(), 0.0);
  const double n = static_cast<double>(curve.u.size());
  const double ate = curve.u.back() / n;
  curve.baseline.resize(curve.u.size());
  for (size_t k = 0; k < curve.u.size(); ++k) {
    curve.baseline[k] = ate * static_cast<double>(k + 1);
  }
  return curve;
}

UpliftBand ComputeUpliftBand(const Vector& scores, const Vector& y,
                             const Vector& t, double level, int n_boot,
                             uint64_t seed) {
  CheckUpliftInputs(scores, y, t);
  if (!(level > 0.0 && level < 1.0)) {
    throw ArgumentError("band level must lie in (0, 1)");
  }
  if (n_boot < 2) throw ArgumentError("n_boot must be at least 2");
  const auto n = static_cast<size_t>(scores.size());
  if (n == 0) throw ArgumentError("uplift band of an empty set");
  constexpr int kMaxRedraws = 100;

  std::vector<std::vector<double>> draws(static_cast<size_t>(n_boot));
  ParallelFor(draws.size(), [&](size_t b) {
    Rng rng(DeriveSeed(seed, SeedStream::kBootstrap, b));
    Vector s(static_cast<Eigen::Index>(n)), yy(s.size()), tt(s.size());
    for (int attempt = 0;; ++attempt) {
      if (attempt > kMaxRedraws) {
        throw DegeneracyError(
            "bootstrap resample kept drawing a single treatment arm");
      }
      for (size_t i = 0; i < n; ++i) {
        const auto src = static_cast<Eigen::Index>(rng.UniformIndex(n));
        const auto dst = static_cast<Eigen::Index>(i);
        s[dst] = scores[src];
        yy[dst] = y[src];
        tt[dst] = t[src];
      }
      const double treated = tt.sum();
      if (treated > 0.0 && treated < static_cast<double>(n)) break;
    }
    draws[b] = CurveValues(RankOrder(s), yy, tt);
  });

  UpliftBand band;
  band.level = level;
  band.lower.resize(n);
  band.upper.resize(n);
  const double alpha = (1.0 - level) / 2.0;
  std::vector<double> column(draws.size());
  for (size_t k = 0; k < n; ++k) {
    for (size_t b = 0; b < draws.size(); ++b) column[b] = draws[b][k];
    band.lower[k] = Quantile(column, alpha);
    band.upper[k] = Quantile(column, 1.0 - alpha);
  }
  return band;
}

std::vector<AuucRow> AuucTable(
    const std::vector<std::pair<std::string, CateModel>>& models,
    const Dataset& test) {
  std::vector<AuucRow> rows;
  for (const auto& [name, model] : models) {
    const Vector scores = PredictCate(model, test.x);
    rows.push_back({name, ComputeUpliftCurve(scores, test.y, test.t).auuc});
  }
  std::sort(rows.begin(), rows.end(), [](const AuucRow& a, const AuucRow& b) {
    if (a.auuc != b.auuc) return a.auuc > b.auuc;
    return a.name < b.name;
  });
  return rows;
}

SubgroupReport SubgroupAte(const Dataset& test, const std::string& variable,
                           const Binning& binning) {
  const auto it = std::find(test.column_names.begin(),
                            test.column_names.end(), variable);
  if (it == test.column_names.end()) {
    throw SchemaError("subgroup variable '" + variable + "' not found");
  }
  const auto col = static_cast<Eigen::Index>(it - test.column_names.begin());
  const Vector values = test.x.col(col);
  const size_t n = test.n();

  // Bin index per unit plus per-bin label and range.
  std::vector<size_t> bin_of(n);
  SubgroupReport report;
  report.variable = variable;

  if (std::holds_alternative<LevelBins>(binning)) {
    std::map<double, size_t> levels;
    for (Eigen::Index i = 0; i < values.size(); ++i) levels[values[i]] = 0;
    size_t index = 0;
    for (auto& [level, slot] : levels) {
      slot = index++;
      SubgroupBin bin;
      bin.label = FormatReal(level);
      bin.lower = bin.upper = level;
      report.bins.push_back(bin);
    }
    for (size_t i = 0; i < n; ++i) {
      bin_of[i] = levels.at(values[static_cast<Eigen::Index>(i)]);
    }
  } else if (const auto* edges = std::get_if<EdgeBins>(&binning)) {
    const auto& e = edges->edges;
    if (e.size() < 2 || !std::is_sorted(e.begin(), e.end()) ||
        std::adjacent_find(e.begin(), e.end()) != e.end()) {
      throw ArgumentError("bin edges must be strictly increasing, >= 2 values");
    }
    for (size_t b = 0; b + 1 < e.size(); ++b) {
      SubgroupBin bin;
      const bool last = b + 2 == e.size();
      bin.label = "[" + FormatReal(e[b]) + ", " + FormatReal(e[b + 1]) +
                  (last ? "]" : ")");
      bin.lower = e[b];
      bin.upper = e[b + 1];
      report.bins.push_back(bin);
    }
    for (size_t i = 0; i < n; ++i) {
      const double v = values[static_cast<Eigen::Index>(i)];
      if (v < e.front() || v > e.back()) {
        throw ArgumentError("value " + FormatReal(v) +
                            " lies outside the bin edges");
      }
      const auto pos = std::upper_bound(e.begin(), e.end(), v) - e.begin();
      bin_of[i] = std::min(static_cast<size_t>(pos) - 1, e.size() - 2);
    }
  } else {
    const int count = std::get<QuantileBins>(binning).count;
    if (count < 1 || static_cast<size_t>(count) > n) {
      throw ArgumentError("quantile bin count must lie in [1, n]");
    }
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return values[static_cast<Eigen::Index>(a)] <
             values[static_cast<Eigen::Index>(b)];
    });
    const size_t base = n / static_cast<size_t>(count);
    const size_t extra = n % static_cast<size_t>(count);
    size_t pos = 0;
    for (size_t b = 0; b < static_cast<size_t>(count); ++b) {
      const size_t size = base + (b < extra ? 1 : 0);
      SubgroupBin bin;
      bin.label = "Q" + std::to_string(b + 1);
      bin.lower = values[static_cast<Eigen::Index>(order[pos])];
      bin.upper = values[static_cast<Eigen::Index>(order[pos + size - 1])];
      for (size_t r = pos; r < pos + size; ++r) bin_of[order[r]] = b;
      pos += size;
      report.bins.push_back(bin);
    }
  }

  std::vector<std::vector<double>> treated(report.bins.size());
  std::vector<std::vector<double>> control(report.bins.size());
  for (size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    (test.t[row] == 1.0 ? treated : control)[bin_of[i]].push_back(test.y[row]);
  }
  for (size_t b = 0; b < report.bins.size(); ++b) {
    const ArmStats s1 = Summarize(treated[b]);
    const ArmStats s0 = Summarize(control[b]);
    if (s1.n == 0 || s0.n == 0) {
      throw DegeneracyError("subgroup bin '" + report.bins[b].label +
                            "' lacks a treated or control unit");
    }
    auto& bin = report.bins[b];
    bin.n_treated = s1.n;
    bin.n_control = s0.n;
    bin.ate = s1.mean - s0.mean;
    bin.se = std::sqrt(s1.var / static_cast<double>(s1.n) +
                       s0.var / static_cast<double>(s0.n));
  }
  return report;
}

BudgetGain ComputeBudgetGain(const UpliftCurve& curve, size_t k) {
  const size_t n = curve.size();
  if (k < 1 || k > n) {
    throw ArgumentError("budget k must lie in [1, " + std::to_string(n) + "]");
  }
  BudgetGain gain;
  gain.k = k;
  gain.treated_gain = curve.u[k - 1];
  gain.random_gain =
      static_cast<double>(k) / static_cast<double>(n) * curve.u[n - 1];
  if (gain.random_gain != 0.0) {
    gain.improvement_ratio = gain.treated_gain / gain.random_gain;
  }
  return gain;
}

DenoisingDiagnostics DiagnosticsReport(const CateModel& model) {
  if (!model.IsLinear()) {
    throw UnsupportedError("t-learner models carry no denoising diagnostics");
  }
  return model.diagnostics;
}

std::string UpliftCurveCsv(const UpliftCurve& curve) {
  std::ostringstream out;
  out << "k,u,baseline";
  if (curve.band) out << ",lower,upper";
  out << '\n';
  for (size_t k = 0; k < curve.size(); ++k) {
    out << (k + 1) << ',' << FormatReal(curve.u[k]) << ','
        << FormatReal(curve.baseline[k]);
    if (curve.band) {
      out << ',' << FormatReal(curve.band->lower[k]) << ','
          << FormatReal(curve.band->upper[k]);
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json UpliftCurveJson(const UpliftCurve& curve) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["auuc"] = curve.auuc;
  j["u"] = curve.u;
  j["baseline"] = curve.baseline;
  if (curve.band) {
    j["band"] = {{"level", curve.band->level},
                 {"lower", curve.band->lower},
                 {"upper", curve.band->upper}};
  }
  return j;
}

}  // namespace dipw
