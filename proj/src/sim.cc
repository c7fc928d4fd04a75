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

#include "dipw/sim.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "dipw/eval.h"
#include "dipw/parallel.h"
#include "dipw/random.h"

namespace dipw {
namespace {

double Softplus(double s) {
  return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

std::string FormatReal(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

nlohmann::json OptionalJson(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> MetricValue(const MethodResult& r,
                                  const std::string& metric) {
  if (r.error) return std::nullopt;
  if (metric == "rmse") return r.rmse;
  if (metric == "auuc") return r.auuc;
  if (metric == "lambda") return r.lambda;
  if (metric == "r_squared") return r.r_squared;
  if (metric == "sigma_e") return r.sigma_e;
  if (metric == "sigma_u") return r.sigma_u;
  throw ArgumentError("unknown metric '" + metric + "'");
}

MethodResult EvaluateMethod(CateKind kind, const SimulatedSample& train,
                            const SimulatedSample& test,
                            const EstimatorConfig& cfg) {
  MethodResult result;
  result.method = KindName(kind);
  try {
    const CateModel model = FitCate(kind, train.data, cfg);
    const Vector scores = PredictCate(model, test.data.x);
    result.rmse = Rmse(scores, test.tau_true);
    result.auuc = ComputeUpliftCurve(scores, test.data.y, test.data.t).auuc;
    result.lambda = model.IsLinear() ? model.lambda : 0.0;
    result.r_squared = model.diagnostics.r_squared;
    result.sigma_e = model.diagnostics.sigma_e_hat;
    result.sigma_u = model.diagnostics.sigma_u_hat;
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  return result;
}

}  // namespace

void ValidateDgpSpec(const DgpSpec& spec) {
  if (spec.n_train < 1 || spec.n_test < 1) {
    throw ArgumentError("sample sizes must be at least 1");
  }
  if (!(spec.p_treat > 0.0 && spec.p_treat < 1.0)) {
    throw ArgumentError("p_treat must lie in (0, 1)");
  }
  if (!std::isfinite(spec.b_multiplier)) {
    throw ArgumentError("b_multiplier must be finite");
  }
  if (!(spec.noise_sd >= 0.0) || !std::isfinite(spec.noise_sd)) {
    throw ArgumentError("noise_sd must be finite and non-negative");
  }
}

double DgpBaseline(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                   double multiplier) {
  const double s = x[30] + x[31] + x[32];
  const double inner = std::sin(std::numbers::pi * x[0] * x[1]) +
                       2.0 * (x[2] - 0.5) * (x[2] - 0.5) + x[3] + 0.5 * x[4] +
                       2.0 * Softplus(s) + std::max(0.0, s) +
                       std::max(0.0, x[33] + x[34]);
  return multiplier * inner;
}

double DgpTau(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return 0.5 * (x[0] + x[1]) + x[3] + x[31] / 3.0 + 2.0 * x[39];
}

SimulatedSample SampleDgp(const DgpSpec& spec, size_t n, uint64_t seed) {
  ValidateDgpSpec(spec);
  Rng rng(seed);
  const auto rows = static_cast<Eigen::Index>(n);
  SimulatedSample s;
  auto& d = s.data;
  d.x.resize(rows, kDgpCovariates);
  d.y.resize(rows);
  d.t.resize(rows);
  d.propensity = Vector::Constant(rows, spec.p_treat);
  s.tau_true.resize(rows);
  s.y0.resize(rows);
  s.y1.resize(rows);
  for (int j = 0; j < kDgpCovariates; ++j) {
    d.column_names.push_back("x" + std::to_string(j + 1));
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (int j = 0; j < 30; ++j) d.x(i, j) = rng.Uniform();
    for (int j = 30; j < kDgpCovariates; ++j) d.x(i, j) = rng.Normal();
    d.t[i] = rng.Bernoulli(spec.p_treat) ? 1.0 : 0.0;
    const double noise = spec.noise_sd * rng.Normal();
    const double tau = spec.null_effect ? 0.0 : DgpTau(d.x.row(i));
    const double base = DgpBaseline(d.x.row(i), spec.b_multiplier);
    s.tau_true[i] = tau;
    s.y0[i] = base + noise;
    s.y1[i] = base + tau + noise;
    d.y[i] = d.t[i] == 1.0 ? s.y1[i] : s.y0[i];
  }
  return s;
}

std::pair<SimulatedSample, SimulatedSample> Generate(const DgpSpec& spec) {
  return {SampleDgp(spec, spec.n_train,
                    DeriveSeed(spec.seed, SeedStream::kTrainSample)),
          SampleDgp(spec, spec.n_test,
                    DeriveSeed(spec.seed, SeedStream::kTestSample))};
}

std::pair<SimulatedSample, SimulatedSample> NullDgp(DgpSpec spec) {
  spec.null_effect = true;
  return Generate(spec);
}

MetricSummary Summarize(std::vector<double> values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) *
                            (values[hi] - values[lo]);
  };
  double total = 0.0;
  for (const double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  s.median = quantile(0.5);
  s.q1 = quantile(0.25);
  s.q3 = quantile(0.75);
  s.iqr = s.q3 - s.q1;
  return s;
}

std::vector<double> ReplicationReport::Values(const std::string& method,
                                              const std::string& metric) const {
  std::vector<double> values;
  for (const auto& rep : replicates) {
    for (const auto& cell : rep.methods) {
      if (cell.method != method) continue;
      if (const auto v = MetricValue(cell, metric)) values.push_back(*v);
    }
  }
  return values;
}

MetricSummary ReplicationReport::Summary(const std::string& method,
                                         const std::string& metric) const {
  return Summarize(Values(method, metric));
}

ReplicationReport RunReplications(const DgpSpec& spec,
                                  const std::vector<CateKind>& methods,
                                  size_t n_reps, uint64_t master_seed,
                                  const EstimatorConfig& base_config) {
  ValidateDgpSpec(spec);
  ValidateEstimatorConfig(base_config);
  if (n_reps < 1) throw ArgumentError("n_reps must be at least 1");
  if (methods.empty()) throw ArgumentError("no methods requested");

  ReplicationReport report;
  report.spec = spec;
  report.master_seed = master_seed;
  report.estimator_config = EstimatorConfigToJson(base_config);
  for (const auto kind : methods) report.methods.push_back(KindName(kind));
  report.replicates.resize(n_reps);

  ParallelFor(n_reps, [&](size_t r) {
    ReplicateResult& rep = report.replicates[r];
    rep.replicate = r;
    rep.seed = DeriveSeed(master_seed, SeedStream::kReplicate, r);
    DgpSpec rep_spec = spec;
    rep_spec.seed = rep.seed;
    const auto [train, test] = Generate(rep_spec);
    EstimatorConfig cfg = base_config;
    cfg.seed = DeriveSeed(rep.seed, SeedStream::kEstimator);
    for (const auto kind : methods) {
      rep.methods.push_back(EvaluateMethod(kind, train, test, cfg));
    }
  });
  return report;
}

nlohmann::json ReportToJson(const ReplicationReport& report) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["dgp"] = {{"n_train", report.spec.n_train},
              {"n_test", report.spec.n_test},
              {"p_treat", report.spec.p_treat},
              {"b_multiplier", report.spec.b_multiplier},
              {"noise_sd", report.spec.noise_sd},
              {"null_effect", report.spec.null_effect}};
  j["master_seed"] = report.master_seed;
  j["n_reps"] = report.replicates.size();
  j["methods"] = report.methods;
  j["estimator_config"] = report.estimator_config;
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& rep : report.replicates) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : rep.methods) {
      nlohmann::json c = {{"method", cell.method}};
      if (cell.error) {
        c["error"] = *cell.error;
      } else {
        c["rmse"] = cell.rmse;
        c["auuc"] = cell.auuc;
        c["lambda"] = cell.lambda;
        c["r_squared"] = OptionalJson(cell.r_squared);
        c["sigma_e"] = OptionalJson(cell.sigma_e);
        c["sigma_u"] = OptionalJson(cell.sigma_u);
      }
      cells.push_back(std::move(c));
    }
    reps.push_back(
        {{"replicate", rep.replicate}, {"seed", rep.seed}, {"methods", cells}});
  }
  j["replicates"] = std::move(reps);
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& method : report.methods) {
    for (const char* metric : {"rmse", "auuc", "lambda", "r_squared",
                               "sigma_e", "sigma_u"}) {
      const auto s = report.Summary(method, metric);
      if (s.count == 0) continue;
      summary[method][metric] = {{"count", s.count}, {"mean", s.mean},
                                 {"median", s.median}, {"q1", s.q1},
                                 {"q3", s.q3},       {"iqr", s.iqr}};
    }
  }
  j["summary"] = std::move(summary);
  return j;
}

std::string ReportToCsv(const ReplicationReport& report) {
  std::ostringstream out;
  out << "replicate,method,metric,value\n";
  for (const auto& rep : report.replicates) {
    for (const auto& cell : rep.methods) {
      const std::string prefix =
          std::to_string(rep.replicate) + "," + cell.method + ",";
      if (cell.error) {
        std::string message = *cell.error;
        std::replace(message.begin(), message.end(), '"', '\'');
        out << prefix << "error,\"" << message << "\"\n";
        continue;
      }
      for (const char* metric : {"rmse", "auuc", "lambda", "r_squared",
                                 "sigma_e", "sigma_u"}) {
        if (const auto v = MetricValue(cell, metric)) {
          out << prefix << metric << ',' << FormatReal(*v) << '\n';
        }
      }
    }
  }
  return out.str();
}

}  // namespace dipw
