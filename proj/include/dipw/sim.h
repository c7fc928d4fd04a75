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

// Simulation harness: the sparse-linear-CATE data-generating process with a
// strongly nonlinear baseline, and a seeded replication driver.
//
// Covariates: x1..x30 ~ Unif(0, 1), x31..x50 ~ N(0, 1), all independent.
//   b(x)   = m * { sin(pi x1 x2) + 2 (x3 - 0.5)^2 + x4 + 0.5 x5
//                  + 2 log(1 + exp(x31 + x32 + x33))
//                  + max(0, x31 + x32 + x33) + max(0, x34 + x35) }
//   tau(x) = 0.5 (x1 + x2) + x4 + x32 / 3 + 2 x40
//   T ~ Bernoulli(p),  Y = b(x) + T tau(x) + eps,  eps ~ N(0, noise_sd^2)
// with m = b_multiplier (default 5).
//
// Seeds: replicate r uses DeriveSeed(master, kReplicate, r). Within a
// replicate, the training sample draws from DeriveSeed(seed, kTrainSample)
// and the test sample from DeriveSeed(seed, kTestSample). Each row draws, in
// order, 30 uniforms, 20 normals, the treatment uniform, then the noise
// normal.

#ifndef DIPW_SIM_H_
#define DIPW_SIM_H_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dipw/common.h"
#include "dipw/data.h"
#include "dipw/estimators.h"
#include "dipw/transform.h"
#include "json.hpp"

namespace dipw {

inline constexpr int kDgpCovariates = 50;

struct DgpSpec {
  size_t n_train = 1000;
  size_t n_test = 10000;
  double p_treat = 0.5;
  double b_multiplier = 5.0;
  double noise_sd = 1.0;
  uint64_t seed = 0;
  bool null_effect = false;  // tau(x) replaced by 0.
};

void ValidateDgpSpec(const DgpSpec& spec);

struct SimulatedSample {
  Dataset data;
  Vector tau_true;
  Vector y0;
  Vector y1;

  PotentialOutcomes Outcomes() const { return {y0, y1}; }
};

double DgpBaseline(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                   double multiplier);
double DgpTau(const Eigen::Ref<const Eigen::RowVectorXd>& x);

SimulatedSample SampleDgp(const DgpSpec& spec, size_t n, uint64_t seed);

// (train, test).
std::pair<SimulatedSample, SimulatedSample> Generate(const DgpSpec& spec);
// Generate with tau forced to 0.
std::pair<SimulatedSample, SimulatedSample> NullDgp(DgpSpec spec);

struct MethodResult {
  std::string method;
  std::optional<std::string> error;
  double rmse = 0.0;
  double auuc = 0.0;
  double lambda = 0.0;  // 0 for the T-learner.
  std::optional<double> r_squared;
  std::optional<double> sigma_e;
  std::optional<double> sigma_u;
};

struct ReplicateResult {
  size_t replicate = 0;
  uint64_t seed = 0;
  std::vector<MethodResult> methods;
};

struct MetricSummary {
  size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
};

// Metric names: rmse, auuc, lambda, r_squared, sigma_e, sigma_u.
struct ReplicationReport {
  DgpSpec spec;
  std::vector<std::string> methods;
  uint64_t master_seed = 0;
  nlohmann::json estimator_config;
  std::vector<ReplicateResult> replicates;

  // Successful values of `metric` for `method`, in replicate order.
  std::vector<double> Values(const std::string& method,
                             const std::string& metric) const;
  MetricSummary Summary(const std::string& method,
                        const std::string& metric) const;
};

// Summary statistics with type-7 quartiles.
MetricSummary Summarize(std::vector<double> values);

// Fits every method on each replicate's training sample and evaluates on
// its test sample. A method failure is recorded on its cell and the run
// continues. Results do not depend on the thread count.
ReplicationReport RunReplications(const DgpSpec& spec,
                                  const std::vector<CateKind>& methods,
                                  size_t n_reps, uint64_t master_seed,
                                  const EstimatorConfig& base_config = {});

nlohmann::json ReportToJson(const ReplicationReport& report);
// Tidy long format: replicate,method,metric,value.
std::string ReportToCsv(const ReplicationReport& report);

}  // namespace dipw

#endif  // DIPW_SIM_H_
