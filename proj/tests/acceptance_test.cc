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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dipw/common.h"
#include "dipw/data.h"
#include "dipw/estimators.h"
#include "dipw/lasso.h"
#include "dipw/parallel.h"
#include "dipw/random.h"
#include "dipw/sim.h"
#include "dipw/transform.h"

namespace dipw {
namespace {

constexpr size_t kReplicates = 50;
constexpr uint64_t kMasterSeed = 20240501;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, value);
  return buf;
}

bool Within(double v, double lo, double hi) { return v >= lo && v <= hi; }

const std::vector<CateKind> kMethods = {CateKind::kDipwAlgo1, CateKind::kIpw,
                                        CateKind::kDr, CateKind::kTLearner};

struct Studies {
  ReplicationReport balanced;    // p = 0.5
  ReplicationReport unbalanced;  // p = 0.2
  double balanced_seconds = 0.0;
};

ReplicationReport Study(double p_treat, double* seconds) {
  DgpSpec spec;
  spec.p_treat = p_treat;
  const auto start = std::chrono::steady_clock::now();
  auto report = RunReplications(spec, kMethods, kReplicates, kMasterSeed);
  *seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                           start)
                 .count();
  return report;
}

double Mean(const ReplicationReport& r, const std::string& method,
            const std::string& metric) {
  return r.Summary(method, metric).mean;
}

std::string FailedCells(const ReplicationReport& r) {
  size_t failed = 0;
  for (const auto& rep : r.replicates) {
    for (const auto& cell : rep.methods) failed += cell.error.has_value();
  }
  return failed == 0 ? "" : "; " + std::to_string(failed) + " failed cells";
}

Outcome Criterion1(const Studies& s) {
  const auto& r = s.balanced;
  const double dipw = Mean(r, "dipw-algo1", "rmse");
  const double ipw = Mean(r, "ipw", "rmse");
  const double dr = Mean(r, "dr", "rmse");
  const double t = Mean(r, "t-learner", "rmse");
  const bool bands = Within(dipw, 0.6, 1.2) && Within(ipw, 2.0, 3.6) &&
                     Within(dr, 0.9, 1.5) && Within(t, 2.0, 3.2);
  const bool order = dipw < dr && dr < t && dr < ipw;
  return {bands && order,
          "mean RMSE dipw " + Fmt("%.3f", dipw) + " [0.6,1.2], ipw " +
              Fmt("%.3f", ipw) + " [2.0,3.6], dr " + Fmt("%.3f", dr) +
              " [0.9,1.5], t " + Fmt("%.3f", t) + " [2.0,3.2]; ordering " +
              (order ? "holds" : "violated") + "; " +
              Fmt("%.0f", s.balanced_seconds) + " s" + FailedCells(r)};
}

Outcome Criterion2(const Studies& s) {
  const auto& r = s.unbalanced;
  const double dipw = Mean(r, "dipw-algo1", "rmse");
  const double ipw = Mean(r, "ipw", "rmse");
  const double dr = Mean(r, "dr", "rmse");
  const double dr_balanced = Mean(s.balanced, "dr", "rmse");
  return {Within(dipw, 0.75, 1.5) && ipw > 2.0 && dr > dr_balanced,
          "p=0.2 mean RMSE dipw " + Fmt("%.3f", dipw) + " [0.75,1.5], ipw " +
              Fmt("%.3f", ipw) + " (>2.0), dr " + Fmt("%.3f", dr) +
              " vs " + Fmt("%.3f", dr_balanced) + " at p=0.5" +
              FailedCells(r)};
}

Outcome Criterion3(const Studies& s) {
  const double ratio = Mean(s.balanced, "ipw", "rmse") /
                       Mean(s.balanced, "dipw-algo1", "rmse");
  return {ratio >= 2.5, "RMSE ratio ipw/dipw " + Fmt("%.3f", ratio) + " (>= 2.5)"};
}

Outcome Criterion4(const Studies& s) {
  bool pass = true;
  std::string detail;
  for (const auto* r : {&s.balanced, &s.unbalanced}) {
    const auto d = r->Summary("dipw-algo1", "lambda");
    const auto i = r->Summary("ipw", "lambda");
    pass = pass && d.median < i.median && d.iqr < i.iqr;
    detail += "p=" + Fmt("%.1f", r->spec.p_treat) + ": median " +
              Fmt("%.4g", d.median) + " vs " + Fmt("%.4g", i.median) +
              ", IQR " + Fmt("%.4g", d.iqr) + " vs " + Fmt("%.4g", i.iqr) +
              "; ";
  }
  return {pass, detail + "(dipw vs ipw)"};
}

Outcome Criterion5(const Studies& s) {
  const auto& r = s.balanced;
  const double mean = Mean(r, "dipw-algo1", "auuc");
  const double target = 1.048e8;
  size_t wins = 0, paired = 0;
  for (const auto& rep : r.replicates) {
    const MethodResult* d = nullptr;
    const MethodResult* i = nullptr;
    for (const auto& cell : rep.methods) {
      if (cell.error) continue;
      if (cell.method == "dipw-algo1") d = &cell;
      if (cell.method == "ipw") i = &cell;
    }
    if (d == nullptr || i == nullptr) continue;
    ++paired;
    wins += d->auuc > i->auuc;
  }
  const double share = paired == 0 ? 0.0 : static_cast<double>(wins) / paired;
  return {std::abs(mean - target) <= 0.15 * target && share >= 0.9 &&
              paired == r.replicates.size(),
          "mean AUUC dipw " + Fmt("%.4g", mean) + " (target 1.048e8 +-15%); "
              "dipw > ipw on " + std::to_string(wins) + "/" +
              std::to_string(paired) + " replicates"};
}

Outcome Criterion6() {
  Rng rng(DeriveSeed(kMasterSeed, SeedStream::kEstimator, 6));
  const Eigen::Index n = 100000;
  Dataset d;
  d.y.resize(n);
  d.t.resize(n);
  d.propensity.resize(n);
  d.x = Matrix::Zero(n, 1);
  d.column_names = {"x"};
  Vector mu1(n), mu0(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.y[i] = 3.0 * rng.Normal();
    d.t[i] = rng.Bernoulli(0.5);
    d.propensity[i] = 0.05 + 0.9 * rng.Uniform();
    mu1[i] = 3.0 * rng.Normal();
    mu0[i] = 3.0 * rng.Normal();
  }
  const Vector aipw = AipwTransform(d, mu1, mu0);
  const auto ipw = IpwTransform(d);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lhs =
        ipw.raw[i] - BStar(d.propensity[i], mu1[i], mu0[i]) * ipw.w[i];
    worst = std::max(worst, std::abs(lhs - aipw[i]));
  }
  return {worst < 1e-12, "max |raw - B*W - AIPW| " + Fmt("%.3g", worst) +
                             " over 1e5 tuples (< 1e-12)"};
}

Outcome Criterion7() {
  // Known nuisances with a covariate-dependent propensity.
  Rng rng(DeriveSeed(kMasterSeed, SeedStream::kEstimator, 7));
  const Eigen::Index n = 100000;
  Vector x1(n), x2(n), y(n), w(n), b_star(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x1[i] = rng.Uniform();
    x2[i] = rng.Uniform();
    const double mu0 = std::sin(2.0 * M_PI * x1[i]) + 2.0 * x2[i];
    const double mu1 = mu0 + 1.0 + x1[i];
    const double p = 0.2 + 0.6 * x2[i];
    const double t = rng.Bernoulli(p) ? 1.0 : 0.0;
    y[i] = (t == 1.0 ? mu1 : mu0) + rng.Normal();
    w[i] = IpwWeight(t, p);
    b_star[i] = BStar(p, mu1, mu0);
  }
  const std::vector<std::function<double(Eigen::Index)>> gs = {
      [](Eigen::Index) { return 1.0; },
      [&](Eigen::Index i) { return x1[i]; },
      [&](Eigen::Index i) { return std::cos(3.0 * x2[i]); },
      [&](Eigen::Index i) { return x1[i] > 0.5 ? 1.0 : -1.0; },
  };
  bool pass = true;
  double worst_z = -1e300;
  for (const auto& g : gs) {
    for (const double c : {-1.0, -0.5, 0.5, 1.0}) {
      // Paired difference loss(B*) - loss(B* + c g) per unit.
      Vector diff(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double a = (y[i] - b_star[i]) * w[i];
        const double b = (y[i] - b_star[i] - c * g(i)) * w[i];
        diff[i] = a * a - b * b;
      }
      const double se = SampleSd(diff) / std::sqrt(static_cast<double>(n));
      const double z = diff.mean() / se;
      worst_z = std::max(worst_z, z);
      pass = pass && diff.mean() <= 3.0 * se;
    }
  }
  return {pass, "largest (loss(B*) - loss(B* + c g)) / SE over 16 "
                "perturbations: " + Fmt("%.3f", worst_z) + " (<= 3)"};
}

Outcome Criterion8() {
  DgpSpec spec;
  const auto sample =
      SampleDgp(spec, 100000, DeriveSeed(kMasterSeed, SeedStream::kEstimator, 8));
  const auto ipw = IpwTransform(sample.data);
  const Matrix& x = sample.data.x;
  const std::vector<std::function<double(Eigen::Index)>> bs = {
      [](Eigen::Index) { return 1.0; },
      [&](Eigen::Index i) { return x(i, 0); },
      [&](Eigen::Index i) { return std::sin(3.0 * x(i, 1)); },
      [&](Eigen::Index i) { return x(i, 30) > 0 ? 2.0 : -1.0; },
      [&](Eigen::Index i) { return DgpBaseline(x.row(i), 5.0); },
  };
  const Eigen::Index n = ipw.w.size();
  bool pass = true;
  double worst = 0.0;
  for (const auto& b : bs) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      v[i] = b(i) * ipw.w[i] * sample.tau_true[i];
    }
    const double z =
        std::abs(v.mean()) / (SampleSd(v) / std::sqrt(static_cast<double>(n)));
    worst = std::max(worst, z);
    pass = pass && z < 3.0;
  }
  return {pass, "largest |mean B W tau| / (sd / sqrt n) over 5 B: " +
                    Fmt("%.3f", worst) + " (< 3)"};
}

Matrix RandomNormal(Eigen::Index n, Eigen::Index p, Rng& rng) {
  Matrix x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = rng.Normal();
  }
  return x;
}

Outcome Criterion9() {
  Rng rng(DeriveSeed(kMasterSeed, SeedStream::kEstimator, 9));
  double soft_err = 0.0, ols_err = 0.0, kkt = 0.0;
  bool zeros = true;
  const double tol = LassoOptions{}.tolerance;
  for (int instance = 0; instance < 10; ++instance) {
    const Eigen::Index n = 200, p = 10;
    // Orthonormal centered design with X'X / n = I.
    Matrix raw = RandomNormal(n, p, rng);
    raw.rowwise() -= raw.colwise().mean();
    const Matrix q = Eigen::HouseholderQR<Matrix>(raw).householderQ() *
                     Matrix::Identity(n, p);
    const Matrix x = q * std::sqrt(static_cast<double>(n));
    Vector beta = Vector::Zero(p);
    beta.head(4) << 3, -2, 1, 0.5;
    const Vector y = x * beta + RandomNormal(n, 1, rng).col(0);
    const std::vector<bool> mask(p, true);
    const double lambda = 0.1 + 0.05 * instance;
    const auto fit = FitLasso(x, y, mask, lambda);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double z = x.col(j).dot(y) / n;
      const double st = std::copysign(std::max(std::abs(z) - lambda, 0.0), z);
      soft_err = std::max(soft_err, std::abs(fit.coef[j] - st));
    }

    // General design for OLS, lambda_max and KKT.
    const Matrix g = RandomNormal(n, p, rng);
    const Vector gy = g * beta + RandomNormal(n, 1, rng).col(0);
    Matrix with_one(n, p + 1);
    with_one << Vector::Ones(n), g;
    const Vector ols = with_one.colPivHouseholderQr().solve(gy);
    LassoOptions tight;
    tight.tolerance = 1e-12;
    const auto zero = FitLasso(g, gy, mask, 0.0, std::nullopt, tight);
    ols_err = std::max(ols_err, std::abs(zero.intercept - ols[0]));
    for (Eigen::Index j = 0; j < p; ++j) {
      ols_err = std::max(ols_err, std::abs(zero.coef[j] - ols[j + 1]));
    }
    const double lmax = LambdaMax(g, gy, mask);
    for (const double scale : {1.0, 2.0}) {
      zeros = zeros && FitLasso(g, gy, mask, scale * lmax).coef.isZero(0.0);
    }

    std::vector<bool> partial = mask;
    partial[0] = false;
    PenaltySpec spec;
    spec.grid_size = 50;
    const auto lambdas = LambdaPath(g, gy, partial, spec);
    for (const auto& point : FitLassoPath(g, gy, partial, lambdas)) {
      kkt = std::max(kkt, KktViolation(g, gy, partial, point.lambda,
                                       point.coef, point.intercept));
    }
    const auto [z, rec] = Standardize(g);
    const auto cv = CvLasso(z, gy, partial, spec,
                            DeriveSeed(kMasterSeed, SeedStream::kCrossValidation,
                                       static_cast<uint64_t>(instance)));
    kkt = std::max(kkt, KktViolation(z, gy, partial, cv.lambda, cv.coef,
                                     cv.intercept));
  }
  const bool pass = soft_err <= 1e-8 && ols_err <= 1e-8 && zeros &&
                    kkt <= 10.0 * tol;
  return {pass, "soft-threshold err " + Fmt("%.2g", soft_err) +
                    ", OLS err " + Fmt("%.2g", ols_err) + " (<= 1e-8); zeros at "
                    "lambda_max " + (zeros ? "exact" : "NOT exact") +
                    "; worst KKT " + Fmt("%.2g", kkt) + " (<= " +
                    Fmt("%.0g", 10.0 * tol) + ")"};
}

Outcome Criterion10() {
  double worst = 0.0;
  const PenaltySpec defaults;
  for (uint64_t instance = 0; instance < 20; ++instance) {
    DgpSpec spec;
    spec.n_train = 500;
    spec.n_test = 1;
    spec.seed = DeriveSeed(kMasterSeed, SeedStream::kReplicate, 1000 + instance);
    const auto [train, test] = Generate(spec);
    EstimatorConfig cfg;
    cfg.seed = DeriveSeed(spec.seed, SeedStream::kEstimator);
    const DipwInputs in = BuildDipwInputs(train.data, cfg);
    const auto [z, rec] = Standardize(train.data.x);
    const Eigen::Index n = z.rows(), p = z.cols();
    const Vector bw = in.b_hat.cwiseProduct(in.w);

    Matrix design(n, p + 2);
    design << z, in.w, bw;
    std::vector<bool> mask(static_cast<size_t>(p), true);
    mask.push_back(false);
    mask.push_back(false);
    PenaltySpec penalty;
    penalty.standardize = false;
    const auto joint = CvLasso(design, in.raw, mask, penalty,
                               DeriveSeed(cfg.seed, SeedStream::kCrossValidation));

    Matrix basis(n, 3);
    basis << Vector::Ones(n), in.w, bw;
    const Eigen::ColPivHouseholderQR<Matrix> qr(basis);
    const Matrix z_res = z - basis * qr.solve(z);
    const Vector y_res = in.raw - basis * qr.solve(in.raw);
    const auto two_step =
        FitLassoAtLambda(z_res, y_res, std::vector<bool>(p, true), penalty,
                         joint.lambda);
    worst = std::max(
        worst, (joint.coef.head(p) - two_step.coef).cwiseAbs().maxCoeff());
  }
  const double bound = 10.0 * defaults.tolerance;
  return {worst <= bound, "max |beta_joint - beta_residualized| over 20 "
                          "instances " + Fmt("%.3g", worst) + " (<= " +
                              Fmt("%.0g", bound) + ")"};
}

Outcome Criterion11() {
  DgpSpec spec;
  const auto sample =
      SampleDgp(spec, 1000000, DeriveSeed(kMasterSeed, SeedStream::kEstimator, 11));
  const Vector signal = sample.data.t.cwiseProduct(sample.tau_true);
  auto var = [](const Vector& v) {
    return (v.array() - v.mean()).square().sum() /
           static_cast<double>(v.size() - 1);
  };
  const double share = var(signal) / var(sample.data.y);
  return {Within(share, 0.025, 0.045),
          "Var(T tau) / Var(Y) = " + Fmt("%.4f", share) + " ([0.025, 0.045])"};
}

Outcome Criterion12(const Studies& s) {
  size_t violations = 0, checked = 0, r2_bad = 0, r2_checked = 0;
  for (const auto& rep : s.balanced.replicates) {
    for (const auto& cell : rep.methods) {
      if (cell.method != "dipw-algo1" || cell.error) continue;
      ++checked;
      if (!(cell.sigma_u && cell.sigma_e && *cell.sigma_u < *cell.sigma_e)) {
        ++violations;
      }
    }
  }
  for (const auto* r : {&s.balanced, &s.unbalanced}) {
    for (const auto& rep : r->replicates) {
      for (const auto& cell : rep.methods) {
        if (!cell.r_squared) continue;
        ++r2_checked;
        r2_bad += !Within(*cell.r_squared, 0.0, 1.0);
      }
    }
  }
  return {violations == 0 && checked == kReplicates && r2_bad == 0 &&
              r2_checked > 0,
          "sigma_u < sigma_e on " + std::to_string(checked - violations) + "/" +
              std::to_string(checked) + " replicates; R^2 outside [0,1] in " +
              std::to_string(r2_bad) + "/" + std::to_string(r2_checked)};
}

std::string Slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int Tool(const std::string& args) {
  const std::string cmd =
      std::string(DIPW_TOOL_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome Criterion13() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dipw_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string sim =
      "simulate --p-treat 0.5 --reps 4 --seed 7 --n-train 300 --n-test 500 "
      "--export-data --out ";
  bool ok = true;
  std::string detail;
  const std::vector<std::pair<std::string, std::string>> sim_runs = {
      {"--threads 1", "s1"}, {"--threads 1", "s2"}, {"--threads 4", "s3"}};
  for (const auto& [threads, name] : sim_runs) {
    ok = ok && Tool(threads + " " + sim + (dir / name).string()) == 0;
  }
  const std::string report = Slurp(dir / "s1" / "report.csv");
  ok = ok && !report.empty() && report == Slurp(dir / "s2" / "report.csv") &&
       report == Slurp(dir / "s3" / "report.csv");
  detail += "simulate report.csv identical across 3 runs: " +
            std::string(ok ? "yes" : "no");

  const std::string train = (dir / "s1" / "train.csv").string();
  const std::string test = (dir / "s1" / "test.csv").string();
  bool curves = true;
  for (const auto& [threads, name] : sim_runs) {
    const std::string model = (dir / (name + ".json")).string();
    curves = curves &&
             Tool(threads + " fit --data " + train +
                  " --outcome y --treatment t --propensity propensity "
                  "--exclude tau --seed 3 --out " + model) == 0 &&
             Tool(threads + " uplift --model " + model + " --data " + test +
                  " --band-level 0.9 --n-boot 20 --seed 5 --budget 0.5 --out " +
                  (dir / ("u" + name)).string()) == 0;
  }
  const std::string curve = Slurp(dir / "us1" / "curve.csv");
  curves = curves && !curve.empty() && curve == Slurp(dir / "us2" / "curve.csv") &&
           curve == Slurp(dir / "us3" / "curve.csv");
  detail += "; fit + uplift curve.csv identical: " +
            std::string(curves ? "yes" : "no");
  return {ok && curves, detail};
}

void Report(int id, const std::function<Outcome()>& check, int& failures) {
  Outcome outcome;
  try {
    outcome = check();
  } catch (const std::exception& e) {
    outcome = {false, std::string("exception: ") + e.what()};
  }
  if (!outcome.pass) ++failures;
  std::printf("criterion %2d %s  %s\n", id, outcome.pass ? "PASS" : "FAIL",
              outcome.detail.c_str());
  std::fflush(stdout);
}

int Main() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  SetThreadCount(ResolveThreadCount(static_cast<int>(hw)));
  int failures = 0;
  Report(6, Criterion6, failures);
  Report(7, Criterion7, failures);
  Report(8, Criterion8, failures);
  Report(9, Criterion9, failures);
  Report(10, Criterion10, failures);
  Report(11, Criterion11, failures);
  Report(13, Criterion13, failures);

  Studies studies;
  double unused = 0.0;
  studies.balanced = Study(0.5, &studies.balanced_seconds);
  studies.unbalanced = Study(0.2, &unused);
  Report(1, [&] { return Criterion1(studies); }, failures);
  Report(2, [&] { return Criterion2(studies); }, failures);
  Report(3, [&] { return Criterion3(studies); }, failures);
  Report(4, [&] { return Criterion4(studies); }, failures);
  Report(5, [&] { return Criterion5(studies); }, failures);
  Report(12, [&] { return Criterion12(studies); }, failures);
  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace dipw

int main() { return dipw::Main(); }
