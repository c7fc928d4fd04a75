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

#include "dipw/cli.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dipw/common.h"
#include "dipw/data.h"
#include "dipw/estimators.h"
#include "dipw/eval.h"
#include "dipw/parallel.h"
#include "dipw/random.h"
#include "dipw/sim.h"
#include "json.hpp"

namespace dipw {
namespace {

using nlohmann::json;

struct EstimatorFlags {
  int k_folds = 5;
  int n_trees = 100;
  int mtry = 0;
  int min_leaf = 5;
  int max_depth = 0;
  bool no_bootstrap = false;
  int grid_size = 100;
  double lambda_min_ratio = 1e-3;
  int cv_folds = 10;
  std::string selection_rule = "min-mse";
  double tolerance = 1e-7;
  int max_iterations = 100000;
  bool no_standardize = false;
  std::string b_choice = "pooled-mu";

  EstimatorConfig ToConfig(uint64_t seed) const {
    EstimatorConfig cfg;
    cfg.k_folds = k_folds;
    cfg.nuisance.n_trees = n_trees;
    cfg.nuisance.mtry = mtry;
    cfg.nuisance.min_leaf = min_leaf;
    if (max_depth > 0) cfg.nuisance.max_depth = max_depth;
    cfg.nuisance.bootstrap = !no_bootstrap;
    cfg.penalty.grid_size = grid_size;
    cfg.penalty.lambda_min_ratio = lambda_min_ratio;
    cfg.penalty.cv_folds = cv_folds;
    cfg.penalty.selection_rule = selection_rule == "one-se"
                                     ? SelectionRule::kOneSe
                                     : SelectionRule::kMinMse;
    cfg.penalty.tolerance = tolerance;
    cfg.penalty.max_iterations = max_iterations;
    cfg.penalty.standardize = !no_standardize;
    cfg.b_choice = b_choice == "b-star" ? BChoice::kBStar : BChoice::kPooledMu;
    cfg.seed = seed;
    return cfg;
  }
};

struct SchemaFlags {
  std::string schema_path;
  std::string outcome;
  std::string treatment;
  std::string propensity;
  std::vector<std::string> covariates;
  std::vector<std::string> one_hot;
  std::vector<std::string> exclude;
  std::optional<double> overlap_bound;
};

struct State {
  int threads = 0;
  std::string config_path;

  uint64_t seed = 0;
  EstimatorFlags estimator;
  SchemaFlags schema;
  std::string data_path;
  std::string out;

  // simulate
  size_t n_train = 1000;
  size_t n_test = 10000;
  double p_treat = 0.5;
  double multiplier = 5.0;
  double noise_sd = 1.0;
  bool null_effect = false;
  size_t reps = 50;
  std::vector<std::string> methods = {"dipw", "ipw", "dr", "t-learner"};
  bool export_data = false;

  // fit
  std::string method = "dipw";
  std::optional<double> test_fraction;
  std::string test_out;

  // evaluate / uplift
  std::vector<std::string> models;
  std::string tau_column;
  std::vector<double> budgets;
  std::optional<double> band_level;
  std::optional<int> n_boot;
};

void AddEstimatorOptions(CLI::App* sub, State& s) {
  auto& e = s.estimator;
  sub->add_option("--seed", s.seed, "Master seed");
  sub->add_option("--k-folds", e.k_folds, "Cross-fitting folds")
      ->check(CLI::Range(2, 1000));
  sub->add_option("--n-trees", e.n_trees, "Trees per forest")
      ->check(CLI::Range(1, 100000));
  sub->add_option("--mtry", e.mtry, "Features tried per split (0: p/3)")
      ->check(CLI::Range(0, 1000000));
  sub->add_option("--min-leaf", e.min_leaf, "Minimum leaf size")
      ->check(CLI::Range(1, 1000000));
  sub->add_option("--max-depth", e.max_depth, "Tree depth cap (0: none)")
      ->check(CLI::Range(0, 10000));
  sub->add_flag("--no-bootstrap", e.no_bootstrap, "Grow trees on all rows");
  sub->add_option("--grid-size", e.grid_size, "Lambda grid points")
      ->check(CLI::Range(2, 100000));
  sub->add_option("--lambda-min-ratio", e.lambda_min_ratio,
                  "Smallest lambda over lambda_max");
  sub->add_option("--cv-folds", e.cv_folds, "Folds for choosing lambda")
      ->check(CLI::Range(2, 1000));
  sub->add_option("--selection-rule", e.selection_rule, "min-mse or one-se")
      ->check(CLI::IsMember({"min-mse", "one-se"}));
  sub->add_option("--tolerance", e.tolerance, "Solver tolerance");
  sub->add_option("--max-iterations", e.max_iterations, "Solver sweep cap");
  sub->add_flag("--no-standardize", e.no_standardize,
                "Penalize covariates on their original scale");
  sub->add_option("--b-choice", e.b_choice, "pooled-mu or b-star")
      ->check(CLI::IsMember({"pooled-mu", "b-star"}));
}

void AddSchemaOptions(CLI::App* sub, State& s) {
  auto& f = s.schema;
  sub->add_option("--schema", f.schema_path, "Schema JSON file");
  sub->add_option("--outcome", f.outcome, "Outcome column");
  sub->add_option("--treatment", f.treatment, "Treatment column (0/1)");
  sub->add_option("--propensity", f.propensity,
                  "Propensity column name or constant probability");
  sub->add_option("--covariates", f.covariates, "Covariate columns")
      ->delimiter(',');
  sub->add_option("--one-hot", f.one_hot,
                  "Count column to one-hot encode, as column=reference");
  sub->add_option("--exclude", f.exclude,
                  "Columns left out of the default covariate set")
      ->delimiter(',');
  sub->add_option("--overlap-bound", f.overlap_bound,
                  "Propensities must lie in [bound, 1 - bound]");
}

std::unique_ptr<CLI::App> BuildApp(State& s) {
  auto app = std::make_unique<CLI::App>(
      "Denoised inverse probability weighting for sparse CATE estimation",
      "dipw");
  app->option_defaults()->always_capture_default();
  app->require_subcommand(1);
  app->add_option("--threads", s.threads,
                  "Worker thread cap (default: DIPW_THREADS, else 1)")
      ->check(CLI::Range(0, 4096));
  app->add_option("--config", s.config_path,
                  "JSON file of option values; command-line flags win");

  auto* simulate = app->add_subcommand(
      "simulate", "Run the simulation study and write a replication report");
  simulate->add_option("--n-train", s.n_train, "Training rows per replicate");
  simulate->add_option("--n-test", s.n_test, "Test rows per replicate");
  simulate->add_option("--p-treat", s.p_treat, "Treatment probability");
  simulate->add_option("--multiplier", s.multiplier, "Baseline multiplier");
  simulate->add_option("--noise-sd", s.noise_sd, "Outcome noise sd");
  simulate->add_flag("--null-effect", s.null_effect, "Set tau(x) to 0");
  simulate->add_option("--reps", s.reps, "Replicates");
  simulate->add_option("--methods", s.methods, "Estimators to compare")
      ->delimiter(',');
  simulate->add_flag("--export-data", s.export_data,
                     "Also write replicate 0's train.csv and test.csv");
  simulate->add_option("--out", s.out, "Output directory")->required();
  AddEstimatorOptions(simulate, s);

  auto* fit = app->add_subcommand("fit", "Fit a CATE model on a CSV file");
  fit->add_option("--data", s.data_path, "Training CSV")->required();
  fit->add_option("--method", s.method,
                  "dipw, dipw-algo1, dipw-algo2, ipw, dr or t-learner");
  fit->add_option("--test-fraction", s.test_fraction,
                  "Hold out this share of rows before fitting");
  fit->add_option("--test-out", s.test_out, "Where to write held-out rows");
  fit->add_option("--out", s.out, "Model JSON path")->required();
  AddSchemaOptions(fit, s);
  AddEstimatorOptions(fit, s);

  auto* evaluate = app->add_subcommand(
      "evaluate", "Score fitted models on a test CSV (AUUC, RMSE)");
  evaluate->add_option("--model", s.models, "Model JSON, optionally name=path")
      ->required();
  evaluate->add_option("--data", s.data_path, "Test CSV")->required();
  evaluate->add_option("--tau", s.tau_column, "True CATE column, if known");
  evaluate->add_option("--out", s.out, "Metrics JSON path (default stdout)");
  AddSchemaOptions(evaluate, s);

  auto* uplift = app->add_subcommand(
      "uplift", "Write the uplift curve and budget gains for one model");
  uplift->add_option("--model", s.models, "Model JSON")->required()->expected(1);
  uplift->add_option("--data", s.data_path, "Test CSV")->required();
  uplift->add_option("--budget", s.budgets, "Treated fractions in (0, 1]")
      ->delimiter(',');
  uplift->add_option("--band-level", s.band_level,
                     "Bootstrap band level in (0, 1)");
  uplift->add_option("--n-boot", s.n_boot, "Bootstrap resamples (default 200)");
  uplift->add_option("--seed", s.seed, "Bootstrap seed");
  uplift->add_option("--out", s.out, "Output directory")->required();
  AddSchemaOptions(uplift, s);
  for (auto* sub : {simulate, fit, evaluate, uplift}) sub->fallthrough();
  return app;
}

CLI::App* SelectedSubcommand(const CLI::App& app) {
  const auto subs = app.get_subcommands();
  return subs.empty() ? nullptr : subs.front();
}

std::string ConfigScalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Turns config entries for options absent from the command line into
// tokens. Keys use option names with either '-' or '_'.
void ConfigTokens(const json& j, CLI::App* app, CLI::App* sub,
                  std::vector<std::string>& global_tokens,
                  std::vector<std::string>& sub_tokens) {
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  for (const auto& [raw_key, value] : j.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config" || key == "format-version" || key == "subcommand") {
      continue;
    }
    if (value.is_object()) {
      if (sub != nullptr && key == sub->get_name()) {
        ConfigTokens(value, app, sub, global_tokens, sub_tokens);
      } else if (app->get_subcommand_no_throw(key) == nullptr) {
        throw ArgumentError("unknown config section '" + raw_key + "'");
      }
      continue;
    }
    CLI::Option* opt = nullptr;
    auto* target = &sub_tokens;
    if (sub != nullptr) opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      opt = app->get_option_no_throw("--" + key);
      target = &global_tokens;
    }
    if (opt == nullptr) throw ArgumentError("unknown config key '" + raw_key + "'");
    if (opt->count() > 0 || value.is_null()) continue;
    if (opt->get_expected_min() == 0) {
      if (!value.is_boolean()) {
        throw ArgumentError("config key '" + raw_key + "' must be a boolean");
      }
      if (value.get<bool>()) target->push_back("--" + key);
      continue;
    }
    if (value.is_array()) {
      for (const auto& item : value) {
        target->push_back("--" + key);
        target->push_back(ConfigScalar(item));
      }
    } else {
      target->push_back("--" + key);
      target->push_back(ConfigScalar(value));
    }
  }
}

json TypedValue(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  const char* begin = text.data();
  const char* end = begin + text.size();
  uint64_t u = 0;
  if (auto r = std::from_chars(begin, end, u); r.ec == std::errc() && r.ptr == end) {
    return u;
  }
  int64_t i = 0;
  if (auto r = std::from_chars(begin, end, i); r.ec == std::errc() && r.ptr == end) {
    return i;
  }
  double d = 0.0;
  if (auto r = std::from_chars(begin, end, d); r.ec == std::errc() && r.ptr == end) {
    return d;
  }
  return text;
}

void EchoOptions(const CLI::App& app, json& out) {
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name.empty()) continue;
    std::string key = name;
    std::replace(key.begin(), key.end(), '-', '_');
    if (opt->get_expected_min() == 0) {
      out[key] = opt->count() > 0;
      continue;
    }
    if (opt->count() > 0) {
      std::vector<std::string> parts;
      for (const auto& r : opt->results()) {
        std::stringstream ss(r);
        std::string item;
        while (std::getline(ss, item, opt->get_delimiter() ? opt->get_delimiter() : '\n')) {
          parts.push_back(item);
        }
      }
      if (opt->get_items_expected_max() > 1) {
        json arr = json::array();
        for (const auto& p : parts) arr.push_back(TypedValue(p));
        out[key] = arr;
      } else {
        out[key] = parts.empty() ? json(nullptr) : TypedValue(parts.back());
      }
      continue;
    }
    const std::string def = opt->get_default_str();
    if (def.empty()) continue;
    if (opt->get_items_expected_max() > 1) {
      // Vector defaults are rendered as "[a,b]".
      std::string body = def;
      if (body.size() >= 2 && body.front() == '[' && body.back() == ']') {
        body = body.substr(1, body.size() - 2);
      }
      json arr = json::array();
      std::stringstream ss(body);
      std::string item;
      while (std::getline(ss, item, ',')) arr.push_back(TypedValue(item));
      out[key] = arr;
    } else {
      out[key] = TypedValue(def);
    }
  }
}

// The resolved run description: every option of the app and the chosen
// subcommand, given or defaulted.
json RunEcho(const CLI::App& app, const CLI::App& sub) {
  json echo;
  echo["format_version"] = kFormatVersion;
  json globals = json::object();
  EchoOptions(app, globals);
  for (auto& [k, v] : globals.items()) echo[k] = v;
  echo["subcommand"] = sub.get_name();
  json local = json::object();
  EchoOptions(sub, local);
  echo[sub.get_name()] = local;
  return echo;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

void WriteJson(const std::filesystem::path& path, const json& j) {
  WriteText(path, j.dump(2) + "\n");
}

json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void EnsureDirectory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ArgumentError("cannot create directory '" + dir + "'");
}

std::pair<std::string, long long> ParseOneHot(const std::string& spec) {
  const auto eq = spec.find('=');
  std::string column = spec.substr(0, eq);
  long long reference = 0;
  if (eq != std::string::npos) {
    const std::string ref = spec.substr(eq + 1);
    const auto r = std::from_chars(ref.data(), ref.data() + ref.size(), reference);
    if (r.ec != std::errc() || r.ptr != ref.data() + ref.size()) {
      throw ArgumentError("--one-hot expects column=integer, got '" + spec + "'");
    }
  }
  if (column.empty()) throw ArgumentError("--one-hot needs a column name");
  return {column, reference};
}

// Layers: `base` (if any), then the --schema file, then individual flags.
Schema ResolveSchema(const SchemaFlags& f, std::optional<Schema> base) {
  Schema schema;
  bool have = false;
  if (base) {
    schema = *base;
    have = true;
  }
  if (!f.schema_path.empty()) {
    schema = SchemaFromJson(ReadJsonFile(f.schema_path));
    have = true;
  }
  if (!f.outcome.empty()) schema.outcome = f.outcome;
  if (!f.treatment.empty()) schema.treatment = f.treatment;
  if (!f.propensity.empty()) {
    double value = 0.0;
    const char* end = f.propensity.data() + f.propensity.size();
    const auto r = std::from_chars(f.propensity.data(), end, value);
    if (r.ec == std::errc() && r.ptr == end) {
      schema.propensity = value;
    } else {
      schema.propensity = f.propensity;
    }
  }
  if (!f.covariates.empty()) schema.covariates = f.covariates;
  if (!f.one_hot.empty()) {
    schema.one_hot.clear();
    for (const auto& spec : f.one_hot) schema.one_hot.push_back(ParseOneHot(spec));
  }
  if (f.overlap_bound) schema.overlap_bound = *f.overlap_bound;
  if (!have && f.outcome.empty()) {
    throw SchemaError("no schema: pass --schema or --outcome/--treatment");
  }
  if (schema.outcome.empty()) throw SchemaError("schema names no outcome");
  if (schema.treatment.empty()) throw SchemaError("schema names no treatment");
  return schema;
}

// Makes the covariate list explicit so extra columns never leak in.
Schema PinCovariates(const CsvTable& table, Schema schema,
                     const std::vector<std::string>& exclude) {
  if (!schema.covariates.empty()) return schema;
  std::set<std::string> claimed = {schema.outcome, schema.treatment};
  if (const auto* name = std::get_if<std::string>(&schema.propensity)) {
    claimed.insert(*name);
  }
  for (const auto& e : exclude) {
    if (!table.HasColumn(e)) {
      throw SchemaError("excluded column '" + e + "' not found");
    }
    claimed.insert(e);
  }
  for (const auto& name : table.header) {
    if (!claimed.contains(name)) schema.covariates.push_back(name);
  }
  return schema;
}

std::string CsvCell(const std::string& cell) {
  if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
  std::string quoted = "\"";
  for (const char c : cell) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

void WriteTableRows(const std::string& path, const CsvTable& table,
                    const std::vector<size_t>& rows) {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t j = 0; j < cells.size(); ++j) {
      if (j > 0) out << ',';
      out << CsvCell(cells[j]);
    }
    out << '\n';
  };
  line(table.header);
  for (const size_t i : rows) line(table.rows[i]);
  WriteText(path, out.str());
}

struct LoadedModel {
  std::string name;
  CateModel model;
  std::optional<Schema> schema;
};

LoadedModel LoadModel(const std::string& spec) {
  LoadedModel loaded;
  std::string path = spec;
  if (const auto eq = spec.find('='); eq != std::string::npos) {
    loaded.name = spec.substr(0, eq);
    path = spec.substr(eq + 1);
  } else {
    loaded.name = std::filesystem::path(spec).stem().string();
  }
  const json j = ReadJsonFile(path);
  loaded.model = CateModelFromJson(j);
  if (j.contains("schema")) loaded.schema = SchemaFromJson(j.at("schema"));
  return loaded;
}

// Columns of `d` in the model's feature order. One-hot levels unseen in the
// test data become zero columns.
Matrix AlignFeatures(const Dataset& d, const CateModel& model,
                     const Schema& schema, std::ostream& err) {
  std::map<std::string, Eigen::Index> index;
  for (size_t j = 0; j < d.column_names.size(); ++j) {
    index[d.column_names[j]] = static_cast<Eigen::Index>(j);
  }
  auto one_hot_level = [&](const std::string& name) {
    for (const auto& [base, ref] : schema.one_hot) {
      (void)ref;
      if (name.rfind(base + "_", 0) == 0) return true;
    }
    return false;
  };
  Matrix x(d.x.rows(), static_cast<Eigen::Index>(model.feature_names.size()));
  std::set<std::string> used;
  for (size_t j = 0; j < model.feature_names.size(); ++j) {
    const auto& name = model.feature_names[j];
    const auto col = static_cast<Eigen::Index>(j);
    if (const auto it = index.find(name); it != index.end()) {
      x.col(col) = d.x.col(it->second);
      used.insert(name);
    } else if (one_hot_level(name)) {
      x.col(col).setZero();
    } else {
      throw SchemaError("test data lacks model feature '" + name + "'");
    }
  }
  for (const auto& name : d.column_names) {
    if (!used.contains(name) && one_hot_level(name)) {
      err << "warning: level column '" << name
          << "' was not seen in training and is ignored\n";
    }
  }
  return x;
}

struct TestData {
  CsvTable table;
  Dataset data;
  Schema schema;
};

TestData LoadTestData(const State& s, const std::optional<Schema>& base,
                      const std::vector<std::string>& extra_exclude) {
  TestData t;
  t.table = ReadCsvTable(s.data_path);
  Schema schema = ResolveSchema(s.schema, base);
  std::vector<std::string> exclude = s.schema.exclude;
  for (const auto& e : extra_exclude) exclude.push_back(e);
  if (s.schema.covariates.empty() && !base) {
    schema = PinCovariates(t.table, schema, exclude);
  }
  t.schema = schema;
  t.data = DatasetFromTable(t.table, schema);
  return t;
}

std::vector<CateKind> ParseMethods(const std::vector<std::string>& names) {
  std::vector<CateKind> kinds;
  for (const auto& name : names) kinds.push_back(ParseKind(name));
  return kinds;
}

int CmdSimulate(const State& s, const json& echo, std::ostream& out) {
  DgpSpec spec;
  spec.n_train = s.n_train;
  spec.n_test = s.n_test;
  spec.p_treat = s.p_treat;
  spec.b_multiplier = s.multiplier;
  spec.noise_sd = s.noise_sd;
  spec.null_effect = s.null_effect;
  ValidateDgpSpec(spec);
  const EstimatorConfig base = s.estimator.ToConfig(s.seed);
  ValidateEstimatorConfig(base);
  const auto methods = ParseMethods(s.methods);

  EnsureDirectory(s.out);
  const std::filesystem::path dir(s.out);
  WriteJson(dir / "config.json", echo);
  const ReplicationReport report =
      RunReplications(spec, methods, s.reps, s.seed, base);
  json report_json = ReportToJson(report);
  report_json["config"] = echo;
  WriteJson(dir / "report.json", report_json);
  WriteText(dir / "report.csv", ReportToCsv(report));

  if (s.export_data) {
    DgpSpec rep_spec = spec;
    rep_spec.seed = DeriveSeed(s.seed, SeedStream::kReplicate, 0);
    const auto [train, test] = Generate(rep_spec);
    WriteCsv((dir / "train.csv").string(), train.data, {{"tau", train.tau_true}});
    WriteCsv((dir / "test.csv").string(), test.data, {{"tau", test.tau_true}});
  }

  for (const auto& method : report.methods) {
    const auto rmse = report.Summary(method, "rmse");
    const auto auuc = report.Summary(method, "auuc");
    out << method << ": mean RMSE " << rmse.mean << ", mean AUUC " << auuc.mean
        << " (" << rmse.count << "/" << s.reps << " replicates)\n";
  }
  out << "wrote " << (dir / "report.csv").string() << "\n";
  return kExitOk;
}

int CmdFit(const State& s, const json& echo, std::ostream& out) {
  const CateKind kind = ParseKind(s.method);
  const EstimatorConfig cfg = s.estimator.ToConfig(s.seed);
  ValidateEstimatorConfig(cfg);
  if (s.test_fraction.has_value() != !s.test_out.empty()) {
    throw ArgumentError("--test-fraction and --test-out go together");
  }
  const CsvTable table = ReadCsvTable(s.data_path);
  Schema schema = ResolveSchema(s.schema, std::nullopt);
  schema = PinCovariates(table, schema, s.schema.exclude);
  Dataset d = DatasetFromTable(table, schema);

  std::optional<SplitIndices> split;
  if (s.test_fraction) {
    split = TrainTestIndices(d.n(), *s.test_fraction,
                             DeriveSeed(s.seed, SeedStream::kSplit));
    d = Subset(d, split->train);
  }
  const CateModel model = FitCate(kind, d, cfg);
  json j = CateModelToJson(model);
  j["schema"] = SchemaToJson(schema);
  j["run"] = echo;
  j["training_rows"] = d.n();
  WriteJson(s.out, j);
  if (split) WriteTableRows(s.test_out, table, split->test);

  out << KindName(kind) << " fitted on " << d.n() << " rows";
  if (model.IsLinear()) {
    size_t nonzero = 0;
    for (Eigen::Index i = 0; i < model.beta.size(); ++i) {
      nonzero += model.beta[i] != 0.0;
    }
    out << ", lambda " << model.lambda << ", " << nonzero << " nonzero of "
        << model.beta.size();
  }
  out << "\nwrote " << s.out << "\n";
  return kExitOk;
}

json DiagnosticsJson(const CateModel& model) {
  json j = json::object();
  if (!model.IsLinear()) return j;
  const auto d = DiagnosticsReport(model);
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("sigma_e_hat", d.sigma_e_hat);
  put("sigma_u_hat", d.sigma_u_hat);
  put("r_squared", d.r_squared);
  put("lambda_raw", d.lambda_raw);
  put("lambda_denoised", d.lambda_denoised);
  return j;
}

int CmdEvaluate(const State& s, const json& echo, std::ostream& out,
                std::ostream& err) {
  std::vector<LoadedModel> models;
  std::set<std::string> names;
  for (const auto& spec : s.models) {
    models.push_back(LoadModel(spec));
    if (!names.insert(models.back().name).second) {
      throw ArgumentError("duplicate model name '" + models.back().name + "'");
    }
  }
  std::vector<std::string> extra;
  if (!s.tau_column.empty()) extra.push_back(s.tau_column);

  json results = json::array();
  std::vector<AuucRow> rows;
  for (const auto& loaded : models) {
    const TestData test = LoadTestData(s, loaded.schema, extra);
    const Matrix x = AlignFeatures(test.data, loaded.model, test.schema, err);
    const Vector scores = PredictCate(loaded.model, x);
    const auto curve = ComputeUpliftCurve(scores, test.data.y, test.data.t);
    json r;
    r["name"] = loaded.name;
    r["kind"] = KindName(loaded.model.kind);
    r["n"] = test.data.n();
    r["auuc"] = curve.auuc;
    if (!s.tau_column.empty()) {
      r["rmse"] = Rmse(scores, NumericColumn(test.table, s.tau_column));
    }
    r["diagnostics"] = DiagnosticsJson(loaded.model);
    results.push_back(r);
    rows.push_back({loaded.name, curve.auuc});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const AuucRow& a, const AuucRow& b) {
    if (a.auuc != b.auuc) return a.auuc > b.auuc;
    return a.name < b.name;
  });
  json ranking = json::array();
  for (const auto& row : rows) ranking.push_back({{"name", row.name}, {"auuc", row.auuc}});

  json j;
  j["format_version"] = kFormatVersion;
  j["models"] = results;
  j["ranking"] = ranking;
  j["config"] = echo;
  if (s.out.empty()) {
    out << j.dump(2) << "\n";
  } else {
    WriteJson(s.out, j);
    for (const auto& row : rows) out << row.name << ": AUUC " << row.auuc << "\n";
  }
  return kExitOk;
}

int CmdUplift(const State& s, const json& echo, std::ostream& out,
              std::ostream& err) {
  const LoadedModel loaded = LoadModel(s.models.front());
  const TestData test = LoadTestData(s, loaded.schema, {});
  const Matrix x = AlignFeatures(test.data, loaded.model, test.schema, err);
  const Vector scores = PredictCate(loaded.model, x);
  UpliftCurve curve = ComputeUpliftCurve(scores, test.data.y, test.data.t);
  const bool want_band = s.band_level.has_value() || s.n_boot.has_value();
  const double level = s.band_level.value_or(0.95);
  const int n_boot = s.n_boot.value_or(200);
  if (want_band) {
    if (!(level > 0.0 && level < 1.0)) {
      throw ArgumentError("--band-level must lie in (0, 1)");
    }
    if (n_boot < 1) throw ArgumentError("--n-boot must be at least 1");
    curve.band = ComputeUpliftBand(scores, test.data.y, test.data.t, level,
                                   n_boot, s.seed);
  }

  const size_t n = curve.size();
  json budgets = json::array();
  for (const double fraction : s.budgets) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
      throw ArgumentError("--budget fractions must lie in (0, 1]");
    }
    const auto k = static_cast<size_t>(std::clamp<long long>(
        std::llround(fraction * static_cast<double>(n)), 1,
        static_cast<long long>(n)));
    const auto gain = ComputeBudgetGain(curve, k);
    json b;
    b["fraction"] = fraction;
    b["k"] = gain.k;
    b["treated_gain"] = gain.treated_gain;
    b["random_gain"] = gain.random_gain;
    b["improvement_ratio"] = gain.improvement_ratio
                                 ? json(*gain.improvement_ratio)
                                 : json(nullptr);
    budgets.push_back(b);
    out << "budget " << fraction << " (k=" << k << "): gain "
        << gain.treated_gain << " vs random " << gain.random_gain;
    if (gain.improvement_ratio) out << ", ratio " << *gain.improvement_ratio;
    out << "\n";
  }

  EnsureDirectory(s.out);
  const std::filesystem::path dir(s.out);
  WriteText(dir / "curve.csv", UpliftCurveCsv(curve));
  json summary;
  summary["format_version"] = kFormatVersion;
  summary["model"] = loaded.name;
  summary["kind"] = KindName(loaded.model.kind);
  summary["n"] = n;
  summary["auuc"] = curve.auuc;
  summary["budgets"] = budgets;
  summary["band"] = want_band ? json{{"level", level}, {"n_boot", n_boot},
                                     {"seed", s.seed}}
                              : json(nullptr);
  summary["config"] = echo;
  WriteJson(dir / "summary.json", summary);
  out << "AUUC " << curve.auuc << "\nwrote " << (dir / "curve.csv").string()
      << "\n";
  return kExitOk;
}

int Dispatch(const CLI::App& app, const State& s, std::ostream& out,
             std::ostream& err) {
  const CLI::App* sub = SelectedSubcommand(app);
  const json echo = RunEcho(app, *sub);
  SetThreadCount(ResolveThreadCount(s.threads));
  const std::string name = sub->get_name();
  if (name == "simulate") return CmdSimulate(s, echo, out);
  if (name == "fit") return CmdFit(s, echo, out);
  if (name == "evaluate") return CmdEvaluate(s, echo, out, err);
  return CmdUplift(s, echo, out, err);
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  std::vector<std::string> tokens(argv + 1, argv + argc);
  auto state = std::make_unique<State>();
  auto app = BuildApp(*state);
  auto parse = [&](std::vector<std::string> args) -> std::optional<int> {
    std::reverse(args.begin(), args.end());
    try {
      app->parse(args);
    } catch (const CLI::ParseError& e) {
      const int code = app->exit(e, out, err);
      return code == 0 ? kExitOk : kExitUsage;
    }
    return std::nullopt;
  };

  try {
    if (const auto code = parse(tokens)) return *code;
    if (!state->config_path.empty()) {
      const json config = ReadJsonFile(state->config_path);
      std::vector<std::string> global_tokens, sub_tokens;
      ConfigTokens(config, app.get(), SelectedSubcommand(*app), global_tokens,
                   sub_tokens);
      std::vector<std::string> merged = global_tokens;
      merged.insert(merged.end(), tokens.begin(), tokens.end());
      merged.insert(merged.end(), sub_tokens.begin(), sub_tokens.end());
      state = std::make_unique<State>();
      app = BuildApp(*state);
      if (const auto code = parse(merged)) return *code;
    }
    return Dispatch(*app, *state, out, err);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace dipw
