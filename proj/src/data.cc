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

#include "dipw/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dipw/random.h"

namespace dipw {
namespace {

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::optional<double> ParseDouble(const std::string& field) {
  const std::string s = Trim(field);
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

// Splits one CSV record; handles double-quoted fields with "" escapes.
std::vector<std::string> SplitRecord(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string FormatRows(const std::vector<size_t>& rows) {
  std::ostringstream out;
  const size_t shown = std::min<size_t>(rows.size(), 20);
  for (size_t i = 0; i < shown; ++i) {
    if (i > 0) out << ", ";
    out << rows[i];
  }
  if (rows.size() > shown) out << ", ... (" << rows.size() << " rows)";
  return out.str();
}

std::string FormatReal(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

}  // namespace

void ValidateDataset(const Dataset& d, double overlap_bound) {
  const auto n = static_cast<Eigen::Index>(d.n());
  if (d.t.size() != n || d.propensity.size() != n || d.x.rows() != n) {
    throw ValidationError("dataset vectors and covariate rows differ in length");
  }
  if (d.column_names.size() != d.p()) {
    throw ValidationError("column name count does not match covariate count");
  }
  std::set<std::string> seen;
  for (const auto& name : d.column_names) {
    if (!seen.insert(name).second) {
      throw ValidationError("duplicate covariate column name '" + name + "'");
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d.t[i] != 0.0 && d.t[i] != 1.0) {
      throw ValidationError("treatment must be 0 or 1 (row " +
                            std::to_string(i + 1) + ")");
    }
    const double p = d.propensity[i];
    if (!(p > 0.0 && p < 1.0)) {
      throw ValidationError("propensity must lie in (0, 1) (row " +
                            std::to_string(i + 1) + ")");
    }
    if (!(p > overlap_bound && p < 1.0 - overlap_bound)) {
      throw ValidationError("propensity violates the overlap bound " +
                            FormatReal(overlap_bound) + " (row " +
                            std::to_string(i + 1) + ")");
    }
    if (!std::isfinite(d.y[i]) || !d.x.row(i).allFinite()) {
      throw ValidationError("non-finite value (row " + std::to_string(i + 1) +
                            ")");
    }
  }
}

Vector SubsetRows(const Vector& v, std::span<const size_t> rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
  }
  return out;
}

Matrix SubsetRows(const Matrix& m, std::span<const size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Dataset Subset(const Dataset& d, std::span<const size_t> rows) {
  Dataset out;
  out.y = SubsetRows(d.y, rows);
  out.t = SubsetRows(d.t, rows);
  out.propensity = SubsetRows(d.propensity, rows);
  out.x = SubsetRows(d.x, rows);
  out.column_names = d.column_names;
  return out;
}

std::vector<size_t> FoldPlan::Members(int fold) const {
  std::vector<size_t> rows;
  for (size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) rows.push_back(i);
  }
  return rows;
}

std::vector<size_t> FoldPlan::Complement(int fold) const {
  std::vector<size_t> rows;
  for (size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != fold) rows.push_back(i);
  }
  return rows;
}

FoldPlan MakeFolds(size_t n, int k, uint64_t seed) {
  if (k < 2) throw ArgumentError("fold count must be at least 2");
  if (static_cast<size_t>(k) > n) {
    throw ArgumentError("fold count " + std::to_string(k) +
                        " exceeds sample size " + std::to_string(n));
  }
  Rng rng(seed);
  const auto perm = Permutation(n, rng);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.resize(n);
  for (size_t i = 0; i < n; ++i) {
    plan.assignment[perm[i]] = static_cast<int>(i % static_cast<size_t>(k));
  }
  return plan;
}

std::pair<Matrix, StandardizationRecord> Standardize(const Matrix& x) {
  const Eigen::Index p = x.cols();
  const double n = static_cast<double>(x.rows());
  StandardizationRecord rec;
  rec.mean = Vector::Zero(p);
  rec.sd = Vector::Ones(p);
  rec.constant.assign(static_cast<size_t>(p), false);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto col = x.col(j);
    if (x.rows() == 0 || col.maxCoeff() == col.minCoeff()) {
      rec.constant[static_cast<size_t>(j)] = true;
      continue;
    }
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / n);
    rec.mean[j] = mean;
    rec.sd[j] = sd;
  }
  return {ApplyStandardization(x, rec), std::move(rec)};
}

Matrix ApplyStandardization(const Matrix& x, const StandardizationRecord& rec) {
  if (x.cols() != rec.mean.size()) {
    throw ArgumentError("standardization record width mismatch");
  }
  Matrix z = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    z.col(j) = (x.col(j).array() - rec.mean[j]) / rec.sd[j];
  }
  return z;
}

Matrix Destandardize(const Matrix& z, const StandardizationRecord& rec) {
  if (z.cols() != rec.mean.size()) {
    throw ArgumentError("standardization record width mismatch");
  }
  Matrix x = z;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    x.col(j) = z.col(j).array() * rec.sd[j] + rec.mean[j];
  }
  return x;
}

OneHotColumns OneHotCount(std::span<const long long> counts,
                          long long reference,
                          const std::string& base_name) {
  std::set<long long> observed;
  for (const long long c : counts) {
    if (c < 0) throw ArgumentError("one-hot counts must be non-negative");
    observed.insert(c);
  }
  if (!observed.contains(reference)) {
    throw ArgumentError("reference level " + std::to_string(reference) +
                        " is not observed in '" + base_name + "'");
  }
  OneHotColumns out;
  for (const long long level : observed) {
    if (level == reference) continue;
    out.levels.push_back(level);
    out.names.push_back(base_name + "_" + std::to_string(level));
  }
  out.indicators = Matrix::Zero(static_cast<Eigen::Index>(counts.size()),
                                static_cast<Eigen::Index>(out.levels.size()));
  for (size_t i = 0; i < counts.size(); ++i) {
    const auto it =
        std::lower_bound(out.levels.begin(), out.levels.end(), counts[i]);
    if (it != out.levels.end() && *it == counts[i]) {
      out.indicators(static_cast<Eigen::Index>(i), it - out.levels.begin()) =
          1.0;
    }
  }
  return out;
}

Schema SchemaFromJson(const nlohmann::json& j) {
  Schema schema;
  if (!j.is_object()) throw SchemaError("schema must be a JSON object");
  if (!j.contains("outcome")) throw SchemaError("schema missing 'outcome'");
  if (!j.contains("treatment")) throw SchemaError("schema missing 'treatment'");
  schema.outcome = j.at("outcome").get<std::string>();
  schema.treatment = j.at("treatment").get<std::string>();
  if (j.contains("propensity")) {
    const auto& p = j.at("propensity");
    if (p.is_number()) {
      schema.propensity = p.get<double>();
    } else if (p.is_string()) {
      schema.propensity = p.get<std::string>();
    } else {
      throw SchemaError("'propensity' must be a column name or a number");
    }
  }
  if (j.contains("covariates")) {
    schema.covariates = j.at("covariates").get<std::vector<std::string>>();
  }
  if (j.contains("one_hot")) {
    for (const auto& [column, reference] : j.at("one_hot").items()) {
      schema.one_hot.emplace_back(column, reference.get<long long>());
    }
  }
  if (j.contains("overlap_bound")) {
    schema.overlap_bound = j.at("overlap_bound").get<double>();
  }
  return schema;
}

nlohmann::json SchemaToJson(const Schema& schema) {
  nlohmann::json j;
  j["outcome"] = schema.outcome;
  j["treatment"] = schema.treatment;
  if (const auto* name = std::get_if<std::string>(&schema.propensity)) {
    j["propensity"] = *name;
  } else {
    j["propensity"] = std::get<double>(schema.propensity);
  }
  j["covariates"] = schema.covariates;
  nlohmann::json one_hot = nlohmann::json::object();
  for (const auto& [column, reference] : schema.one_hot) {
    one_hot[column] = reference;
  }
  j["one_hot"] = one_hot;
  j["overlap_bound"] = schema.overlap_bound;
  return j;
}

size_t CsvTable::ColumnIndex(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw SchemaError("column '" + name + "' not found");
  }
  return static_cast<size_t>(it - header.begin());
}

bool CsvTable::HasColumn(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable ParseCsv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (first) {
      // Tolerate a UTF-8 byte-order mark.
      if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      table.header = SplitRecord(line);
      for (auto& name : table.header) name = Trim(name);
      first = false;
      continue;
    }
    if (Trim(line).empty()) continue;
    auto fields = SplitRecord(line);
    if (fields.size() != table.header.size()) {
      throw ValidationError("line " + std::to_string(line_number) + " has " +
                            std::to_string(fields.size()) +
                            " fields, header has " +
                            std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (first) throw ValidationError("CSV input is empty");
  return table;
}

CsvTable ReadCsvTable(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParseCsv(buffer.str());
}

Vector NumericColumn(const CsvTable& table, const std::string& name) {
  const size_t col = table.ColumnIndex(name);
  Vector out(static_cast<Eigen::Index>(table.rows.size()));
  std::vector<size_t> bad_rows;
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const auto value = ParseDouble(table.rows[i][col]);
    if (!value) {
      bad_rows.push_back(i + 1);
      continue;
    }
    out[static_cast<Eigen::Index>(i)] = *value;
  }
  if (!bad_rows.empty()) {
    throw ValidationError("column '" + name +
                          "' has missing or unparseable values in rows " +
                          FormatRows(bad_rows));
  }
  return out;
}

Dataset DatasetFromTable(const CsvTable& table, const Schema& schema) {
  if (schema.outcome.empty()) throw SchemaError("schema names no outcome");
  if (schema.treatment.empty()) throw SchemaError("schema names no treatment");
  const size_t n = table.rows.size();

  Dataset d;
  d.y = NumericColumn(table, schema.outcome);
  d.t = NumericColumn(table, schema.treatment);

  std::set<std::string> claimed = {schema.outcome, schema.treatment};
  if (const auto* name = std::get_if<std::string>(&schema.propensity)) {
    d.propensity = NumericColumn(table, *name);
    claimed.insert(*name);
  } else {
    d.propensity =
        Vector::Constant(static_cast<Eigen::Index>(n),
                         std::get<double>(schema.propensity));
  }

  std::vector<std::string> covariates = schema.covariates;
  if (covariates.empty()) {
    for (const auto& name : table.header) {
      if (!claimed.contains(name)) covariates.push_back(name);
    }
  }
  for (const auto& [column, reference] : schema.one_hot) {
    (void)reference;
    if (std::find(covariates.begin(), covariates.end(), column) ==
        covariates.end()) {
      covariates.push_back(column);
    }
  }

  std::map<std::string, long long> one_hot(schema.one_hot.begin(),
                                           schema.one_hot.end());
  std::vector<Vector> columns;
  for (const auto& name : covariates) {
    const Vector raw = NumericColumn(table, name);
    const auto it = one_hot.find(name);
    if (it == one_hot.end()) {
      columns.push_back(raw);
      d.column_names.push_back(name);
      continue;
    }
    std::vector<long long> counts(n);
    std::vector<size_t> bad_rows;
    for (size_t i = 0; i < n; ++i) {
      const double v = raw[static_cast<Eigen::Index>(i)];
      if (v < 0.0 || v != std::floor(v)) bad_rows.push_back(i + 1);
      counts[i] = static_cast<long long>(v);
    }
    if (!bad_rows.empty()) {
      throw ValidationError("one-hot column '" + name +
                            "' needs non-negative integers; bad rows " +
                            FormatRows(bad_rows));
    }
    const auto encoded = OneHotCount(counts, it->second, name);
    for (Eigen::Index j = 0; j < encoded.indicators.cols(); ++j) {
      columns.push_back(encoded.indicators.col(j));
      d.column_names.push_back(encoded.names[static_cast<size_t>(j)]);
    }
  }

  d.x.resize(static_cast<Eigen::Index>(n),
             static_cast<Eigen::Index>(columns.size()));
  for (size_t j = 0; j < columns.size(); ++j) {
    d.x.col(static_cast<Eigen::Index>(j)) = columns[j];
  }
  ValidateDataset(d, schema.overlap_bound);
  return d;
}

Dataset LoadCsv(const std::string& path, const Schema& schema) {
  return DatasetFromTable(ReadCsvTable(path), schema);
}

void WriteCsv(const std::string& path, const Dataset& d,
              const std::vector<std::pair<std::string, Vector>>& extra) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  out << "y,t,propensity";
  for (const auto& name : d.column_names) out << ',' << name;
  for (const auto& [name, values] : extra) out << ',' << name;
  out << '\n';
  for (size_t i = 0; i < d.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out << FormatReal(d.y[row]) << ',' << FormatReal(d.t[row]) << ','
        << FormatReal(d.propensity[row]);
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
      out << ',' << FormatReal(d.x(row, j));
    }
    for (const auto& [name, values] : extra) {
      out << ',' << FormatReal(values[row]);
    }
    out << '\n';
  }
  if (!out) throw Error("write to '" + path + "' failed");
}

Schema WrittenCsvSchema() {
  Schema schema;
  schema.outcome = "y";
  schema.treatment = "t";
  schema.propensity = std::string("propensity");
  return schema;
}

SplitIndices TrainTestIndices(size_t n, double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ArgumentError("test fraction must lie in (0, 1)");
  }
  const auto test_size = static_cast<size_t>(
      std::llround(static_cast<double>(n) * test_fraction));
  if (test_size == 0 || test_size >= n) {
    throw ArgumentError("split leaves an empty train or test set");
  }
  Rng rng(seed);
  const auto perm = Permutation(n, rng);
  SplitIndices split;
  split.test.assign(perm.begin(), perm.begin() + static_cast<long>(test_size));
  split.train.assign(perm.begin() + static_cast<long>(test_size), perm.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

std::pair<Dataset, Dataset> TrainTestSplit(const Dataset& d,
                                           double test_fraction,
                                           uint64_t seed) {
  const auto split = TrainTestIndices(d.n(), test_fraction, seed);
  return {Subset(d, split.train), Subset(d, split.test)};
}

}  // namespace dipw
