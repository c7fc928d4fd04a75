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

// Tabular experiment data: the Dataset model, CSV ingestion, count
// one-hot encoding, column standardization, fold plans, and splits.

#ifndef DIPW_DATA_H_
#define DIPW_DATA_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dipw/common.h"
#include "json.hpp"

namespace dipw {

// Default overlap bound: propensities must lie strictly inside (xi, 1 - xi).
inline constexpr double kDefaultOverlapBound = 0.01;

// Randomized-experiment sample. Immutable by convention once validated.
struct Dataset {
  Vector y;
  Vector t;           // 0/1 treatment indicators.
  Vector propensity;  // Known P(T = 1 | X) per unit.
  Matrix x;           // n x p covariates.
  std::vector<std::string> column_names;

  size_t n() const { return static_cast<size_t>(y.size()); }
  size_t p() const { return static_cast<size_t>(x.cols()); }
};

// Throws ValidationError describing the first violated invariant.
void ValidateDataset(const Dataset& d,
                     double overlap_bound = kDefaultOverlapBound);

// Rows of `d` in the given order.
Dataset Subset(const Dataset& d, std::span<const size_t> rows);
Vector SubsetRows(const Vector& v, std::span<const size_t> rows);
Matrix SubsetRows(const Matrix& m, std::span<const size_t> rows);

struct FoldPlan {
  int k = 0;
  std::vector<int> assignment;  // Fold index per unit, in [0, k).
  uint64_t seed = 0;

  size_t n() const { return assignment.size(); }
  std::vector<size_t> Members(int fold) const;
  std::vector<size_t> Complement(int fold) const;
};

// Seeded permutation dealt round-robin into k folds, so fold sizes differ
// by at most one. Throws ArgumentError unless 2 <= k <= n.
FoldPlan MakeFolds(size_t n, int k, uint64_t seed);

struct StandardizationRecord {
  Vector mean;
  Vector sd;                  // Strictly positive; 1 for constant columns.
  std::vector<bool> constant; // Constant columns are passed through as-is.
};

// Centers and scales every non-constant column to mean 0 and
// n-denominator standard deviation 1.
std::pair<Matrix, StandardizationRecord> Standardize(const Matrix& x);
Matrix ApplyStandardization(const Matrix& x, const StandardizationRecord& rec);
Matrix Destandardize(const Matrix& z, const StandardizationRecord& rec);

struct OneHotColumns {
  Matrix indicators;               // n x (levels - 1).
  std::vector<std::string> names;  // "<base>_<level>".
  std::vector<long long> levels;   // Non-reference levels, ascending.
};

// One indicator column per observed non-reference level. Throws
// ArgumentError when `reference` is not observed or a value is negative.
OneHotColumns OneHotCount(std::span<const long long> counts,
                          long long reference,
                          const std::string& base_name = "level");

// Column-role map for CSV ingestion.
struct Schema {
  std::string outcome;
  std::string treatment;
  // Column name, or a constant probability shared by every unit.
  std::variant<std::string, double> propensity = 0.5;
  // Empty means "every column not claimed by another role".
  std::vector<std::string> covariates;
  // Count column -> reference level; expanded via OneHotCount.
  std::vector<std::pair<std::string, long long>> one_hot;
  double overlap_bound = kDefaultOverlapBound;
};

// Accepts {"outcome", "treatment", "propensity", "covariates", "one_hot"}.
Schema SchemaFromJson(const nlohmann::json& j);
nlohmann::json SchemaToJson(const Schema& schema);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws SchemaError when absent.
  size_t ColumnIndex(const std::string& name) const;
  bool HasColumn(const std::string& name) const;
};

CsvTable ReadCsvTable(const std::string& path);
CsvTable ParseCsv(const std::string& text);

Dataset DatasetFromTable(const CsvTable& table, const Schema& schema);
Dataset LoadCsv(const std::string& path, const Schema& schema);

// Parses one numeric column; ValidationError lists unparseable rows.
Vector NumericColumn(const CsvTable& table, const std::string& name);

// Writes y, t, propensity, then covariates under their names, followed by
// any extra columns. Reals are printed with 17 significant digits.
void WriteCsv(const std::string& path, const Dataset& d,
              const std::vector<std::pair<std::string, Vector>>& extra = {});

// The schema matching WriteCsv's column layout.
Schema WrittenCsvSchema();

struct SplitIndices {
  std::vector<size_t> train;
  std::vector<size_t> test;
};

// Test size is round(n * test_fraction). Throws ArgumentError when the
// fraction is outside (0, 1) or either side would be empty.
SplitIndices TrainTestIndices(size_t n, double test_fraction, uint64_t seed);
std::pair<Dataset, Dataset> TrainTestSplit(const Dataset& d,
                                           double test_fraction,
                                           uint64_t seed);

}  // namespace dipw

#endif  // DIPW_DATA_H_
