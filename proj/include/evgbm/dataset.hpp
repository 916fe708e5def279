// Copyright 2026 The evgbm Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EVGBM_DATASET_HPP_
#define EVGBM_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evgbm/booster.hpp"
#include "evgbm/matrix.hpp"

namespace evgbm {

struct GridCell {
  int id = 0;
  double lon = 0.0;
  double lat = 0.0;
};

/// One (cell, year, month) record. Masked responses and missing covariates
/// are NaN.
struct Observation {
  int cell = 0;
  int year = 0;
  int month = 0;
  std::vector<double> covariates;
  double cnt = kMissing;
  double ba = kMissing;
};

/// Column mapping and validation rules for the CSV dialect.
struct CsvSchema {
  std::string lon = "lon";
  std::string lat = "lat";
  std::string year = "year";
  std::string month = "month";
  std::string cnt = "cnt";
  std::string ba = "ba";
  std::string missing_marker = "NA";
  std::vector<int> season = {3, 4, 5, 6, 7, 8, 9};
  double grid_spacing = 0.5;
};

class GridDataset {
 public:
  GridDataset() = default;
  /// Validates rows against the cells: known cell ids, one row per
  /// (cell, year, month), constant covariate count, cnt = 0 => ba = 0.
  GridDataset(std::vector<GridCell> cells, std::vector<Observation> rows,
              std::vector<std::string> covariate_names, double grid_spacing = 0.5);

  const std::vector<GridCell>& cells() const { return cells_; }
  const std::vector<Observation>& rows() const { return rows_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  std::size_t size() const { return rows_.size(); }
  double grid_spacing() const { return grid_spacing_; }

  /// Index of a covariate; throws DataError if unknown.
  std::size_t covariate_index(std::string_view name) const;
  /// Columns in the given order; throws DataError on unknown names.
  Matrix feature_matrix(std::span<const std::string> names) const;
  /// All covariates.
  Matrix feature_matrix() const;

  /// Queen (8-cell) neighbours of a cell, excluding the cell itself.
  const std::vector<int>& neighbors(int cell) const { return neighbors_[cell]; }

  /// New dataset with the rows at `idx`, in order.
  GridDataset subset(std::span<const std::size_t> idx) const;
  /// New dataset with one covariate appended.
  GridDataset with_covariate(std::string name, std::span<const double> values) const;
  /// New dataset with responses replaced.
  GridDataset with_responses(std::span<const double> cnt, std::span<const double> ba) const;

 private:
  std::vector<GridCell> cells_;
  std::vector<Observation> rows_;
  std::vector<std::string> covariate_names_;
  double grid_spacing_ = 0.5;
  std::vector<std::vector<int>> neighbors_;
};

GridDataset parse_dataset(std::string_view csv_text, const CsvSchema& schema = {});
GridDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
/// Same dialect as load_csv: lon, lat, year, month, cnt, ba, covariates.
std::string dataset_to_csv(const GridDataset& ds, const CsvSchema& schema = {});
void save_csv(const GridDataset& ds, const std::filesystem::path& path,
              const CsvSchema& schema = {});

/// Appends `<name>_nbr`: the mean of the covariate over present neighbours
/// in the same (year, month), or the row's own value if there are none.
GridDataset neighbor_average(const GridDataset& ds, std::string_view covariate);

/// Masked cnt with observed ba = 0 becomes 0, and masked ba with observed
/// cnt = 0 becomes 0.
GridDataset cross_fill_zeros(const GridDataset& ds);

/// Appends `cnt_cov`: observed cnt, else the dGPD mean predicted by `aux`.
GridDataset impute_cnt_covariate(const GridDataset& ds, const BoostedModel& aux);

/// Size classes: 0 for ba = 0, 1 for 0 < ba <= u, 2 for ba > u.
int ba_class(double ba, double u);

/// Appends p_zero, p_med, p_large: observed class indicators where ba is
/// observed, else the softmax probabilities of `aux`.
GridDataset impute_ba_class_covariates(const GridDataset& ds, const BoostedModel& aux,
                                       double u = 200.0);

}  // namespace evgbm

#endif  // EVGBM_DATASET_HPP_
