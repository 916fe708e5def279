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

#include "evgbm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "evgbm/errors.hpp"
#include "evgbm/io.hpp"
#include "evgbm/losses.hpp"

namespace evgbm {

namespace {

using Key = std::tuple<int, int, int>;  // cell, year, month

std::int64_t grid_index(double v, double origin, double spacing) {
  return static_cast<std::int64_t>(std::llround((v - origin) / spacing));
}

}  // namespace

GridDataset::GridDataset(std::vector<GridCell> cells, std::vector<Observation> rows,
                         std::vector<std::string> covariate_names, double grid_spacing)
    : cells_(std::move(cells)), rows_(std::move(rows)),
      covariate_names_(std::move(covariate_names)), grid_spacing_(grid_spacing) {
  if (!(grid_spacing_ > 0.0)) throw ConfigError("grid spacing must be positive");
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (cells_[i].id != static_cast<int>(i)) throw DataError("cell ids must be 0..n-1");
  }
  std::set<std::string> names(covariate_names_.begin(), covariate_names_.end());
  if (names.size() != covariate_names_.size()) throw DataError("duplicate covariate names");

  std::set<Key> seen;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    const std::string where = "row " + std::to_string(i);
    if (r.cell < 0 || r.cell >= static_cast<int>(cells_.size())) {
      throw DataError(where + " references unknown cell " + std::to_string(r.cell));
    }
    if (r.covariates.size() != covariate_names_.size()) {
      throw DataError(where + " has " + std::to_string(r.covariates.size()) +
                      " covariates, expected " + std::to_string(covariate_names_.size()));
    }
    if (!seen.insert({r.cell, r.year, r.month}).second) {
      throw DataError(where + " duplicates (cell, year, month)");
    }
    if (!is_missing(r.cnt) && !(r.cnt >= 0.0 && r.cnt == std::floor(r.cnt))) {
      throw DataError(where + ": cnt must be a nonnegative integer");
    }
    if (!is_missing(r.ba) && !(r.ba >= 0.0 && std::isfinite(r.ba))) {
      throw DataError(where + ": ba must be nonnegative");
    }
    if (r.cnt == 0.0 && !is_missing(r.ba) && r.ba != 0.0) {
      throw DataError(where + ": cnt is 0 but ba is positive");
    }
  }

  // Neighbours from integer grid coordinates.
  neighbors_.assign(cells_.size(), {});
  if (cells_.empty()) return;
  const double lon0 = cells_[0].lon;
  const double lat0 = cells_[0].lat;
  std::map<std::pair<std::int64_t, std::int64_t>, int> at;
  for (const auto& c : cells_) {
    at[{grid_index(c.lon, lon0, grid_spacing_), grid_index(c.lat, lat0, grid_spacing_)}] = c.id;
  }
  for (const auto& c : cells_) {
    const auto ix = grid_index(c.lon, lon0, grid_spacing_);
    const auto iy = grid_index(c.lat, lat0, grid_spacing_);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        if (dx == 0 && dy == 0) continue;
        const auto it = at.find({ix + dx, iy + dy});
        if (it != at.end()) neighbors_[c.id].push_back(it->second);
      }
    }
    std::sort(neighbors_[c.id].begin(), neighbors_[c.id].end());
  }
}

std::size_t GridDataset::covariate_index(std::string_view name) const {
  const auto it = std::find(covariate_names_.begin(), covariate_names_.end(), name);
  if (it == covariate_names_.end()) {
    throw DataError("unknown covariate '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - covariate_names_.begin());
}

Matrix GridDataset::feature_matrix(std::span<const std::string> names) const {
  std::vector<std::size_t> cols;
  for (const auto& n : names) cols.push_back(covariate_index(n));
  Matrix out(rows_.size(), cols.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = rows_[i].covariates[cols[j]];
  }
  return out;
}

Matrix GridDataset::feature_matrix() const { return feature_matrix(covariate_names_); }

GridDataset GridDataset::subset(std::span<const std::size_t> idx) const {
  std::vector<Observation> rows;
  rows.reserve(idx.size());
  for (auto i : idx) {
    if (i >= rows_.size()) throw DataError("row index out of range");
    rows.push_back(rows_[i]);
  }
  return GridDataset(cells_, std::move(rows), covariate_names_, grid_spacing_);
}

GridDataset GridDataset::with_covariate(std::string name, std::span<const double> values) const {
  if (values.size() != rows_.size()) throw DataError("covariate length mismatch");
  auto rows = rows_;
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].covariates.push_back(values[i]);
  auto names = covariate_names_;
  names.push_back(std::move(name));
  return GridDataset(cells_, std::move(rows), std::move(names), grid_spacing_);
}

GridDataset GridDataset::with_responses(std::span<const double> cnt,
                                        std::span<const double> ba) const {
  if (cnt.size() != rows_.size() || ba.size() != rows_.size()) {
    throw DataError("response length mismatch");
  }
  auto rows = rows_;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].cnt = cnt[i];
    rows[i].ba = ba[i];
  }
  return GridDataset(cells_, std::move(rows), covariate_names_, grid_spacing_);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

double parse_number(const std::string& s, const CsvSchema& schema, std::size_t line,
                    const std::string& column) {
  if (s == schema.missing_marker) return kMissing;
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw DataError("line " + std::to_string(line) + ": column '" + column +
                    "' is not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

GridDataset parse_dataset(std::string_view csv_text, const CsvSchema& schema) {
  if (!(schema.grid_spacing > 0.0)) throw ConfigError("grid spacing must be positive");
  const auto records = io::parse_csv(csv_text);
  if (records.empty()) throw DataError("dataset has no header");
  const auto& header = records[0].fields;
  auto find = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("dataset lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_lon = find(schema.lon), c_lat = find(schema.lat),
                    c_year = find(schema.year), c_month = find(schema.month),
                    c_cnt = find(schema.cnt), c_ba = find(schema.ba);
  const std::set<std::size_t> fixed{c_lon, c_lat, c_year, c_month, c_cnt, c_ba};
  if (fixed.size() != 6) throw ConfigError("schema maps two fields to one column");
  std::vector<std::size_t> cov_cols;
  std::vector<std::string> cov_names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (!fixed.count(j)) {
      cov_cols.push_back(j);
      cov_names.push_back(header[j]);
    }
  }
  const std::set<int> season(schema.season.begin(), schema.season.end());

  std::vector<GridCell> cells;
  std::map<std::pair<std::int64_t, std::int64_t>, int> cell_at;
  std::vector<Observation> rows;
  std::map<Key, std::size_t> seen;
  double lon0 = 0.0, lat0 = 0.0;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "line " + std::to_string(rec.line);
    if (rec.fields.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(rec.fields.size()));
    }
    auto num = [&](std::size_t c) { return parse_number(rec.fields[c], schema, rec.line, header[c]); };
    const double lon = num(c_lon), lat = num(c_lat), year = num(c_year), month = num(c_month);
    if (is_missing(lon) || is_missing(lat) || is_missing(year) || is_missing(month)) {
      throw DataError(where + ": coordinates, year and month must be present");
    }
    if (year != std::floor(year) || month != std::floor(month) || month < 1 || month > 12) {
      throw DataError(where + ": invalid year or month");
    }
    if (!season.count(static_cast<int>(month))) {
      throw DataError(where + ": month " + std::to_string(static_cast<int>(month)) +
                      " is outside the configured season");
    }
    if (cells.empty()) {
      // The first row fixes the grid offset.
      lon0 = lon;
      lat0 = lat;
    }
    const double fx = (lon - lon0) / schema.grid_spacing;
    const double fy = (lat - lat0) / schema.grid_spacing;
    if (std::abs(fx - std::round(fx)) > 1e-6 || std::abs(fy - std::round(fy)) > 1e-6) {
      throw DataError(where + ": coordinates (" + io::format_double(lon) + ", " +
                      io::format_double(lat) + ") are not on the grid");
    }
    const std::pair<std::int64_t, std::int64_t> ij{std::llround(fx), std::llround(fy)};
    auto it = cell_at.find(ij);
    if (it == cell_at.end()) {
      const int id = static_cast<int>(cells.size());
      cells.push_back({id, lon, lat});
      it = cell_at.emplace(ij, id).first;
    }
    Observation obs;
    obs.cell = it->second;
    obs.year = static_cast<int>(year);
    obs.month = static_cast<int>(month);
    obs.cnt = num(c_cnt);
    obs.ba = num(c_ba);
    for (auto c : cov_cols) obs.covariates.push_back(num(c));
    const auto [pos, fresh] = seen.emplace(Key{obs.cell, obs.year, obs.month}, rec.line);
    if (!fresh) {
      throw DataError(where + ": duplicate (cell, year, month), first seen on line " +
                      std::to_string(pos->second));
    }
    if (!is_missing(obs.cnt) && !(obs.cnt >= 0.0 && obs.cnt == std::floor(obs.cnt))) {
      throw DataError(where + ": cnt must be a nonnegative integer");
    }
    if (!is_missing(obs.ba) && !(obs.ba >= 0.0)) throw DataError(where + ": ba must be >= 0");
    if (obs.cnt == 0.0 && !is_missing(obs.ba) && obs.ba != 0.0) {
      throw DataError(where + ": cnt is 0 but ba is positive");
    }
    rows.push_back(std::move(obs));
  }
  return GridDataset(std::move(cells), std::move(rows), std::move(cov_names),
                     schema.grid_spacing);
}

GridDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  return parse_dataset(io::read_text_file(path), schema);
}

std::string dataset_to_csv(const GridDataset& ds, const CsvSchema& schema) {
  auto cell = [&](double v) {
    return is_missing(v) ? schema.missing_marker : io::format_double(v);
  };
  std::vector<std::string> header{schema.lon, schema.lat, schema.year,
                                  schema.month, schema.cnt, schema.ba};
  header.insert(header.end(), ds.covariate_names().begin(), ds.covariate_names().end());
  std::string out = io::csv_line(header);
  std::vector<std::string> fields;
  for (const auto& r : ds.rows()) {
    const auto& c = ds.cells()[r.cell];
    fields = {cell(c.lon), cell(c.lat), std::to_string(r.year), std::to_string(r.month),
              cell(r.cnt), cell(r.ba)};
    for (double v : r.covariates) fields.push_back(cell(v));
    out += io::csv_line(fields);
  }
  return out;
}

void save_csv(const GridDataset& ds, const std::filesystem::path& path,
              const CsvSchema& schema) {
  io::write_text_file(path, dataset_to_csv(ds, schema));
}

// ---------------------------------------------------------------------------
// Feature engineering

GridDataset neighbor_average(const GridDataset& ds, std::string_view covariate) {
  const std::size_t col = ds.covariate_index(covariate);
  std::map<Key, double> value;
  for (const auto& r : ds.rows()) value[{r.cell, r.year, r.month}] = r.covariates[col];
  std::vector<double> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.rows()[i];
    double sum = 0.0;
    int n = 0;
    for (int nb : ds.neighbors(r.cell)) {
      const auto it = value.find({nb, r.year, r.month});
      if (it != value.end() && !is_missing(it->second)) {
        sum += it->second;
        ++n;
      }
    }
    out[i] = n > 0 ? sum / n : r.covariates[col];
  }
  return ds.with_covariate(std::string(covariate) + "_nbr", out);
}

GridDataset cross_fill_zeros(const GridDataset& ds) {
  std::vector<double> cnt(ds.size()), ba(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.rows()[i];
    cnt[i] = r.cnt;
    ba[i] = r.ba;
    if (is_missing(r.cnt) && r.ba == 0.0) cnt[i] = 0.0;
    if (is_missing(r.ba) && r.cnt == 0.0) ba[i] = 0.0;
  }
  return ds.with_responses(cnt, ba);
}

GridDataset impute_cnt_covariate(const GridDataset& ds, const BoostedModel& aux) {
  if (aux.loss.kind != LossKind::kDgpd) {
    throw DataError("count imputation needs a dGPD model, got " +
                    std::string(to_string(aux.loss.kind)));
  }
  if (!(aux.loss.alpha > 1.0)) {
    throw DataError("dGPD mean does not exist for alpha <= 1");
  }
  const Matrix x = ds.feature_matrix(aux.feature_names);
  std::vector<double> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double cnt = ds.rows()[i].cnt;
    out[i] = is_missing(cnt) ? loss::dgpd_mean(predict_raw_row(aux, x.row(i))[0], aux.loss.alpha)
                             : cnt;
  }
  return ds.with_covariate("cnt_cov", out);
}

int ba_class(double ba, double u) {
  if (ba == 0.0) return 0;
  return ba <= u ? 1 : 2;
}

GridDataset impute_ba_class_covariates(const GridDataset& ds, const BoostedModel& aux,
                                       double u) {
  if (aux.loss.kind != LossKind::kCrossEntropy || aux.n_outputs() != 3) {
    throw DataError("size-class imputation needs a 3-class cross-entropy model");
  }
  const Matrix x = ds.feature_matrix(aux.feature_names);
  std::vector<double> p[3];
  for (auto& v : p) v.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double ba = ds.rows()[i].ba;
    std::vector<double> probs(3, 0.0);
    if (is_missing(ba)) {
      probs = loss::softmax(predict_raw_row(aux, x.row(i)));
    } else {
      probs[ba_class(ba, u)] = 1.0;
    }
    for (int c = 0; c < 3; ++c) p[c][i] = probs[c];
  }
  return ds.with_covariate("p_zero", p[0])
      .with_covariate("p_med", p[1])
      .with_covariate("p_large", p[2]);
}

}  // namespace evgbm
