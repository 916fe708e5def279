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

#include "evgbm/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evgbm/errors.hpp"
#include "evgbm/io.hpp"
#include "evgbm/rng.hpp"

namespace evgbm {
namespace {

// Linear interpolation between order statistics. Sorts `v`.
double empirical_quantile(std::vector<double>& v, double level) {
  std::sort(v.begin(), v.end());
  const double pos = level * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  const double w = pos - static_cast<double>(i);
  return v[i] + w * (v[i + 1] - v[i]);
}

// First n entries of a seeded permutation of 0..rows-1.
std::vector<std::size_t> subsample(std::size_t rows, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n >= rows) return idx;
  CounterRng rng(seed, {0x9d9});
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(rows - i));
    std::swap(idx[i], idx[std::min(j, rows - 1)]);
  }
  idx.resize(n);
  return idx;
}

}  // namespace

OutputMap output_map(const LossSpec& loss, std::string_view name, int cls) {
  if (cls < 0 || cls >= loss.n_outputs()) {
    throw ConfigError("output index " + std::to_string(cls) + " out of range");
  }
  const auto c = static_cast<std::size_t>(cls);
  if (name == "raw") return [c](std::span<const double> s) { return s[c]; };
  if (name == "mean") {
    if (loss.kind == LossKind::kPoisson) {
      return [](std::span<const double> s) { return std::exp(s[0]); };
    }
    if (loss.kind == LossKind::kDgpd) {
      const double alpha = loss.alpha;
      return [alpha](std::span<const double> s) { return loss::dgpd_mean(s[0], alpha); };
    }
    throw ConfigError("mean transform needs a poisson or dgpd model");
  }
  if (name == "prob") {
    if (!loss.multiclass()) throw ConfigError("prob transform needs a cross_entropy model");
    return [c](std::span<const double> s) { return loss::softmax(s)[c]; };
  }
  throw ConfigError("unknown transform '" + std::string(name) + "'");
}

PdpResult partial_dependence(const BoostedModel& model, const Matrix& x,
                             std::span<const std::size_t> features, const Matrix& grid,
                             const PdpOptions& options) {
  if (features.empty()) throw DataError("partial dependence needs at least one feature");
  if (x.cols() != model.n_features()) throw DataError("feature count does not match the model");
  if (x.rows() == 0) throw DataError("partial dependence needs data");
  if (grid.cols() != features.size()) throw DataError("grid columns do not match the features");
  for (std::size_t a = 0; a < features.size(); ++a) {
    if (features[a] >= x.cols()) throw DataError("feature index out of range");
    for (std::size_t b = 0; b < a; ++b) {
      if (features[a] == features[b]) throw DataError("repeated feature in partial dependence");
    }
  }
  if (!(options.lo_level >= 0 && options.lo_level <= options.hi_level && options.hi_level <= 1)) {
    throw ConfigError("band levels must satisfy 0 <= lo <= hi <= 1");
  }
  if (options.n_sub == 0) throw ConfigError("n_sub must be positive");
  const OutputMap transform = options.transform ? options.transform : output_map(model.loss, "raw");

  const auto rows = subsample(x.rows(), options.n_sub, options.seed);
  Matrix work = x.select_rows(rows);

  PdpResult out;
  out.features.assign(features.begin(), features.end());
  out.grid = grid;
  std::vector<double> vals(rows.size());
  for (std::size_t g = 0; g < grid.rows(); ++g) {
    for (std::size_t i = 0; i < work.rows(); ++i) {
      for (std::size_t a = 0; a < features.size(); ++a) work(i, features[a]) = grid(g, a);
    }
    const Matrix raw = predict_raw(model, work);
    // Running mean: exact when every evaluation is equal.
    double mean = 0.0;
    for (std::size_t i = 0; i < raw.rows(); ++i) {
      vals[i] = transform(raw.row(i));
      mean += (vals[i] - mean) / static_cast<double>(i + 1);
    }
    out.estimate.push_back(mean);
    out.lo.push_back(empirical_quantile(vals, options.lo_level));
    out.hi.push_back(empirical_quantile(vals, options.hi_level));
  }
  return out;
}

std::vector<double> quantile_grid(const Matrix& x, std::size_t feature, std::size_t n, double lo,
                                  double hi) {
  if (feature >= x.cols()) throw DataError("feature index out of range");
  if (n == 0) throw ConfigError("grid size must be positive");
  std::vector<double> v;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (!is_missing(x(i, feature))) v.push_back(x(i, feature));
  }
  if (v.empty()) throw DataError("feature has no observed values");
  const double a = empirical_quantile(v, lo);
  const double b = empirical_quantile(v, hi);
  std::vector<double> grid(n, a);
  for (std::size_t k = 1; k < n; ++k) {
    grid[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  return grid;
}

ImportanceMetric parse_importance_metric(std::string_view name) {
  if (name == "gain") return ImportanceMetric::kGain;
  if (name == "coverage") return ImportanceMetric::kCoverage;
  throw ConfigError("unknown importance metric '" + std::string(name) + "'");
}

std::vector<std::pair<std::string, double>> importance(const BoostedModel& model,
                                                       ImportanceMetric metric) {
  std::vector<double> total(model.n_features(), 0.0);
  std::vector<bool> used(model.n_features(), false);
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) continue;
      const auto j = static_cast<std::size_t>(node.feature);
      if (j >= total.size()) {
        total.resize(j + 1, 0.0);
        used.resize(j + 1, false);
      }
      total[j] += metric == ImportanceMetric::kGain ? node.gain : node.cover;
      used[j] = true;
    }
  }
  const double sum = std::accumulate(total.begin(), total.end(), 0.0);
  std::vector<std::pair<std::string, double>> out;
  if (!(sum > 0)) return out;
  for (std::size_t j = 0; j < total.size(); ++j) {
    if (!used[j]) continue;
    std::string name = j < model.feature_names.size() ? model.feature_names[j]
                                                      : "f" + std::to_string(j);
    out.emplace_back(std::move(name), total[j] / sum);
  }
  return out;
}

std::string pdp_csv(const PdpResult& pdp, const std::vector<std::string>& names) {
  if (names.size() != pdp.grid.cols()) throw DataError("one name per grid column expected");
  std::vector<std::string> header = names;
  for (const char* h : {"estimate", "lo", "hi"}) header.emplace_back(h);
  std::string out = io::csv_line(header);
  for (std::size_t g = 0; g < pdp.grid.rows(); ++g) {
    std::vector<std::string> row;
    for (double v : pdp.grid.row(g)) row.push_back(io::format_double(v));
    row.push_back(io::format_double(pdp.estimate[g]));
    row.push_back(io::format_double(pdp.lo[g]));
    row.push_back(io::format_double(pdp.hi[g]));
    out += io::csv_line(row);
  }
  return out;
}

std::string importance_csv(const std::vector<std::pair<std::string, double>>& imp) {
  std::string out = io::csv_line(std::vector<std::string>{"feature", "proportion"});
  for (const auto& [name, v] : imp) {
    out += io::csv_line(std::vector<std::string>{name, io::format_double(v)});
  }
  return out;
}

}  // namespace evgbm
