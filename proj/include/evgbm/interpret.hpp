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

#ifndef EVGBM_INTERPRET_HPP_
#define EVGBM_INTERPRET_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evgbm/booster.hpp"
#include "evgbm/matrix.hpp"

namespace evgbm {

/// Maps one row of raw scores to the plotted quantity.
using OutputMap = std::function<double(std::span<const double>)>;

/// Builds an output map by name: "raw" (score of output `cls`), "mean"
/// (response mean for poisson and dgpd) or "prob" (softmax probability of
/// class `cls`). Throws ConfigError when the name does not fit the loss.
OutputMap output_map(const LossSpec& loss, std::string_view name, int cls = 0);

struct PdpOptions {
  std::size_t n_sub = 10000;  // capped at the number of rows
  OutputMap transform;        // empty: raw score of output 0
  std::uint64_t seed = 0;
  double lo_level = 0.05;
  double hi_level = 0.95;
};

struct PdpResult {
  std::vector<std::size_t> features;  // columns of S
  Matrix grid;                        // one row per grid point, |S| columns
  std::vector<double> estimate;
  std::vector<double> lo;
  std::vector<double> hi;
};

/// Monte Carlo partial dependence: at each grid point the columns in
/// `features` are overwritten in a seeded subsample of `x` and the
/// transformed predictions are averaged. The bands are empirical quantiles
/// of the same per-row evaluations. Throws DataError on bad shapes.
PdpResult partial_dependence(const BoostedModel& model, const Matrix& x,
                             std::span<const std::size_t> features, const Matrix& grid,
                             const PdpOptions& options = {});

/// Evenly spaced grid between the empirical lo and hi quantiles of a column.
std::vector<double> quantile_grid(const Matrix& x, std::size_t feature, std::size_t n,
                                  double lo = 0.05, double hi = 0.95);

enum class ImportanceMetric { kGain, kCoverage };
ImportanceMetric parse_importance_metric(std::string_view name);

/// Share of split gain (or of hessian cover) attributed to each feature,
/// in model feature order, features without splits omitted. Empty when the
/// model has no splits.
std::vector<std::pair<std::string, double>> importance(const BoostedModel& model,
                                                       ImportanceMetric metric);

std::string pdp_csv(const PdpResult& pdp, const std::vector<std::string>& names);
std::string importance_csv(const std::vector<std::pair<std::string, double>>& imp);

}  // namespace evgbm

#endif  // EVGBM_INTERPRET_HPP_
