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

#ifndef EVGBM_BOOSTER_HPP_
#define EVGBM_BOOSTER_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evgbm/losses.hpp"
#include "evgbm/matrix.hpp"
#include "evgbm/tree.hpp"

namespace evgbm {

struct TrainParams {
  int n_trees = 100;
  double lambda_reg = 1.0;
  double eta = 0.0;
  int max_leaves = 8;
  double colsample = 1.0;
  int n_quantile_bins = 32;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  TreeParams tree_params() const;
};

/// Training targets. For cross-entropy `y` holds class indices and
/// `weights` the per-row weights (empty means all ones); other losses
/// ignore `weights`.
struct Responses {
  std::vector<double> y;
  std::vector<double> weights;

  std::size_t size() const { return y.size(); }
  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
};

/// Additive tree model: raw score = base_score + sum of tree outputs. For
/// multiclass losses trees are stored round-major, trees[t * C + c].
struct BoostedModel {
  LossSpec loss;
  std::vector<double> base_score;
  std::vector<RegressionTree> trees;
  TrainParams params;
  std::vector<std::string> feature_names;

  int n_outputs() const { return static_cast<int>(base_score.size()); }
  int n_rounds() const;
  std::size_t n_features() const { return feature_names.size(); }
};

/// Per-round total training loss; entry 0 is the loss at the base score.
struct TrainingTrace {
  std::vector<double> loss;
};

/// The constant score minimizing the summed loss over all rows: safeguarded
/// Newton iteration for scalar losses, log class frequencies for
/// cross-entropy. Throws NumericError if no minimizer is bracketed.
std::vector<double> initial_estimate(const Responses& y, const LossSpec& loss);

/// Sum of loss values at the given raw scores (n x n_outputs).
double total_loss(const LossSpec& loss, const Responses& y, const Matrix& raw);

BoostedModel fit(const Matrix& x, const Responses& y, const LossSpec& loss,
                 const TrainParams& params, std::vector<std::string> feature_names = {},
                 TrainingTrace* trace = nullptr);

/// Raw scores for every row, n x n_outputs. With n_rounds >= 0 only the
/// first n_rounds boosting rounds contribute.
Matrix predict_raw(const BoostedModel& model, const Matrix& x, int n_rounds = -1);
std::vector<double> predict_raw_row(const BoostedModel& model, std::span<const double> x,
                                    int n_rounds = -1);

/// Versioned JSON model document.
inline constexpr int kModelFormatVersion = 1;
std::string save_model(const BoostedModel& model);
BoostedModel load_model(std::string_view document);
void save_model_file(const BoostedModel& model, const std::filesystem::path& path);
BoostedModel load_model_file(const std::filesystem::path& path);

}  // namespace evgbm

#endif  // EVGBM_BOOSTER_HPP_
