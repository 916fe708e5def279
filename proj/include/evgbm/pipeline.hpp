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

#ifndef EVGBM_PIPELINE_HPP_
#define EVGBM_PIPELINE_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "evgbm/booster.hpp"
#include "evgbm/dataset.hpp"
#include "evgbm/evaluate.hpp"
#include "evgbm/mixture.hpp"
#include "evgbm/spatialcv.hpp"

namespace evgbm {

/// Response columns a model can be trained on.
enum class Response { kCnt, kBa, kBaClass, kBaBulk, kBaExcess };
Response parse_response(std::string_view name);
std::string_view to_string(Response r);
/// Which masking process hides this response.
MaskResponse mask_of(Response r);
/// Per-row response values; NaN where the row cannot be used.
std::vector<double> response_values(const GridDataset& ds, Response r, double u);

/// Feature engineering applied before fitting: zero cross-filling,
/// neighbour averages and cross-response imputation. Auxiliary imputation
/// models are fitted on the dataset they are applied to.
struct FeaturePlan {
  bool cross_fill = false;
  std::vector<std::string> neighbor_average;
  bool impute_cnt = false;
  bool impute_ba_class = false;
  double u = 200.0;
  double aux_alpha = 52.0;
  TrainParams aux_params;
  /// Features of the auxiliary models; empty means every covariate present
  /// before imputation (original ones plus neighbour averages).
  std::vector<std::string> aux_features;

  GridDataset apply(const GridDataset& ds) const;
};

/// What to fit and how to score it.
struct Recipe {
  FeaturePlan plan;
  /// Model features after the plan; empty means all covariates.
  std::vector<std::string> features;
  bool mixture = false;
  Response response = Response::kCnt;
  LossSpec loss;
  TrainParams params;
  MixtureTrainSpec mixture_spec;
  /// Threshold score when true, mean validation loss otherwise.
  bool threshold_score = true;
  ThresholdScoreSpec score = ThresholdScoreSpec::counts();

  MaskResponse mask() const { return mixture ? MaskResponse::kBa : mask_of(response); }
};

/// A fitted single model or mixture, bound to its feature names.
struct FittedRecipe {
  std::optional<BoostedModel> model;
  std::optional<MixtureModel> mixture;
  std::vector<std::string> features;

  /// Validation score of the given rows of an engineered dataset, using
  /// the first n_rounds rounds (-1 for all). `truth` holds the raw response
  /// (cnt or ba) of each row.
  double score(const Recipe& recipe, const GridDataset& prepared,
               std::span<const std::size_t> rows, std::span<const double> truth,
               int n_rounds) const;
  /// JSON documents of the fitted model(s), concatenated.
  std::string documents() const;
};

/// Fits on the rows of `prepared` (already engineered) listed in `rows`,
/// skipping rows whose response is unavailable.
FittedRecipe fit_recipe(const Recipe& recipe, const GridDataset& prepared,
                        std::span<const std::size_t> rows);

struct CvOptions {
  std::vector<int> tree_counts;
  /// Called with each fold's fitted model, for inspection.
  std::function<void(int, const FittedRecipe&)> on_fit;
};

/// For each fold: masks both responses at the fold's keys, applies the
/// feature plan, fits on rows outside the validation set and scores the
/// validation rows at every tree count.
CvResult run_cv(const GridDataset& ds, const FoldSet& folds, const Recipe& recipe,
                const CvOptions& options);

/// One tunable dimension. Names: lambda, eta, max_leaves, colsample,
/// learning_rate, n_quantile_bins, alpha, xi, kappa, k; mixture recipes
/// prefix training parameters with classifier., bulk. or tail.
struct TuneDim {
  std::string name;
  double lo;
  double hi;
  bool integer = false;
};

/// Sets a named parameter on a recipe. Throws ConfigError for unknown names.
void set_recipe_param(Recipe& recipe, const std::string& name, double value);

struct TuneRecord {
  int iteration;
  std::vector<double> point;
  int selected_trees;
  double score;
};

/// Bayesian optimization of the CV score at the one-SE tree count.
std::vector<TuneRecord> tune(const GridDataset& ds, const FoldSet& folds, const Recipe& base,
                             const std::vector<TuneDim>& dims, const CvOptions& options,
                             int max_iters, std::uint64_t seed);

std::string tuning_log_csv(const std::vector<TuneDim>& dims,
                           const std::vector<TuneRecord>& records);

}  // namespace evgbm

#endif  // EVGBM_PIPELINE_HPP_
