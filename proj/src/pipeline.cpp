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

#include "evgbm/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "evgbm/errors.hpp"
#include "evgbm/io.hpp"
#include "evgbm/losses.hpp"

namespace evgbm {

Response parse_response(std::string_view name) {
  if (name == "cnt") return Response::kCnt;
  if (name == "ba") return Response::kBa;
  if (name == "ba_class") return Response::kBaClass;
  if (name == "ba_bulk") return Response::kBaBulk;
  if (name == "ba_excess") return Response::kBaExcess;
  throw ConfigError("unknown response '" + std::string(name) + "'");
}

std::string_view to_string(Response r) {
  switch (r) {
    case Response::kCnt: return "cnt";
    case Response::kBa: return "ba";
    case Response::kBaClass: return "ba_class";
    case Response::kBaBulk: return "ba_bulk";
    case Response::kBaExcess: return "ba_excess";
  }
  return "?";
}

MaskResponse mask_of(Response r) {
  return r == Response::kCnt ? MaskResponse::kCnt : MaskResponse::kBa;
}

std::vector<double> response_values(const GridDataset& ds, Response r, double u) {
  std::vector<double> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& o = ds.rows()[i];
    switch (r) {
      case Response::kCnt: out[i] = o.cnt; break;
      case Response::kBa: out[i] = o.ba; break;
      case Response::kBaClass: out[i] = class_response(o.ba, u); break;
      case Response::kBaBulk: out[i] = is_missing(o.ba) ? kMissing : bulk_response(o.ba, u); break;
      case Response::kBaExcess:
        out[i] = is_missing(o.ba) ? kMissing : excess_response(o.ba, u);
        break;
    }
  }
  return out;
}

namespace {

std::vector<std::size_t> observed_rows(std::span<const double> y) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!is_missing(y[i])) rows.push_back(i);
  }
  return rows;
}

BoostedModel fit_rows(const GridDataset& ds, const std::vector<std::string>& features,
                      std::span<const double> y, std::span<const std::size_t> rows,
                      const LossSpec& loss, const TrainParams& params) {
  std::vector<std::size_t> use;
  Responses resp;
  for (auto i : rows) {
    if (is_missing(y[i])) continue;
    use.push_back(i);
    resp.y.push_back(y[i]);
  }
  if (use.empty()) throw DataError("no rows with an observed response to fit");
  return fit(ds.feature_matrix(features).select_rows(use), resp, loss, params, features);
}

}  // namespace

GridDataset FeaturePlan::apply(const GridDataset& ds) const {
  GridDataset out = cross_fill ? cross_fill_zeros(ds) : ds;
  for (const auto& name : neighbor_average) out = evgbm::neighbor_average(out, name);
  const std::vector<std::string> aux = aux_features.empty() ? out.covariate_names() : aux_features;
  // Both auxiliary models see only covariates that precede imputation.
  if (impute_cnt) {
    LossSpec dg;
    dg.kind = LossKind::kDgpd;
    dg.alpha = aux_alpha;
    const auto y = response_values(out, Response::kCnt, u);
    const auto rows = observed_rows(y);
    out = impute_cnt_covariate(out, fit_rows(out, aux, y, rows, dg, aux_params));
  }
  if (impute_ba_class) {
    LossSpec ce;
    ce.kind = LossKind::kCrossEntropy;
    const auto y = response_values(out, Response::kBaClass, u);
    const auto rows = observed_rows(y);
    out = impute_ba_class_covariates(out, fit_rows(out, aux, y, rows, ce, aux_params), u);
  }
  return out;
}

// ---------------------------------------------------------------------------

double FittedRecipe::score(const Recipe& recipe, const GridDataset& prepared,
                           std::span<const std::size_t> rows, std::span<const double> truth,
                           int n_rounds) const {
  const Matrix x = prepared.feature_matrix(features).select_rows(rows);
  if (mixture) {
    MixtureModel m = *mixture;
    if (n_rounds >= 0) {
      auto cut = [&](const BoostedModel& b) {
        BoostedModel c = b;
        c.trees.resize(std::min<std::size_t>(c.trees.size(),
                                             static_cast<std::size_t>(n_rounds) * c.n_outputs()));
        return c;
      };
      m = MixtureModel(cut(m.classifier()), cut(m.bulk()), cut(m.tail()), m.u());
    }
    const Matrix xm = prepared.feature_matrix(m.feature_names()).select_rows(rows);
    return threshold_score(m.threshold_probs(xm, recipe.score.thresholds), truth, recipe.score);
  }
  const BoostedModel& b = *model;
  if (recipe.threshold_score) {
    return threshold_score(count_threshold_probs(b, x, recipe.score.thresholds, n_rounds), truth,
                           recipe.score);
  }
  // Mean validation loss on the model's own response scale.
  const Matrix raw = predict_raw(b, x, n_rounds);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double y = truth[i];
    switch (recipe.response) {
      case Response::kBaClass: y = class_response(y, recipe.plan.u); break;
      case Response::kBaBulk: y = bulk_response(y, recipe.plan.u); break;
      case Response::kBaExcess: y = excess_response(y, recipe.plan.u); break;
      default: break;
    }
    if (is_missing(y)) continue;
    total += b.loss.multiclass()
                 ? loss::cross_entropy(static_cast<int>(y), raw.row(i), 1.0).value
                 : loss::evaluate(b.loss, y, raw(i, 0)).value;
    ++n;
  }
  if (n == 0) throw DataError("no validation rows in the response's support");
  return total / static_cast<double>(n);
}

std::string FittedRecipe::documents() const {
  if (model) return save_model(*model);
  return save_model(mixture->classifier()) + save_model(mixture->bulk()) +
         save_model(mixture->tail());
}

FittedRecipe fit_recipe(const Recipe& recipe, const GridDataset& prepared,
                        std::span<const std::size_t> rows) {
  FittedRecipe out;
  out.features = recipe.features.empty() ? prepared.covariate_names() : recipe.features;
  if (recipe.mixture) {
    const auto ba = response_values(prepared, Response::kBa, recipe.mixture_spec.u);
    std::vector<double> sub;
    for (auto i : rows) sub.push_back(ba[i]);
    const Matrix x = prepared.feature_matrix(out.features).select_rows(rows);
    out.mixture = fit_mixture(x, sub, out.features, recipe.mixture_spec);
  } else {
    const auto y = response_values(prepared, recipe.response, recipe.plan.u);
    out.model = fit_rows(prepared, out.features, y, rows, recipe.loss, recipe.params);
  }
  return out;
}

CvResult run_cv(const GridDataset& ds, const FoldSet& folds, const Recipe& recipe,
                const CvOptions& options) {
  if (options.tree_counts.empty()) throw ConfigError("cv needs at least one tree count");
  const int max_trees = *std::max_element(options.tree_counts.begin(), options.tree_counts.end());
  Recipe r = recipe;
  r.params.n_trees = max_trees;
  r.mixture_spec.classifier.n_trees = max_trees;
  r.mixture_spec.bulk.n_trees = max_trees;
  r.mixture_spec.tail.n_trees = max_trees;

  CvResult out;
  out.tree_counts = options.tree_counts;
  out.scores = Matrix(static_cast<std::size_t>(folds.n_folds), options.tree_counts.size());
  for (int f = 0; f < folds.n_folds; ++f) {
    // Hide both responses at the fold's keys, as in a real test set.
    std::vector<double> cnt(ds.size()), ba(ds.size());
    const auto& kc = folds.keys(f, MaskResponse::kCnt);
    const auto& kb = folds.keys(f, MaskResponse::kBa);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& o = ds.rows()[i];
      const FoldKey key{o.cell, o.year, o.month};
      cnt[i] = kc.count(key) ? kMissing : o.cnt;
      ba[i] = kb.count(key) ? kMissing : o.ba;
    }
    const GridDataset prepared = r.plan.apply(ds.with_responses(cnt, ba));

    std::vector<std::size_t> valid;
    std::vector<double> truth;
    for (auto i : folds.validation_rows(ds, f, r.mask())) {
      const auto& o = ds.rows()[i];
      const double y = r.mask() == MaskResponse::kCnt ? o.cnt : o.ba;
      if (is_missing(y)) continue;
      valid.push_back(i);
      truth.push_back(y);
    }
    if (valid.empty()) throw DataError("fold " + std::to_string(f) + " has no validation rows");
    std::vector<std::size_t> train;
    for (std::size_t i = 0, v = 0; i < ds.size(); ++i) {
      if (v < valid.size() && valid[v] == i) {
        ++v;
        continue;
      }
      train.push_back(i);
    }
    const FittedRecipe fitted = fit_recipe(r, prepared, train);
    if (options.on_fit) options.on_fit(f, fitted);
    for (std::size_t t = 0; t < options.tree_counts.size(); ++t) {
      out.scores(static_cast<std::size_t>(f), t) =
          fitted.score(r, prepared, valid, truth, options.tree_counts[t]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void set_train_param(TrainParams& p, const std::string& name, double v) {
  if (name == "lambda") p.lambda_reg = v;
  else if (name == "eta") p.eta = v;
  else if (name == "max_leaves") p.max_leaves = static_cast<int>(std::lround(v));
  else if (name == "colsample") p.colsample = v;
  else if (name == "learning_rate") p.learning_rate = v;
  else if (name == "n_quantile_bins") p.n_quantile_bins = static_cast<int>(std::lround(v));
  else throw ConfigError("unknown tunable parameter '" + name + "'");
}

}  // namespace

void set_recipe_param(Recipe& r, const std::string& name, double v) {
  if (r.mixture) {
    if (name == "xi") r.mixture_spec.xi = v;
    else if (name == "kappa") r.mixture_spec.kappa = v;
    else if (name == "k") r.mixture_spec.k_shape = v;
    else if (name.starts_with("classifier.")) set_train_param(r.mixture_spec.classifier, name.substr(11), v);
    else if (name.starts_with("bulk.")) set_train_param(r.mixture_spec.bulk, name.substr(5), v);
    else if (name.starts_with("tail.")) set_train_param(r.mixture_spec.tail, name.substr(5), v);
    else throw ConfigError("unknown mixture parameter '" + name + "'");
    return;
  }
  if (name == "alpha") r.loss.alpha = v;
  else if (name == "xi") r.loss.xi = v;
  else if (name == "kappa") r.loss.kappa = v;
  else if (name == "k") r.loss.k_shape = v;
  else set_train_param(r.params, name, v);
}

std::vector<TuneRecord> tune(const GridDataset& ds, const FoldSet& folds, const Recipe& base,
                             const std::vector<TuneDim>& dims, const CvOptions& options,
                             int max_iters, std::uint64_t seed) {
  if (dims.empty()) throw ConfigError("tuning needs at least one dimension");
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  Box box;
  for (const auto& d : dims) {
    box.lo.push_back(d.lo);
    box.hi.push_back(d.hi);
  }
  box.validate();
  {
    Recipe probe = base;
    for (const auto& d : dims) set_recipe_param(probe, d.name, d.lo);
  }
  std::vector<Trial> history;
  std::vector<TuneRecord> records;
  for (int it = 0; it < max_iters; ++it) {
    auto point = bo_suggest(history, box, seed);
    for (std::size_t j = 0; j < dims.size(); ++j) {
      if (dims[j].integer) point[j] = std::round(point[j]);
    }
    Recipe r = base;
    for (std::size_t j = 0; j < dims.size(); ++j) set_recipe_param(r, dims[j].name, point[j]);
    const CvResult cv = run_cv(ds, folds, r, options);
    const int t_sel = one_se_select(cv);
    const auto pos = std::find(cv.tree_counts.begin(), cv.tree_counts.end(), t_sel) -
                     cv.tree_counts.begin();
    const double score = cv.mean(static_cast<std::size_t>(pos));
    history.push_back({point, score});
    records.push_back({it, point, t_sel, score});
  }
  return records;
}

std::string tuning_log_csv(const std::vector<TuneDim>& dims,
                           const std::vector<TuneRecord>& records) {
  std::vector<std::string> header{"iteration"};
  for (const auto& d : dims) header.push_back(d.name);
  header.push_back("trees");
  header.push_back("score");
  std::string out = io::csv_line(header);
  for (const auto& r : records) {
    std::vector<std::string> row{std::to_string(r.iteration)};
    for (double v : r.point) row.push_back(io::format_double(v));
    row.push_back(std::to_string(r.selected_trees));
    row.push_back(io::format_double(r.score));
    out += io::csv_line(row);
  }
  return out;
}

}  // namespace evgbm
