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

#include "evgbm/booster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "evgbm/errors.hpp"
#include "evgbm/io.hpp"
#include "evgbm/rng.hpp"

namespace evgbm {

using ojson = nlohmann::ordered_json;

void TrainParams::validate() const {
  if (n_trees < 0) throw ConfigError("n_trees must be >= 0");
  if (!(lambda_reg >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(eta >= 0.0)) throw ConfigError("eta must be >= 0");
  if (max_leaves < 2) throw ConfigError("max_leaves must be >= 2");
  if (!(colsample > 0.0 && colsample <= 1.0)) throw ConfigError("colsample must lie in (0, 1]");
  if (n_quantile_bins < 2) throw ConfigError("n_quantile_bins must be >= 2");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw ConfigError("learning_rate must lie in (0, 1]");
  }
}

TreeParams TrainParams::tree_params() const {
  return {max_leaves, lambda_reg, eta, n_quantile_bins, colsample};
}

int BoostedModel::n_rounds() const {
  return n_outputs() == 0 ? 0 : static_cast<int>(trees.size()) / n_outputs();
}

namespace {

// Hessians below this are raised to it before tree growth; the dGPD and
// truncated gamma losses are not convex everywhere.
constexpr double kMinHessian = 1e-6;

void check_responses(const Responses& y, const LossSpec& loss) {
  if (!y.weights.empty() && y.weights.size() != y.y.size()) {
    throw DataError("weights and responses differ in length");
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    try {
      loss::check_response(loss, y.y[i]);
    } catch (const DataError& e) {
      throw LossDomainError(i, e.what());
    }
    if (!(y.weight(i) >= 0.0)) throw LossDomainError(i, "negative weight");
  }
}

std::pair<double, double> sum_derivs(const LossSpec& loss, const Responses& y, double theta) {
  double g = 0.0;
  double h = 0.0;
  for (double v : y.y) {
    const auto e = loss::evaluate(loss, v, theta);
    g += e.grad;
    h += e.hess;
  }
  return {g, h};
}

double initial_scalar(const Responses& y, const LossSpec& loss) {
  constexpr double kBound = 60.0;
  constexpr int kMaxIter = 200;
  double theta = 0.0;
  switch (loss.kind) {
    case LossKind::kPoisson:
    case LossKind::kTrGamma:
    case LossKind::kGpd: {
      const double mean = std::accumulate(y.y.begin(), y.y.end(), 0.0) / y.size();
      theta = mean > 0.0 ? std::log(mean) : 0.0;
      break;
    }
    case LossKind::kSquaredLog: {
      double s = 0.0;
      for (double v : y.y) s += std::log1p(v);
      theta = s / y.size();
      break;
    }
    default:
      break;
  }

  // Bracket a sign change of the summed gradient.
  auto grad = [&](double t) { return sum_derivs(loss, y, t).first; };
  double g0 = grad(theta);
  if (g0 == 0.0) return theta;
  double lo = theta;
  double hi = theta;
  double step = 1.0;
  if (g0 > 0.0) {
    while (true) {
      lo = theta - step;
      if (lo < -kBound) throw NumericError("initial estimate: no minimizer above -60");
      if (grad(lo) <= 0.0) break;
      hi = lo;
      step *= 2.0;
    }
  } else {
    while (true) {
      hi = theta + step;
      if (hi > kBound) throw NumericError("initial estimate: no minimizer below 60");
      if (grad(hi) >= 0.0) break;
      lo = hi;
      step *= 2.0;
    }
  }

  // Safeguarded Newton inside [lo, hi].
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < kMaxIter; ++it) {
    const auto [g, h] = sum_derivs(loss, y, t);
    if (g == 0.0) return t;
    if (g > 0.0) hi = t; else lo = t;
    if (hi - lo <= 1e-13 * std::max(1.0, std::abs(t))) return t;
    double next = h > 0.0 ? t - g / h : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-14 * std::max(1.0, std::abs(t))) return next;
    t = next;
  }
  throw NumericError("initial estimate did not converge after 200 iterations");
}

}  // namespace

std::vector<double> initial_estimate(const Responses& y, const LossSpec& loss) {
  loss.validate();
  if (y.size() == 0) throw DataError("initial estimate needs at least one response");
  check_responses(y, loss);
  if (!loss.multiclass()) return {initial_scalar(y, loss)};

  // Softmax cross-entropy is minimized by the log weighted class frequencies.
  std::vector<double> mass(loss.n_classes, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mass[static_cast<int>(y.y[i])] += y.weight(i);
    total += y.weight(i);
  }
  if (!(total > 0.0)) throw NumericError("initial estimate: all weights are zero");
  std::vector<double> out(loss.n_classes);
  for (int c = 0; c < loss.n_classes; ++c) {
    out[c] = std::log(std::max(mass[c] / total, 1e-12));
  }
  return out;
}

double total_loss(const LossSpec& loss, const Responses& y, const Matrix& raw) {
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (loss.multiclass()) {
      total += loss::cross_entropy(static_cast<int>(y.y[i]), raw.row(i), y.weight(i)).value;
    } else {
      total += loss::evaluate(loss, y.y[i], raw(i, 0)).value;
    }
  }
  return total;
}

BoostedModel fit(const Matrix& x, const Responses& y, const LossSpec& loss,
                 const TrainParams& params, std::vector<std::string> feature_names,
                 TrainingTrace* trace) {
  loss.validate();
  params.validate();
  const std::size_t n = x.rows();
  if (n == 0) throw DataError("cannot fit on an empty dataset");
  if (y.size() != n) {
    throw DataError("feature matrix has " + std::to_string(n) + " rows but " +
                    std::to_string(y.size()) + " responses");
  }
  if (feature_names.empty()) {
    for (std::size_t j = 0; j < x.cols(); ++j) feature_names.push_back("f" + std::to_string(j));
  }
  if (feature_names.size() != x.cols()) throw DataError("feature name count mismatch");
  check_responses(y, loss);

  BoostedModel model;
  model.loss = loss;
  model.params = params;
  model.feature_names = std::move(feature_names);
  model.base_score = initial_estimate(y, loss);
  const int n_out = model.n_outputs();

  Matrix raw(n, n_out);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(model.base_score.begin(), model.base_score.end(), raw.row(i).begin());
  }
  if (trace) trace->loss = {total_loss(loss, y, raw)};

  const BinnedMatrix binned(x, SplitCandidates::from_quantiles(x, params.n_quantile_bins));
  const TreeParams tree_params = params.tree_params();
  std::vector<GradientPairs> gps(n_out, GradientPairs{std::vector<double>(n),
                                                      std::vector<double>(n)});
  model.trees.reserve(static_cast<std::size_t>(params.n_trees) * n_out);

  for (int round = 0; round < params.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        if (loss.multiclass()) {
          const auto e = loss::cross_entropy(static_cast<int>(y.y[i]), raw.row(i), y.weight(i));
          for (int c = 0; c < n_out; ++c) {
            gps[c].g[i] = e.grad[c];
            gps[c].h[i] = std::max(e.hess[c], kMinHessian);
          }
        } else {
          const auto e = loss::evaluate(loss, y.y[i], raw(i, 0));
          gps[0].g[i] = e.grad;
          gps[0].h[i] = std::max(e.hess, kMinHessian);
        }
      } catch (const NumericError& e) {
        throw NumericError("round " + std::to_string(round) + ", row " + std::to_string(i) +
                           ": " + e.what());
      }
    }

    CounterRng rng(params.seed, {static_cast<std::uint64_t>(round)});
    const auto features = sample_features(x.cols(), params.colsample, rng);
    for (int c = 0; c < n_out; ++c) {
      RegressionTree tree = grow(binned, gps[c], tree_params, features);
      tree.scale_leaves(params.learning_rate);
      for (std::size_t i = 0; i < n; ++i) raw(i, c) += tree.predict(x.row(i));
      model.trees.push_back(std::move(tree));
    }
    if (trace) trace->loss.push_back(total_loss(loss, y, raw));
  }
  return model;
}

namespace {

void check_features(const BoostedModel& model, std::size_t cols) {
  if (cols != model.n_features()) {
    throw DataError("model expects " + std::to_string(model.n_features()) +
                    " features, got " + std::to_string(cols));
  }
}

int rounds_to_use(const BoostedModel& model, int n_rounds) {
  return n_rounds < 0 ? model.n_rounds() : std::min(n_rounds, model.n_rounds());
}

}  // namespace

std::vector<double> predict_raw_row(const BoostedModel& model, std::span<const double> x,
                                    int n_rounds) {
  check_features(model, x.size());
  const int n_out = model.n_outputs();
  const int rounds = rounds_to_use(model, n_rounds);
  std::vector<double> out = model.base_score;
  for (int t = 0; t < rounds; ++t) {
    for (int c = 0; c < n_out; ++c) out[c] += model.trees[t * n_out + c].predict(x);
  }
  return out;
}

Matrix predict_raw(const BoostedModel& model, const Matrix& x, int n_rounds) {
  check_features(model, x.cols());
  Matrix out(x.rows(), model.n_outputs());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = predict_raw_row(model, x.row(i), n_rounds);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model documents

namespace {

ojson loss_to_json(const LossSpec& loss) {
  ojson j;
  j["kind"] = std::string(to_string(loss.kind));
  switch (loss.kind) {
    case LossKind::kDgpd:
      j["alpha"] = loss.alpha;
      j["raw_pmf_loss"] = loss.raw_pmf_loss;
      break;
    case LossKind::kTrGamma:
      j["k"] = loss.k_shape;
      j["u"] = loss.u_trunc;
      break;
    case LossKind::kGpd:
      j["xi"] = loss.xi;
      j["kappa"] = loss.kappa;
      break;
    case LossKind::kCrossEntropy:
      j["n_classes"] = loss.n_classes;
      break;
    case LossKind::kPoisson:
    case LossKind::kSquaredLog:
      break;
  }
  return j;
}

LossSpec loss_from_json(const ojson& j) {
  LossSpec loss;
  loss.kind = parse_loss_kind(j.at("kind").get<std::string>());
  switch (loss.kind) {
    case LossKind::kDgpd:
      loss.alpha = j.at("alpha").get<double>();
      loss.raw_pmf_loss = j.value("raw_pmf_loss", false);
      break;
    case LossKind::kTrGamma:
      loss.k_shape = j.at("k").get<double>();
      loss.u_trunc = j.at("u").get<double>();
      break;
    case LossKind::kGpd:
      loss.xi = j.at("xi").get<double>();
      loss.kappa = j.at("kappa").get<double>();
      break;
    case LossKind::kCrossEntropy:
      loss.n_classes = j.at("n_classes").get<int>();
      break;
    case LossKind::kPoisson:
    case LossKind::kSquaredLog:
      break;
  }
  loss.validate();
  return loss;
}

ojson params_to_json(const TrainParams& p) {
  ojson j;
  j["n_trees"] = p.n_trees;
  j["lambda"] = p.lambda_reg;
  j["eta"] = p.eta;
  j["max_leaves"] = p.max_leaves;
  j["colsample"] = p.colsample;
  j["n_quantile_bins"] = p.n_quantile_bins;
  j["learning_rate"] = p.learning_rate;
  j["seed"] = p.seed;
  return j;
}

TrainParams params_from_json(const ojson& j) {
  TrainParams p;
  p.n_trees = j.at("n_trees").get<int>();
  p.lambda_reg = j.at("lambda").get<double>();
  p.eta = j.at("eta").get<double>();
  p.max_leaves = j.at("max_leaves").get<int>();
  p.colsample = j.at("colsample").get<double>();
  p.n_quantile_bins = j.at("n_quantile_bins").get<int>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

ojson tree_to_json(const RegressionTree& tree, int output) {
  ojson nodes = ojson::array();
  const auto& ns = tree.nodes();
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const auto& n = ns[i];
    ojson j;
    j["id"] = i;
    if (n.is_leaf()) {
      j["weight"] = n.weight;
    } else {
      j["feature"] = n.feature;
      j["threshold"] = n.threshold;
      j["default_left"] = n.default_left;
      j["left"] = n.left;
      j["right"] = n.right;
      j["gain"] = n.gain;
    }
    j["cover"] = n.cover;
    nodes.push_back(std::move(j));
  }
  ojson t;
  t["output"] = output;
  t["nodes"] = std::move(nodes);
  return t;
}

RegressionTree tree_from_json(const ojson& j) {
  const auto& arr = j.at("nodes");
  if (!arr.is_array()) throw DataError("tree nodes must be an array");
  std::vector<TreeNode> nodes(arr.size());
  for (const auto& nj : arr) {
    const auto id = nj.at("id").get<std::size_t>();
    if (id >= nodes.size()) throw DataError("node id " + std::to_string(id) + " out of range");
    TreeNode& n = nodes[id];
    if (nj.contains("feature")) {
      n.feature = nj.at("feature").get<int>();
      if (n.feature < 0) throw DataError("negative feature index");
      n.threshold = nj.at("threshold").get<double>();
      n.default_left = nj.value("default_left", true);
      n.left = nj.at("left").get<int>();
      n.right = nj.at("right").get<int>();
      n.gain = nj.value("gain", 0.0);
    } else {
      n.weight = nj.at("weight").get<double>();
    }
    n.cover = nj.value("cover", 0.0);
  }
  return RegressionTree(std::move(nodes));
}

}  // namespace

std::string save_model(const BoostedModel& model) {
  ojson doc;
  doc["format_version"] = kModelFormatVersion;
  doc["loss"] = loss_to_json(model.loss);
  doc["base_score"] = model.base_score;
  doc["feature_names"] = model.feature_names;
  doc["params"] = params_to_json(model.params);
  ojson trees = ojson::array();
  const int n_out = std::max(1, model.n_outputs());
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    trees.push_back(tree_to_json(model.trees[t], static_cast<int>(t % n_out)));
  }
  doc["trees"] = std::move(trees);
  return doc.dump(1) + "\n";
}

BoostedModel load_model(std::string_view document) {
  ojson doc;
  try {
    doc = ojson::parse(document);
  } catch (const ojson::exception& e) {
    throw DataError(std::string("model document is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("format_version")) {
      throw DataError("model document lacks format_version");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("unsupported model format_version " + std::to_string(version));
    }
    BoostedModel model;
    model.loss = loss_from_json(doc.at("loss"));
    model.base_score = doc.at("base_score").get<std::vector<double>>();
    if (model.n_outputs() != model.loss.n_outputs()) {
      throw DataError("base_score length does not match the loss");
    }
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    model.params = params_from_json(doc.at("params"));
    const auto& trees = doc.at("trees");
    if (trees.size() % model.n_outputs() != 0) {
      throw DataError("tree count is not a multiple of the output count");
    }
    for (std::size_t t = 0; t < trees.size(); ++t) {
      if (trees[t].value("output", 0) != static_cast<int>(t % model.n_outputs())) {
        throw DataError("tree " + std::to_string(t) + " has the wrong output index");
      }
      model.trees.push_back(tree_from_json(trees[t]));
      if (model.trees.back().max_feature() >= static_cast<int>(model.n_features())) {
        throw DataError("tree " + std::to_string(t) + " references an unknown feature");
      }
    }
    return model;
  } catch (const ojson::exception& e) {
    throw DataError(std::string("model document schema violation: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("model document: ") + e.what());
  }
}

void save_model_file(const BoostedModel& model, const std::filesystem::path& path) {
  io::write_text_file(path, save_model(model));
}

BoostedModel load_model_file(const std::filesystem::path& path) {
  return load_model(io::read_text_file(path));
}

}  // namespace evgbm
