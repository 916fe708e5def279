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

#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <utility>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "evgbm/booster.hpp"
#include "evgbm/errors.hpp"
#include "evgbm/evaluate.hpp"
#include "evgbm/interpret.hpp"
#include "evgbm/io.hpp"
#include "evgbm/mixture.hpp"
#include "evgbm/synth.hpp"

namespace evgbm::cli {
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Value parsing

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(const std::string& key, std::string_view v) {
  const std::string t = trim(v);
  double out = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError(key + ": expected a number, got '" + t + "'");
  }
  return out;
}

long long to_integer(const std::string& key, std::string_view v) {
  const std::string t = trim(v);
  long long out = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError(key + ": expected an integer, got '" + t + "'");
  }
  return out;
}

int to_int(const std::string& key, std::string_view v) {
  const long long x = to_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(key + ": integer out of range");
  }
  return static_cast<int>(x);
}

std::uint64_t to_seed(const std::string& key, std::string_view v) {
  const long long x = to_integer(key, v);
  if (x < 0) throw ConfigError(key + ": seed must be nonnegative");
  return static_cast<std::uint64_t>(x);
}

bool to_bool(const std::string& key, std::string_view v) {
  const std::string t = trim(v);
  if (t == "true" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "no" || t == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + t + "'");
}

fs::path resolve(const fs::path& base, const std::string& key, std::string_view v) {
  fs::path p(trim(v));
  if (p.empty()) throw ConfigError(key + ": empty path");
  if (p.is_relative() && !base.empty()) p = base / p;
  if (!fs::exists(p)) throw ConfigError(key + ": file not found: " + p.string());
  return p;
}

Response default_response(LossKind kind) {
  switch (kind) {
    case LossKind::kPoisson:
    case LossKind::kDgpd: return Response::kCnt;
    case LossKind::kTrGamma: return Response::kBaBulk;
    case LossKind::kGpd: return Response::kBaExcess;
    case LossKind::kCrossEntropy: return Response::kBaClass;
    case LossKind::kSquaredLog: return Response::kBa;
  }
  return Response::kCnt;
}

bool is_count_model(const Recipe& r) {
  return !r.mixture && r.response == Response::kCnt &&
         (r.loss.kind == LossKind::kPoisson || r.loss.kind == LossKind::kDgpd);
}

bool integer_dim(const std::string& name) {
  auto ends = [&](std::string_view s) {
    return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  return ends("max_leaves") || ends("n_quantile_bins");
}

const std::vector<std::string> kTrainKeys{"n_trees",  "lambda",          "eta",
                                          "max_leaves", "colsample", "n_quantile_bins",
                                          "learning_rate", "seed"};

void set_train_key(TrainParams& p, const std::string& key, const std::string& full,
                   const std::string& v) {
  if (key == "n_trees") p.n_trees = to_int(full, v);
  else if (key == "lambda") p.lambda_reg = to_double(full, v);
  else if (key == "eta") p.eta = to_double(full, v);
  else if (key == "max_leaves") p.max_leaves = to_int(full, v);
  else if (key == "colsample") p.colsample = to_double(full, v);
  else if (key == "n_quantile_bins") p.n_quantile_bins = to_int(full, v);
  else if (key == "learning_rate") p.learning_rate = to_double(full, v);
  else if (key == "seed") p.seed = to_seed(full, v);
  else throw ConfigError("unknown key " + full);
}

using Section = std::vector<std::pair<std::string, std::string>>;

const std::map<std::string, std::vector<std::string>>& allowed_keys() {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"data",
       {"train", "folds", "lon", "lat", "year", "month", "cnt", "ba", "missing", "season",
        "grid_spacing"}},
      {"features",
       {"use", "cross_fill", "neighbor_average", "impute_cnt", "impute_ba_class", "aux_alpha",
        "aux_trees", "aux_features"}},
      {"loss", {"kind", "response", "alpha", "xi", "kappa", "k", "u_trunc", "n_classes", "raw_pmf"}},
      {"train", kTrainKeys},
      {"mixture", {"enabled", "u", "xi", "kappa", "k"}},
      {"cv",
       {"n_folds", "seed", "tree_counts", "one_se", "beta", "range", "sigma_gp", "nu", "phi",
        "beta0_cnt", "beta0_ba"}},
      {"score", {"kind", "thresholds"}},
      {"tune", {"max_iters", "seed"}},
  };
  return keys;
}

bool key_allowed(const std::string& section, const std::string& key) {
  const auto& list = allowed_keys().at(section);
  if (std::find(list.begin(), list.end(), key) != list.end()) return true;
  if (section == "mixture") {
    for (const char* c : {"classifier.", "bulk.", "tail."}) {
      const std::string prefix = c;
      if (key.rfind(prefix, 0) == 0) {
        const auto rest = key.substr(prefix.size());
        return std::find(kTrainKeys.begin(), kTrainKeys.end(), rest) != kTrainKeys.end();
      }
    }
  }
  return section == "tune";  // remaining tune keys name search dimensions
}

ThresholdScoreSpec threshold_spec(const fs::path& base, const std::string& v) {
  const std::string t = trim(v);
  if (t == "counts") return ThresholdScoreSpec::counts();
  if (t == "sizes") return ThresholdScoreSpec::sizes();
  return parse_thresholds(io::read_text_file(resolve(base, "score.thresholds", t)));
}

std::vector<int> default_tree_counts(int n) {
  std::vector<int> out;
  const int step = std::max(1, n / 10);
  for (int t = step; t <= n; t += step) out.push_back(t);
  if (out.empty() || out.back() != n) out.push_back(n);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ThresholdScoreSpec parse_thresholds(std::string_view text) {
  const auto recs = io::parse_csv(text);
  if (recs.empty()) throw ConfigError("thresholds file is empty");
  const auto& head = recs[0].fields;
  const auto t_col = std::find(head.begin(), head.end(), "threshold");
  if (t_col == head.end()) throw ConfigError("thresholds file needs a 'threshold' column");
  const auto w_col = std::find(head.begin(), head.end(), "weight");
  ThresholdScoreSpec spec;
  for (std::size_t r = 1; r < recs.size(); ++r) {
    const auto& f = recs[r].fields;
    if (f.size() != head.size()) {
      throw ConfigError("thresholds line " + std::to_string(recs[r].line) + ": wrong field count");
    }
    const std::string where = "thresholds line " + std::to_string(recs[r].line);
    spec.thresholds.push_back(to_double(where, f[t_col - head.begin()]));
    spec.weights.push_back(w_col == head.end() ? 1.0 : to_double(where, f[w_col - head.begin()]));
  }
  spec.validate();
  return spec;
}

RunConfig parse_config(std::string_view text, const fs::path& base_dir) {
  boost::property_tree::ptree pt;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  std::map<std::string, Section> sec;
  for (const auto& [name, body] : pt) {
    if (body.empty()) throw ConfigError("config key '" + name + "' outside a section");
    if (!allowed_keys().count(name)) throw ConfigError("unknown config section [" + name + "]");
    for (const auto& [key, val] : body) {
      if (!key_allowed(name, key)) throw ConfigError("unknown key " + name + "." + key);
      sec[name].emplace_back(key, val.data());
    }
  }
  auto get = [&](const std::string& s, const std::string& k) -> const std::string* {
    const auto it = sec.find(s);
    if (it == sec.end()) return nullptr;
    for (const auto& [key, v] : it->second)
      if (key == k) return &v;
    return nullptr;
  };

  RunConfig cfg;
  Recipe& r = cfg.recipe;

  for (const auto& [k, v] : sec["data"]) {
    const std::string full = "data." + k;
    if (k == "train") cfg.data = resolve(base_dir, full, v);
    else if (k == "folds") cfg.folds = resolve(base_dir, full, v);
    else if (k == "lon") cfg.schema.lon = trim(v);
    else if (k == "lat") cfg.schema.lat = trim(v);
    else if (k == "year") cfg.schema.year = trim(v);
    else if (k == "month") cfg.schema.month = trim(v);
    else if (k == "cnt") cfg.schema.cnt = trim(v);
    else if (k == "ba") cfg.schema.ba = trim(v);
    else if (k == "missing") cfg.schema.missing_marker = trim(v);
    else if (k == "grid_spacing") cfg.schema.grid_spacing = to_double(full, v);
    else if (k == "season") {
      cfg.schema.season.clear();
      for (const auto& m : split_list(v)) cfg.schema.season.push_back(to_int(full, m));
    }
  }

  // Mixture threshold first: it feeds the truncation and class boundaries.
  double u = 200.0;
  if (const auto* v = get("mixture", "u")) u = to_double("mixture.u", *v);
  r.plan.u = u;
  r.mixture_spec.u = u;

  bool u_trunc_set = false;
  for (const auto& [k, v] : sec["loss"]) {
    const std::string full = "loss." + k;
    if (k == "kind") r.loss.kind = parse_loss_kind(trim(v));
    else if (k == "alpha") r.loss.alpha = to_double(full, v);
    else if (k == "xi") r.loss.xi = to_double(full, v);
    else if (k == "kappa") r.loss.kappa = to_double(full, v);
    else if (k == "k") r.loss.k_shape = to_double(full, v);
    else if (k == "n_classes") r.loss.n_classes = to_int(full, v);
    else if (k == "raw_pmf") r.loss.raw_pmf_loss = to_bool(full, v);
    else if (k == "u_trunc") {
      r.loss.u_trunc = to_double(full, v);
      u_trunc_set = true;
    }
  }
  r.response = default_response(r.loss.kind);
  if (const auto* v = get("loss", "response")) r.response = parse_response(trim(*v));
  if (r.loss.kind == LossKind::kTrGamma && !u_trunc_set) r.loss.u_trunc = std::log1p(u);
  r.loss.validate();

  for (const auto& [k, v] : sec["train"]) set_train_key(r.params, k, "train." + k, v);
  r.params.validate();

  r.mixture_spec.classifier = r.params;
  r.mixture_spec.bulk = r.params;
  r.mixture_spec.tail = r.params;
  for (const auto& [k, v] : sec["mixture"]) {
    const std::string full = "mixture." + k;
    if (k == "enabled") r.mixture = to_bool(full, v);
    else if (k == "xi") r.mixture_spec.xi = to_double(full, v);
    else if (k == "kappa") r.mixture_spec.kappa = to_double(full, v);
    else if (k == "k") r.mixture_spec.k_shape = to_double(full, v);
    else if (k == "u") continue;
    else {
      const auto dot = k.find('.');
      const std::string comp = k.substr(0, dot);
      TrainParams& p = comp == "classifier" ? r.mixture_spec.classifier
                       : comp == "bulk"     ? r.mixture_spec.bulk
                                            : r.mixture_spec.tail;
      set_train_key(p, k.substr(dot + 1), full, v);
    }
  }
  r.mixture_spec.classifier.validate();
  r.mixture_spec.bulk.validate();
  r.mixture_spec.tail.validate();

  for (const auto& [k, v] : sec["features"]) {
    const std::string full = "features." + k;
    if (k == "use") r.features = split_list(v);
    else if (k == "cross_fill") r.plan.cross_fill = to_bool(full, v);
    else if (k == "neighbor_average") r.plan.neighbor_average = split_list(v);
    else if (k == "impute_cnt") r.plan.impute_cnt = to_bool(full, v);
    else if (k == "impute_ba_class") r.plan.impute_ba_class = to_bool(full, v);
    else if (k == "aux_alpha") r.plan.aux_alpha = to_double(full, v);
    else if (k == "aux_trees") r.plan.aux_params.n_trees = to_int(full, v);
    else if (k == "aux_features") r.plan.aux_features = split_list(v);
  }
  r.plan.aux_params.validate();

  const bool threshold_ok = r.mixture || is_count_model(r);
  r.threshold_score = threshold_ok;
  r.score = r.mixture ? ThresholdScoreSpec::sizes() : ThresholdScoreSpec::counts();
  if (const auto* v = get("score", "kind")) {
    const std::string t = trim(*v);
    if (t == "threshold") {
      if (!threshold_ok) {
        throw ConfigError("score.kind = threshold needs a count model or a mixture");
      }
      r.threshold_score = true;
    } else if (t == "loss") {
      if (r.mixture) throw ConfigError("mixtures are scored by threshold only");
      r.threshold_score = false;
    } else {
      throw ConfigError("score.kind: expected threshold or loss, got '" + t + "'");
    }
  }
  if (const auto* v = get("score", "thresholds")) r.score = threshold_spec(base_dir, *v);

  for (const auto& [k, v] : sec["cv"]) {
    const std::string full = "cv." + k;
    if (k == "n_folds") cfg.n_folds = to_int(full, v);
    else if (k == "seed") cfg.cv_seed = to_seed(full, v);
    else if (k == "beta") cfg.mask.beta = to_double(full, v);
    else if (k == "range") cfg.mask.range = to_double(full, v);
    else if (k == "sigma_gp") cfg.mask.sigma_gp = to_double(full, v);
    else if (k == "nu") cfg.mask.nu = to_double(full, v);
    else if (k == "phi") cfg.mask.phi = to_double(full, v);
    else if (k == "beta0_cnt") cfg.mask.beta0_cnt = to_double(full, v);
    else if (k == "beta0_ba") cfg.mask.beta0_ba = to_double(full, v);
    else if (k == "tree_counts") {
      for (const auto& t : split_list(v)) {
        const int n = to_int(full, t);
        if (n < 0) throw ConfigError(full + ": tree counts must be nonnegative");
        cfg.tree_counts.push_back(n);
      }
    } else if (k == "one_se") {
      const std::string t = trim(v);
      if (t != "largest" && t != "smallest") {
        throw ConfigError(full + ": expected largest or smallest, got '" + t + "'");
      }
      cfg.one_se_largest = t == "largest";
    }
  }
  if (cfg.n_folds < 1) throw ConfigError("cv.n_folds must be at least 1");
  cfg.mask.validate();
  if (cfg.tree_counts.empty()) {
    const int n = r.mixture ? std::max({r.mixture_spec.classifier.n_trees,
                                        r.mixture_spec.bulk.n_trees, r.mixture_spec.tail.n_trees})
                            : r.params.n_trees;
    cfg.tree_counts = default_tree_counts(n);
  }

  for (const auto& [k, v] : sec["tune"]) {
    const std::string full = "tune." + k;
    if (k == "max_iters") {
      cfg.max_iters = to_int(full, v);
      if (cfg.max_iters < 1) throw ConfigError(full + " must be at least 1");
    } else if (k == "seed") {
      cfg.tune_seed = to_seed(full, v);
    } else {
      const auto b = split_list(v);
      if (b.size() != 2) throw ConfigError(full + ": expected 'lo, hi'");
      TuneDim d{k, to_double(full, b[0]), to_double(full, b[1]), integer_dim(k)};
      if (!(d.hi > d.lo)) throw ConfigError(full + ": need lo < hi");
      Recipe probe = r;
      set_recipe_param(probe, k, d.lo);
      cfg.dims.push_back(d);
    }
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_config(io::read_text_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Context {
  std::ostream& out;
  std::uint64_t seed = 0;
};

void kv(std::ostream& out, const std::string& key, double v) {
  out << key << '=' << io::format_double(v) << '\n';
}
void kv(std::ostream& out, const std::string& key, long long v) {
  out << key << '=' << v << '\n';
}

GridDataset load_data(const RunConfig& cfg, const std::string& override_path) {
  fs::path p = override_path.empty() ? cfg.data : fs::path(override_path);
  if (p.empty()) throw ConfigError("no dataset given (data.train or --data)");
  if (!fs::exists(p)) throw ConfigError("data file not found: " + p.string());
  return load_csv(p, cfg.schema);
}

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_config(path);
}

std::vector<std::size_t> all_rows(const GridDataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

// Mean training loss over rows with an observed response.
double mean_loss(const BoostedModel& m, const GridDataset& ds, const std::vector<double>& y) {
  std::vector<std::size_t> use;
  Responses resp;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (is_missing(y[i])) continue;
    use.push_back(i);
    resp.y.push_back(y[i]);
  }
  if (use.empty()) return kMissing;
  const Matrix x = ds.feature_matrix(m.feature_names).select_rows(use);
  return total_loss(m.loss, resp, predict_raw(m, x)) / static_cast<double>(use.size());
}

void apply_loss_override(RunConfig& cfg, const std::string& name) {
  Recipe& r = cfg.recipe;
  if (name == "mixture") {
    r.mixture = true;
    r.threshold_score = true;
    r.score = ThresholdScoreSpec::sizes();
    return;
  }
  const LossKind kind = parse_loss_kind(name);
  if (kind == LossKind::kTrGamma && r.loss.kind != kind) r.loss.u_trunc = std::log1p(r.plan.u);
  r.loss.kind = kind;
  r.loss.validate();
  r.mixture = false;
  r.response = default_response(kind);
}

int cmd_synth(Context& ctx, const SynthSpec& spec, const std::string& out) {
  ctx.seed = spec.seed;
  const GridDataset ds = synthesize(spec);
  io::write_text_file(out, dataset_to_csv(ds));
  kv(ctx.out, "rows", static_cast<long long>(ds.size()));
  kv(ctx.out, "cells", static_cast<long long>(ds.cells().size()));
  return kExitOk;
}

int cmd_train(Context& ctx, const std::string& config, const std::string& loss,
              const std::string& data, const std::string& out) {
  RunConfig cfg = load_config(config);
  if (!loss.empty()) apply_loss_override(cfg, loss);
  const Recipe& r = cfg.recipe;
  ctx.seed = r.params.seed;
  const GridDataset prepared = r.plan.apply(load_data(cfg, data));
  const FittedRecipe fitted = fit_recipe(r, prepared, all_rows(prepared));
  if (fitted.mixture) {
    const MixtureModel& m = *fitted.mixture;
    save_mixture(m, out);
    const auto ba = response_values(prepared, Response::kBa, m.u());
    std::vector<double> cls, bulk, tail;
    for (double b : ba) {
      cls.push_back(class_response(b, m.u()));
      bulk.push_back(bulk_response(b, m.u()));
      tail.push_back(excess_response(b, m.u()));
    }
    kv(ctx.out, "rounds", static_cast<long long>(m.classifier().n_rounds()));
    kv(ctx.out, "classifier_loss", mean_loss(m.classifier(), prepared, cls));
    kv(ctx.out, "bulk_loss", mean_loss(m.bulk(), prepared, bulk));
    kv(ctx.out, "tail_loss", mean_loss(m.tail(), prepared, tail));
  } else {
    const BoostedModel& m = *fitted.model;
    save_model_file(m, out);
    kv(ctx.out, "rounds", static_cast<long long>(m.n_rounds()));
    kv(ctx.out, "train_loss",
       mean_loss(m, prepared, response_values(prepared, r.response, r.plan.u)));
  }
  return kExitOk;
}

std::string threshold_column(double t) { return "p_le_" + io::format_double(t); }

int cmd_predict(Context& ctx, const std::string& model_path, const std::string& data,
                const std::string& thresholds, const std::string& config, const std::string& out) {
  const RunConfig cfg = config_or_default(config);
  GridDataset ds = load_data(cfg, data);
  if (ds.size() > 0) ds = cfg.recipe.plan.apply(ds);
  if (!fs::exists(model_path)) throw ConfigError("model file not found: " + model_path);
  std::optional<ThresholdScoreSpec> spec;
  if (!thresholds.empty()) {
    if (!fs::exists(thresholds)) throw ConfigError("thresholds file not found: " + thresholds);
    spec = parse_thresholds(io::read_text_file(thresholds));
  }

  std::vector<std::string> header{"lon", "lat", "year", "month"};
  Matrix values;
  if (is_mixture_manifest(model_path)) {
    const MixtureModel m = load_mixture(model_path);
    if (!spec) spec = ThresholdScoreSpec::sizes();
    for (double t : spec->thresholds) header.push_back(threshold_column(t));
    values = m.threshold_probs(ds.feature_matrix(m.feature_names()), spec->thresholds);
  } else {
    const BoostedModel m = load_model_file(model_path);
    const Matrix x = ds.feature_matrix(m.feature_names);
    if (spec) {
      for (double t : spec->thresholds) header.push_back(threshold_column(t));
      values = count_threshold_probs(m, x, spec->thresholds);
    } else {
      const Matrix raw = predict_raw(m, x);
      std::vector<std::pair<std::string, OutputMap>> cols;
      if (m.loss.multiclass()) {
        for (int c = 0; c < m.n_outputs(); ++c) {
          cols.emplace_back("prob_" + std::to_string(c), output_map(m.loss, "prob", c));
        }
      } else {
        cols.emplace_back("raw", output_map(m.loss, "raw"));
        if (m.loss.kind == LossKind::kPoisson || m.loss.kind == LossKind::kDgpd) {
          cols.emplace_back("mean", output_map(m.loss, "mean"));
        }
      }
      values = Matrix(raw.rows(), cols.size());
      for (std::size_t j = 0; j < cols.size(); ++j) {
        header.push_back(cols[j].first);
        for (std::size_t i = 0; i < raw.rows(); ++i) values(i, j) = cols[j].second(raw.row(i));
      }
    }
  }

  std::string csv = io::csv_line(header);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& o = ds.rows()[i];
    const auto& c = ds.cells()[static_cast<std::size_t>(o.cell)];
    std::vector<std::string> row{io::format_double(c.lon), io::format_double(c.lat),
                                 std::to_string(o.year), std::to_string(o.month)};
    for (double v : values.row(i)) row.push_back(io::format_double(v));
    csv += io::csv_line(row);
  }
  io::write_text_file(out, csv);
  kv(ctx.out, "rows", static_cast<long long>(ds.size()));
  kv(ctx.out, "columns", static_cast<long long>(header.size() - 4));
  return kExitOk;
}

FoldSet folds_for(const RunConfig& cfg, const GridDataset& ds) {
  if (!cfg.folds.empty()) return parse_folds(io::read_text_file(cfg.folds), ds);
  return generate_folds(ds, cfg.mask, cfg.n_folds, cfg.cv_seed).folds;
}

int cmd_cvfolds(Context& ctx, const std::string& config, std::optional<int> n_folds,
                std::optional<std::uint64_t> seed, const std::string& data,
                const std::string& out) {
  RunConfig cfg = load_config(config);
  if (n_folds) cfg.n_folds = *n_folds;
  if (seed) cfg.cv_seed = *seed;
  ctx.seed = cfg.cv_seed;
  const GridDataset ds = load_data(cfg, data);
  const FoldGeneration gen = generate_folds(ds, cfg.mask, cfg.n_folds, cfg.cv_seed);
  io::write_text_file(out, folds_to_csv(gen.folds, ds));
  kv(ctx.out, "n_folds", static_cast<long long>(gen.folds.n_folds));
  kv(ctx.out, "beta0_cnt", gen.beta0_cnt);
  kv(ctx.out, "beta0_ba", gen.beta0_ba);
  for (int f = 0; f < gen.folds.n_folds; ++f) {
    kv(ctx.out, "fold_" + std::to_string(f) + "_cnt",
       static_cast<long long>(gen.folds.keys(f, MaskResponse::kCnt).size()));
    kv(ctx.out, "fold_" + std::to_string(f) + "_ba",
       static_cast<long long>(gen.folds.keys(f, MaskResponse::kBa).size()));
  }
  return kExitOk;
}

int cmd_cv(Context& ctx, const std::string& config, const std::string& data,
           const std::string& out) {
  const RunConfig cfg = load_config(config);
  ctx.seed = cfg.cv_seed;
  const GridDataset ds = load_data(cfg, data);
  CvOptions opt;
  opt.tree_counts = cfg.tree_counts;
  const CvResult cv = run_cv(ds, folds_for(cfg, ds), cfg.recipe, opt);
  io::write_text_file(out, cv_report_csv(cv));
  const int t = one_se_select(cv, cfg.one_se_largest);
  const auto idx = static_cast<std::size_t>(
      std::find(cv.tree_counts.begin(), cv.tree_counts.end(), t) - cv.tree_counts.begin());
  kv(ctx.out, "selected_trees", static_cast<long long>(t));
  kv(ctx.out, "mean_score", cv.mean(idx));
  kv(ctx.out, "se", cv.se(idx));
  return kExitOk;
}

int cmd_tune(Context& ctx, const std::string& config, std::optional<int> max_iters,
             std::optional<std::uint64_t> seed, const std::string& data, const std::string& out) {
  RunConfig cfg = load_config(config);
  if (max_iters) cfg.max_iters = *max_iters;
  if (seed) cfg.tune_seed = *seed;
  if (cfg.dims.empty()) throw ConfigError("[tune] lists no search dimensions");
  if (cfg.max_iters < 1) throw ConfigError("--max-iters must be at least 1");
  ctx.seed = cfg.tune_seed;
  const GridDataset ds = load_data(cfg, data);
  CvOptions opt;
  opt.tree_counts = cfg.tree_counts;
  const auto recs =
      tune(ds, folds_for(cfg, ds), cfg.recipe, cfg.dims, opt, cfg.max_iters, cfg.tune_seed);
  io::write_text_file(out, tuning_log_csv(cfg.dims, recs));
  const auto best = std::min_element(recs.begin(), recs.end(), [](const auto& a, const auto& b) {
    return a.score < b.score;
  });
  kv(ctx.out, "iterations", static_cast<long long>(recs.size()));
  kv(ctx.out, "best_iteration", static_cast<long long>(best->iteration));
  kv(ctx.out, "best_score", best->score);
  kv(ctx.out, "best_trees", static_cast<long long>(best->selected_trees));
  for (std::size_t d = 0; d < cfg.dims.size(); ++d) {
    kv(ctx.out, "best." + cfg.dims[d].name, best->point[d]);
  }
  return kExitOk;
}

int cmd_score(Context& ctx, const std::string& predictions, const std::string& data,
              const std::string& response, const std::string& thresholds,
              const std::string& config) {
  const RunConfig cfg = config_or_default(config);
  const GridDataset ds = load_data(cfg, data);
  if (!fs::exists(predictions)) throw ConfigError("predictions file not found: " + predictions);
  const auto recs = io::parse_csv(io::read_text_file(predictions));
  if (recs.empty()) throw DataError("predictions file is empty");
  const auto& head = recs[0].fields;
  const std::vector<std::string> keys{"lon", "lat", "year", "month"};
  if (head.size() < 5 || !std::equal(keys.begin(), keys.end(), head.begin())) {
    throw DataError("predictions need lon,lat,year,month then probability columns");
  }
  ThresholdScoreSpec spec;
  for (std::size_t j = 4; j < head.size(); ++j) {
    if (head[j].rfind("p_le_", 0) != 0) {
      throw DataError("predictions column '" + head[j] + "' is not a threshold probability");
    }
    spec.thresholds.push_back(to_double("predictions header", head[j].substr(5)));
    spec.weights.push_back(1.0);
  }
  if (!thresholds.empty()) {
    if (!fs::exists(thresholds)) throw ConfigError("thresholds file not found: " + thresholds);
    const auto w = parse_thresholds(io::read_text_file(thresholds));
    if (w.thresholds != spec.thresholds) {
      throw ConfigError("thresholds file does not match the prediction columns");
    }
    spec = w;
  }
  spec.validate();
  if (recs.size() - 1 != ds.size()) {
    throw DataError("predictions have " + std::to_string(recs.size() - 1) + " rows, data has " +
                    std::to_string(ds.size()));
  }
  const bool cnt = response == "cnt";
  if (!cnt && response != "ba") throw ConfigError("--response must be cnt or ba");

  std::vector<std::vector<double>> probs;
  std::vector<double> truth;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& f = recs[i + 1].fields;
    const std::string where = "predictions line " + std::to_string(recs[i + 1].line);
    if (f.size() != head.size()) throw DataError(where + ": wrong field count");
    const auto& o = ds.rows()[i];
    const auto& c = ds.cells()[static_cast<std::size_t>(o.cell)];
    if (std::abs(to_double(where, f[0]) - c.lon) > 1e-9 ||
        std::abs(to_double(where, f[1]) - c.lat) > 1e-9 || to_int(where, f[2]) != o.year ||
        to_int(where, f[3]) != o.month) {
      throw DataError(where + ": does not match data row " + std::to_string(i + 1));
    }
    const double y = cnt ? o.cnt : o.ba;
    if (is_missing(y)) continue;
    std::vector<double> p;
    for (std::size_t j = 4; j < f.size(); ++j) p.push_back(to_double(where, f[j]));
    probs.push_back(std::move(p));
    truth.push_back(y);
  }
  Matrix pm(probs.size(), spec.thresholds.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    for (std::size_t j = 0; j < probs[i].size(); ++j) pm(i, j) = probs[i][j];
  kv(ctx.out, "score", threshold_score(pm, truth, spec));
  kv(ctx.out, "n", static_cast<long long>(truth.size()));
  return kExitOk;
}

BoostedModel load_single(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw ConfigError("model file not found: " + path);
  if (is_mixture_manifest(path)) {
    throw ConfigError(std::string(what) + " needs a single model file, not a mixture manifest");
  }
  return load_model_file(path);
}

int cmd_pdp(Context& ctx, const std::string& model_path, const std::string& data,
            const std::vector<std::string>& features, std::size_t grid_size, PdpOptions opt,
            const std::string& transform, int cls, const std::string& config,
            const std::string& out) {
  const RunConfig cfg = config_or_default(config);
  const BoostedModel m = load_single(model_path, "pdp");
  GridDataset ds = load_data(cfg, data);
  if (ds.size() > 0) ds = cfg.recipe.plan.apply(ds);
  ctx.seed = opt.seed;
  const Matrix x = ds.feature_matrix(m.feature_names);
  std::vector<std::size_t> s;
  std::vector<std::vector<double>> axes;
  for (const auto& f : features) {
    const auto it = std::find(m.feature_names.begin(), m.feature_names.end(), f);
    if (it == m.feature_names.end()) throw ConfigError("model has no feature '" + f + "'");
    s.push_back(static_cast<std::size_t>(it - m.feature_names.begin()));
    axes.push_back(quantile_grid(x, s.back(), grid_size));
  }
  // Cartesian product, last feature fastest.
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.size();
  Matrix grid(n, s.size());
  for (std::size_t g = 0; g < n; ++g) {
    std::size_t rem = g;
    for (std::size_t a = s.size(); a-- > 0;) {
      grid(g, a) = axes[a][rem % axes[a].size()];
      rem /= axes[a].size();
    }
  }
  opt.transform = output_map(m.loss, transform, cls);
  const PdpResult res = partial_dependence(m, x, s, grid, opt);
  io::write_text_file(out, pdp_csv(res, features));
  kv(ctx.out, "points", static_cast<long long>(n));
  kv(ctx.out, "n_sub", static_cast<long long>(std::min(opt.n_sub, x.rows())));
  return kExitOk;
}

int cmd_importance(Context& ctx, const std::string& model_path, const std::string& metric,
                   const std::string& out) {
  const BoostedModel m = load_single(model_path, "importance");
  const auto imp = importance(m, parse_importance_metric(metric));
  if (!out.empty()) io::write_text_file(out, importance_csv(imp));
  for (const auto& [name, v] : imp) kv(ctx.out, name, v);
  return kExitOk;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient boosted models for wildfire counts and burnt areas"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string run_log = "evgbm-run.log";
  app.add_option("--run-log", run_log, "Append a run record here (empty to disable)");

  Context ctx{out};
  std::function<int()> action;
  std::string config_path;

  // synth
  SynthSpec synth;
  std::string synth_out;
  auto* s_synth = app.add_subcommand("synth", "Write a seeded synthetic dataset");
  s_synth->add_option("--out", synth_out, "Output CSV")->required();
  s_synth->add_option("--seed", synth.seed, "Random seed");
  s_synth->add_option("--nx", synth.nx, "Grid columns");
  s_synth->add_option("--ny", synth.ny, "Grid rows");
  s_synth->add_option("--years", synth.years, "Number of years");
  s_synth->add_option("--alpha", synth.alpha, "Count tail index");
  s_synth->add_option("--mask-cnt", synth.mask_cnt, "Share of counts set to NA");
  s_synth->add_option("--mask-ba", synth.mask_ba, "Share of burnt areas set to NA");
  s_synth->callback([&] { action = [&] { return cmd_synth(ctx, synth, synth_out); }; });

  // train
  std::string loss_name, data_path, model_out;
  auto* s_train = app.add_subcommand("train", "Fit a model or mixture");
  s_train->add_option("--config", config_path, "Run configuration")->required();
  s_train->add_option("--loss", loss_name, "Override the loss (or 'mixture')");
  s_train->add_option("--data", data_path, "Override data.train");
  s_train->add_option("--out", model_out, "Model JSON or mixture manifest")->required();
  s_train->callback([&] {
    action = [&] { return cmd_train(ctx, config_path, loss_name, data_path, model_out); };
  });

  // predict
  std::string model_path, thresholds_path, pred_out;
  auto* s_pred = app.add_subcommand("predict", "Predict from a model or mixture");
  s_pred->add_option("--model", model_path, "Model JSON or mixture manifest")->required();
  s_pred->add_option("--data", data_path, "Dataset CSV")->required();
  s_pred->add_option("--thresholds", thresholds_path, "Thresholds CSV");
  s_pred->add_option("--config", config_path, "Schema and feature plan");
  s_pred->add_option("--out", pred_out, "Predictions CSV")->required();
  s_pred->callback([&] {
    action = [&] {
      return cmd_predict(ctx, model_path, data_path, thresholds_path, config_path, pred_out);
    };
  });

  // cvfolds
  std::optional<int> n_folds;
  std::optional<std::uint64_t> seed_opt;
  std::string folds_out;
  auto* s_folds = app.add_subcommand("cvfolds", "Simulate cross-validation masks");
  s_folds->add_option("--config", config_path, "Run configuration")->required();
  s_folds->add_option("--n-folds", n_folds, "Number of folds");
  s_folds->add_option("--seed", seed_opt, "Random seed");
  s_folds->add_option("--data", data_path, "Override data.train");
  s_folds->add_option("--out", folds_out, "Folds CSV")->required();
  s_folds->callback([&] {
    action = [&] { return cmd_cvfolds(ctx, config_path, n_folds, seed_opt, data_path, folds_out); };
  });

  // cv
  std::string cv_out;
  auto* s_cv = app.add_subcommand("cv", "Cross-validate over tree counts");
  s_cv->add_option("--config", config_path, "Run configuration")->required();
  s_cv->add_option("--data", data_path, "Override data.train");
  s_cv->add_option("--out", cv_out, "CV report CSV")->required();
  s_cv->callback([&] { action = [&] { return cmd_cv(ctx, config_path, data_path, cv_out); }; });

  // tune
  std::optional<int> max_iters;
  std::string tune_out;
  auto* s_tune = app.add_subcommand("tune", "Bayesian optimization of hyperparameters");
  s_tune->add_option("--config", config_path, "Run configuration")->required();
  s_tune->add_option("--max-iters", max_iters, "Number of evaluations");
  s_tune->add_option("--seed", seed_opt, "Random seed");
  s_tune->add_option("--data", data_path, "Override data.train");
  s_tune->add_option("--out", tune_out, "Tuning log CSV")->required();
  s_tune->callback([&] {
    action = [&] { return cmd_tune(ctx, config_path, max_iters, seed_opt, data_path, tune_out); };
  });

  // score
  std::string pred_path, response = "cnt";
  auto* s_score = app.add_subcommand("score", "Threshold score of predictions");
  s_score->add_option("--predictions", pred_path, "Predictions CSV")->required();
  s_score->add_option("--data", data_path, "Dataset with observed responses")->required();
  s_score->add_option("--response", response, "cnt or ba");
  s_score->add_option("--thresholds", thresholds_path, "Thresholds CSV with weights");
  s_score->add_option("--config", config_path, "Schema");
  s_score->callback([&] {
    action = [&] {
      return cmd_score(ctx, pred_path, data_path, response, thresholds_path, config_path);
    };
  });

  // pdp
  std::vector<std::string> pdp_features;
  std::size_t grid_size = 20;
  PdpOptions pdp_opt;
  std::string transform = "raw", pdp_out;
  int cls = 0;
  auto* s_pdp = app.add_subcommand("pdp", "Partial dependence");
  s_pdp->add_option("--model", model_path, "Model JSON")->required();
  s_pdp->add_option("--data", data_path, "Dataset CSV")->required();
  s_pdp->add_option("--feature", pdp_features, "Feature (repeat for a joint grid)")->required();
  s_pdp->add_option("--grid-size", grid_size, "Points per feature");
  s_pdp->add_option("--n-sub", pdp_opt.n_sub, "Subsample size");
  s_pdp->add_option("--transform", transform, "raw, mean or prob");
  s_pdp->add_option("--class", cls, "Output index for raw or prob");
  s_pdp->add_option("--seed", pdp_opt.seed, "Random seed");
  s_pdp->add_option("--config", config_path, "Schema and feature plan");
  s_pdp->add_option("--out", pdp_out, "PDP CSV")->required();
  s_pdp->callback([&] {
    action = [&] {
      return cmd_pdp(ctx, model_path, data_path, pdp_features, grid_size, pdp_opt, transform, cls,
                     config_path, pdp_out);
    };
  });

  // importance
  std::string metric = "gain", imp_out;
  auto* s_imp = app.add_subcommand("importance", "Gain or coverage importance");
  s_imp->add_option("--model", model_path, "Model JSON")->required();
  s_imp->add_option("--metric", metric, "gain or coverage");
  s_imp->add_option("--out", imp_out, "Importance CSV");
  s_imp->callback([&] {
    action = [&] { return cmd_importance(ctx, model_path, metric, imp_out); };
  });

  std::vector<std::string> argv_store{"evgbm"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const auto start = std::chrono::steady_clock::now();
  int code = kExitOk;
  try {
    code = action();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    code = kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    code = kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    code = kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    code = kExitNumeric;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!run_log.empty()) {
    std::string hashed;
    for (const auto& a : args) hashed += a + '\x1f';
    if (!config_path.empty() && fs::exists(config_path)) {
      try {
        hashed += io::read_text_file(config_path);
      } catch (const std::exception&) {
      }
    }
    std::ofstream log(run_log, std::ios::app);
    log << "command=" << app.get_subcommands().front()->get_name()
        << " config_hash=" << hex64(fnv1a(hashed)) << " seed=" << ctx.seed
        << " wall_time_s=" << io::format_double(wall) << " exit=" << code << '\n';
    if (!log) err << "warning: cannot write run log " << run_log << '\n';
  }
  return code;
}

}  // namespace evgbm::cli
