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

#include "evgbm/mixture.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "evgbm/dataset.hpp"
#include "evgbm/errors.hpp"
#include "evgbm/io.hpp"
#include "evgbm/losses.hpp"

namespace evgbm {

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

std::vector<int> columns_of(const BoostedModel& m, std::vector<std::string>& features) {
  std::vector<int> cols;
  for (const auto& name : m.feature_names) {
    auto it = std::find(features.begin(), features.end(), name);
    if (it == features.end()) {
      features.push_back(name);
      it = features.end() - 1;
    }
    cols.push_back(static_cast<int>(it - features.begin()));
  }
  return cols;
}

}  // namespace

MixtureModel::MixtureModel(BoostedModel classifier, BoostedModel bulk, BoostedModel tail,
                           double u)
    : classifier_(std::move(classifier)), bulk_(std::move(bulk)), tail_(std::move(tail)), u_(u) {
  if (!(u_ > 0.0)) throw ConfigError("mixture threshold u must be positive");
  if (classifier_.loss.kind != LossKind::kCrossEntropy || classifier_.n_outputs() != 3) {
    throw DataError("mixture classifier must be a 3-class cross-entropy model");
  }
  if (bulk_.loss.kind != LossKind::kTrGamma) {
    throw DataError("mixture bulk must be a truncated gamma model");
  }
  if (!close(bulk_.loss.u_trunc, std::log1p(u_))) {
    throw DataError("bulk truncation " + io::format_double(bulk_.loss.u_trunc) +
                    " does not match log1p(u) for u = " + io::format_double(u_));
  }
  if (tail_.loss.kind != LossKind::kGpd) throw DataError("mixture tail must be a GPD model");
  classifier_cols_ = columns_of(classifier_, features_);
  bulk_cols_ = columns_of(bulk_, features_);
  tail_cols_ = columns_of(tail_, features_);
}

std::vector<double> MixtureModel::project(std::span<const double> x,
                                          const std::vector<int>& cols) const {
  if (x.size() != features_.size()) {
    throw DataError("mixture expects " + std::to_string(features_.size()) + " features, got " +
                    std::to_string(x.size()));
  }
  std::vector<double> out(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) out[j] = x[cols[j]];
  return out;
}

std::array<double, 3> MixtureModel::component_probs(std::span<const double> x) const {
  const auto p = loss::softmax(predict_raw_row(classifier_, project(x, classifier_cols_)));
  return {p[0], p[1], p[2]};
}

double MixtureModel::bulk_cdf(std::span<const double> x, double b) const {
  if (b <= 0.0) return 0.0;
  if (b >= u_) return 1.0;
  return bulk_cdf_at(predict_raw_row(bulk_, project(x, bulk_cols_))[0], b);
}

double MixtureModel::bulk_cdf_at(double theta, double b) const {
  if (b <= 0.0) return 0.0;
  if (b >= u_) return 1.0;
  return loss::trgamma_cdf(std::log1p(b), theta, bulk_.loss.k_shape, bulk_.loss.u_trunc);
}

double MixtureModel::tail_scale(std::span<const double> x) const {
  const double theta = predict_raw_row(tail_, project(x, tail_cols_))[0];
  return loss::gpd_scale(theta, tail_.loss.xi, tail_.loss.kappa);
}

double MixtureModel::cdf(std::span<const double> x, double b) const {
  if (!(b >= 0.0)) throw DataError("cdf needs b >= 0, got " + io::format_double(b));
  const auto p = component_probs(x);
  const double f2 = bulk_cdf(x, b);
  const double f3 = b <= u_ ? 0.0 : loss::gpd_cdf(b - u_, tail_scale(x), tail_.loss.xi);
  return std::min(1.0, p[0] + p[1] * f2 + p[2] * f3);
}

Matrix MixtureModel::threshold_probs(const Matrix& x, std::span<const double> thresholds) const {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw DataError("thresholds must be sorted ascending");
  }
  for (double t : thresholds) {
    if (!(t >= 0.0)) throw DataError("thresholds must be nonnegative");
  }
  Matrix out(x.rows(), thresholds.size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    const auto p = component_probs(row);
    const double bulk_theta = predict_raw_row(bulk_, project(row, bulk_cols_))[0];
    const double sigma = tail_scale(row);
    for (std::size_t j = 0; j < thresholds.size(); ++j) {
      const double b = thresholds[j];
      const double f2 = bulk_cdf_at(bulk_theta, b);
      const double f3 = b <= u_ ? 0.0 : loss::gpd_cdf(b - u_, sigma, tail_.loss.xi);
      out(i, j) = std::min(1.0, p[0] + p[1] * f2 + p[2] * f3);
    }
  }
  return out;
}

double class_response(double ba, double u) {
  return is_missing(ba) ? kMissing : static_cast<double>(ba_class(ba, u));
}

double bulk_response(double ba, double u) {
  return ba > 0.0 && ba <= u ? std::log1p(ba) : kMissing;
}

double excess_response(double ba, double u) { return ba > u ? ba - u : kMissing; }

MixtureModel fit_mixture(const Matrix& x, std::span<const double> ba,
                         const std::vector<std::string>& feature_names,
                         const MixtureTrainSpec& spec) {
  if (ba.size() != x.rows()) throw DataError("burned area length does not match the features");
  std::vector<std::size_t> all_rows, bulk_rows, tail_rows;
  Responses cls, bulk, tail;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    if (is_missing(ba[i])) continue;
    all_rows.push_back(i);
    cls.y.push_back(class_response(ba[i], spec.u));
    if (const double z = bulk_response(ba[i], spec.u); !is_missing(z)) {
      bulk_rows.push_back(i);
      bulk.y.push_back(z);
    }
    if (const double e = excess_response(ba[i], spec.u); !is_missing(e)) {
      tail_rows.push_back(i);
      tail.y.push_back(e);
    }
  }
  if (bulk_rows.empty()) throw DataError("no burned areas in (0, u] to fit the bulk");
  if (tail_rows.empty()) throw DataError("no burned areas above u to fit the tail");

  LossSpec ce;
  ce.kind = LossKind::kCrossEntropy;
  ce.n_classes = 3;
  LossSpec tg;
  tg.kind = LossKind::kTrGamma;
  tg.k_shape = spec.k_shape;
  tg.u_trunc = std::log1p(spec.u);
  LossSpec gp;
  gp.kind = LossKind::kGpd;
  gp.xi = spec.xi;
  gp.kappa = spec.kappa;
  return MixtureModel(
      fit(x.select_rows(all_rows), cls, ce, spec.classifier, feature_names),
      fit(x.select_rows(bulk_rows), bulk, tg, spec.bulk, feature_names),
      fit(x.select_rows(tail_rows), tail, gp, spec.tail, feature_names), spec.u);
}

// ---------------------------------------------------------------------------
// Manifest

void save_mixture(const MixtureModel& m, const std::filesystem::path& manifest) {
  const auto stem = manifest.stem().string();
  const auto dir = manifest.parent_path();
  nlohmann::ordered_json doc;
  doc["format_version"] = kManifestFormatVersion;
  doc["kind"] = "mixture";
  doc["u"] = m.u();
  doc["xi"] = m.tail().loss.xi;
  doc["kappa"] = m.tail().loss.kappa;
  doc["k"] = m.bulk().loss.k_shape;
  const std::pair<const char*, const BoostedModel*> parts[] = {
      {"classifier", &m.classifier()}, {"bulk", &m.bulk()}, {"tail", &m.tail()}};
  for (const auto& [name, model] : parts) {
    const std::string file = stem + "." + name + ".json";
    save_model_file(*model, dir / file);
    doc[name] = file;
  }
  io::write_text_file(manifest, doc.dump(1) + "\n");
}

namespace {

nlohmann::json parse_manifest(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace

bool is_mixture_manifest(const std::filesystem::path& path) {
  const auto doc = parse_manifest(path);
  return doc.is_object() && doc.value("kind", "") == "mixture";
}

MixtureModel load_mixture(const std::filesystem::path& manifest) {
  const auto doc = parse_manifest(manifest);
  try {
    if (doc.at("format_version").get<int>() != kManifestFormatVersion) {
      throw DataError("unsupported manifest format_version");
    }
    if (doc.at("kind").get<std::string>() != "mixture") throw DataError("not a mixture manifest");
    const auto dir = manifest.parent_path();
    MixtureModel m(load_model_file(dir / doc.at("classifier").get<std::string>()),
                   load_model_file(dir / doc.at("bulk").get<std::string>()),
                   load_model_file(dir / doc.at("tail").get<std::string>()),
                   doc.at("u").get<double>());
    if (!close(doc.at("xi").get<double>(), m.tail().loss.xi) ||
        !close(doc.at("kappa").get<double>(), m.tail().loss.kappa) ||
        !close(doc.at("k").get<double>(), m.bulk().loss.k_shape)) {
      throw DataError("manifest shape parameters disagree with the component models");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest schema violation: " + std::string(e.what()));
  }
}

}  // namespace evgbm
