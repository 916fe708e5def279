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

#ifndef EVGBM_MIXTURE_HPP_
#define EVGBM_MIXTURE_HPP_

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evgbm/booster.hpp"
#include "evgbm/matrix.hpp"

namespace evgbm {

/// Zero / bulk / tail model for burned area. The bulk component is a
/// truncated gamma on log1p(ba) for 0 < ba <= u; the tail is a GPD on ba - u.
class MixtureModel {
 public:
  MixtureModel(BoostedModel classifier, BoostedModel bulk, BoostedModel tail, double u);

  const BoostedModel& classifier() const { return classifier_; }
  const BoostedModel& bulk() const { return bulk_; }
  const BoostedModel& tail() const { return tail_; }
  double u() const { return u_; }

  /// Union of the component feature names, in first-seen order. Query
  /// vectors follow this order.
  const std::vector<std::string>& feature_names() const { return features_; }

  std::array<double, 3> component_probs(std::span<const double> x) const;
  /// Conditional CDF of the bulk on (0, u] and of the tail excess.
  double bulk_cdf(std::span<const double> x, double b) const;
  double tail_scale(std::span<const double> x) const;

  /// P(BA <= b | x). Throws DataError for negative b.
  double cdf(std::span<const double> x, double b) const;

  /// Row i, column j = cdf(x_i, thresholds[j]). Thresholds must be sorted.
  Matrix threshold_probs(const Matrix& x, std::span<const double> thresholds) const;

 private:
  std::vector<double> project(std::span<const double> x, const std::vector<int>& cols) const;
  double bulk_cdf_at(double theta, double b) const;

  BoostedModel classifier_;
  BoostedModel bulk_;
  BoostedModel tail_;
  double u_;
  std::vector<std::string> features_;
  std::vector<int> classifier_cols_;
  std::vector<int> bulk_cols_;
  std::vector<int> tail_cols_;
};

struct MixtureTrainSpec {
  double u = 200.0;
  double xi = 0.8;
  double kappa = 0.5;
  double k_shape = 1.0;
  TrainParams classifier;
  TrainParams bulk;
  TrainParams tail;
};

/// Component responses from burned area: class index, log1p(ba) for the
/// bulk, ba - u for the tail. Missing ba stays missing; rows outside a
/// component's support are missing for that component.
double class_response(double ba, double u);
double bulk_response(double ba, double u);
double excess_response(double ba, double u);

/// Fits the three components on the rows with observed ba.
MixtureModel fit_mixture(const Matrix& x, std::span<const double> ba,
                         const std::vector<std::string>& feature_names,
                         const MixtureTrainSpec& spec);

/// Manifest: JSON naming the three component model files (relative to the
/// manifest) plus u, xi, kappa and k.
inline constexpr int kManifestFormatVersion = 1;
void save_mixture(const MixtureModel& m, const std::filesystem::path& manifest);
MixtureModel load_mixture(const std::filesystem::path& manifest);
/// True if the document at `path` is a mixture manifest.
bool is_mixture_manifest(const std::filesystem::path& path);

}  // namespace evgbm

#endif  // EVGBM_MIXTURE_HPP_
