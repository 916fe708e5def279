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

#ifndef EVGBM_SPATIALCV_HPP_
#define EVGBM_SPATIALCV_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "evgbm/dataset.hpp"
#include "evgbm/rng.hpp"

namespace evgbm {

/// Forward model of the masking process. Latent field g_m is Matern with
/// range r (degrees), standard deviation sigma_gp and smoothness nu; the
/// month-level noise has variance phi. Unset intercepts are calibrated to
/// the dataset's observed masking rates.
struct MaskModelParams {
  std::optional<double> beta0_cnt;
  std::optional<double> beta0_ba;
  double beta = 0.42;
  double range = 3.0;
  double sigma_gp = 1.5;
  double nu = 1.0;
  double phi = 0.25;

  void validate() const;
};

/// sigma^2 2^(1-nu) (kappa d)^nu K_nu(kappa d) / Gamma(nu), kappa = sqrt(8 nu) / r.
double matern_cov(double d, double range, double sigma_gp, double nu);

/// Draws zero-mean Matern fields over a fixed set of cells. The covariance
/// is factorized once with a diagonal jitter of 1e-8 sigma^2.
class FieldSampler {
 public:
  FieldSampler(const std::vector<GridCell>& cells, const MaskModelParams& params);
  std::vector<double> draw(CounterRng& rng) const;
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  bool zero_;
  Eigen::MatrixXd chol_;
};

/// `n_replicates` independent fields; replicate r uses stream (seed, r).
std::vector<std::vector<double>> simulate_field(const std::vector<GridCell>& cells,
                                                const MaskModelParams& params,
                                                std::uint64_t seed, int n_replicates);

/// E[expit(beta0 + Z)], Z ~ N(0, variance), by quadrature.
double expected_mask_rate(double beta0, double variance);
/// The beta0 giving the target expected rate. Throws DataError unless
/// 0 < rate < 1.
double calibrate_intercept(double rate, double variance);

enum class MaskResponse { kCnt = 0, kBa = 1 };
std::string_view to_string(MaskResponse r);

struct FoldKey {
  int cell;
  int year;
  int month;
  auto operator<=>(const FoldKey&) const = default;
};

/// Validation keys per fold and response.
struct FoldSet {
  int n_folds = 0;
  std::vector<std::array<std::set<FoldKey>, 2>> masks;

  const std::set<FoldKey>& keys(int fold, MaskResponse r) const {
    return masks.at(fold)[static_cast<int>(r)];
  }
  /// Rows of `ds` held out for `r` in `fold`.
  std::vector<std::size_t> validation_rows(const GridDataset& ds, int fold,
                                           MaskResponse r) const;
};

/// Intercepts actually used (after calibration).
struct FoldGeneration {
  FoldSet folds;
  double beta0_cnt;
  double beta0_ba;
};

/// For each fold and each (year, month) in `ds`: draws g_m over all cells,
/// month noises for both responses, and masks each row's key with
/// probability expit(mu). Keys already masked in `ds` are dropped.
FoldGeneration generate_folds(const GridDataset& ds, const MaskModelParams& params,
                              int n_folds = 5, std::uint64_t seed = 0);

/// CSV with columns fold, response, lon, lat, year, month.
std::string folds_to_csv(const FoldSet& folds, const GridDataset& ds);
/// Inverse of folds_to_csv; coordinates are matched to the cells of `ds`.
FoldSet parse_folds(std::string_view csv_text, const GridDataset& ds);

}  // namespace evgbm

#endif  // EVGBM_SPATIALCV_HPP_
