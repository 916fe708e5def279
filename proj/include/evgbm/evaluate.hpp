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

#ifndef EVGBM_EVALUATE_HPP_
#define EVGBM_EVALUATE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "evgbm/booster.hpp"
#include "evgbm/matrix.hpp"

namespace evgbm {

/// Weighted squared threshold-exceedance score:
/// sum_i sum_j w_j (1{y_i <= u_j} - p_ij)^2 / n.
struct ThresholdScoreSpec {
  std::vector<double> thresholds;
  std::vector<double> weights;

  /// Throws ConfigError unless thresholds strictly ascend and lengths match.
  void validate() const;
  /// 28 count thresholds (0..9, 10..28 by 2, 30..100 by 10), unit weights.
  static ThresholdScoreSpec counts();
  /// 28 burned-area thresholds from 0 to 100000 acres, unit weights.
  static ThresholdScoreSpec sizes();
};

double threshold_score(const Matrix& probs, std::span<const double> y,
                       const ThresholdScoreSpec& spec);

/// P(Y <= t) under a Poisson or dGPD count model with raw score theta.
double count_cdf(const LossSpec& loss, double theta, double t);
/// Row i, column j = P(Y_i <= thresholds[j]) for a count model.
Matrix count_threshold_probs(const BoostedModel& model, const Matrix& x,
                             std::span<const double> thresholds, int n_rounds = -1);

/// Validation scores per fold (rows) and tree count (columns).
struct CvResult {
  std::vector<int> tree_counts;
  Matrix scores;

  double mean(std::size_t t) const;
  /// Sample standard deviation across folds over sqrt(n_folds); 0 for one fold.
  double se(std::size_t t) const;
};

/// Largest (or smallest) tree count whose mean score is within one standard
/// error of the minimum mean.
int one_se_select(const CvResult& cv, bool largest = true);

std::string cv_report_csv(const CvResult& cv);

// ---------------------------------------------------------------------------
// Bayesian optimization

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dims() const { return lo.size(); }
  /// Throws ConfigError on mismatched bounds or zero width.
  void validate() const;
};

/// Zero-mean GP regression with a squared-exponential kernel on inputs in
/// [0, 1]^d.
class GaussianProcess {
 public:
  GaussianProcess(Eigen::MatrixXd x, Eigen::VectorXd y, double length_scale, double variance,
                  double noise);
  /// Posterior mean and standard deviation.
  std::pair<double, double> predict(const Eigen::VectorXd& x) const;

 private:
  double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

  Eigen::MatrixXd x_;
  double length_scale_;
  double variance_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

/// Expected improvement below `best` of a normal(mean, sd) outcome.
double expected_improvement(double mean, double sd, double best);

/// One observed (point, score) pair; lower scores are better.
struct Trial {
  std::vector<double> point;
  double score;
};

/// Next point to evaluate: maximizer of expected improvement over 1024
/// shifted Sobol candidates, or a seeded uniform draw with no history.
std::vector<double> bo_suggest(std::span<const Trial> history, const Box& box,
                               std::uint64_t seed);

/// The fitted surrogate bo_suggest uses, on normalized inputs, with scores
/// centred on their mean. Exposed for testing.
struct Surrogate {
  GaussianProcess gp;
  double offset;  // mean score added back to predictions
  double best;    // lowest observed score
};
Surrogate fit_surrogate(std::span<const Trial> history, const Box& box);

}  // namespace evgbm

#endif  // EVGBM_EVALUATE_HPP_
