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

#ifndef EVGBM_LOSSES_HPP_
#define EVGBM_LOSSES_HPP_

// Differentiable losses for the second-order boosting objective. Every
// function returns the loss value together with its first and second
// derivative with respect to the raw boosting score theta.

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evgbm {

enum class LossKind { kPoisson, kDgpd, kTrGamma, kGpd, kCrossEntropy, kSquaredLog };

std::string_view to_string(LossKind kind);
/// Parses "poisson", "dgpd", "trgamma", "gpd", "cross_entropy", "squared_log".
LossKind parse_loss_kind(std::string_view name);

/// Loss identity plus the fixed hyperparameters it reads. Fields that do not
/// apply to `kind` are ignored.
struct LossSpec {
  LossKind kind = LossKind::kSquaredLog;
  double alpha = 52.0;    // dGPD tail index, 1/xi of the count tail
  double xi = 0.8;        // GPD shape of the size excesses
  double kappa = 0.5;     // quantile level modelled by the GPD score
  double k_shape = 1.0;   // truncated gamma shape
  double u_trunc = 1.0;   // truncated gamma right truncation
  int n_classes = 3;
  bool raw_pmf_loss = false;  // dGPD: optimize the pmf itself, not -log pmf

  /// Throws ConfigError when a relevant field is out of range.
  void validate() const;
  bool multiclass() const { return kind == LossKind::kCrossEntropy; }
  int n_outputs() const { return multiclass() ? n_classes : 1; }
};

struct LossEval {
  double value = 0.0;
  double grad = 0.0;
  double hess = 0.0;
};

/// Vector-valued score (multiclass). `hess` is the diagonal.
struct MultiLossEval {
  double value = 0.0;
  std::vector<double> grad;
  std::vector<double> hess;
};

namespace loss {

/// Poisson deviance-style loss with Stirling's approximation for log(y!).
/// theta is the log mean.
LossEval poisson(double y, double theta);

/// Negative log pmf of the discrete generalized Pareto distribution,
/// -log[(1 + e^theta y)^-alpha - (1 + e^theta (y+1))^-alpha].
/// With `raw_pmf` the pmf itself and its raw derivatives are returned.
/// Throws NumericError when the pmf underflows.
LossEval dgpd(double y, double theta, double alpha, bool raw_pmf = false);

/// log pmf of the dGPD at integer y >= 0.
double dgpd_log_pmf(double y, double theta, double alpha);

/// P(Y <= y) for the dGPD.
double dgpd_cdf(double y, double theta, double alpha);

/// E[Y] = sum_{k>=1} (1 + e^theta k)^-alpha for alpha > 1. Terms are summed
/// explicitly until the Euler-Maclaurin tail estimate is accurate to `tol`;
/// the estimate is then added. Throws DataError for alpha <= 1.
double dgpd_mean(double theta, double alpha, double tol = 1e-12);

/// Right-truncated gamma negative log-likelihood (constants dropped), with
/// e^theta the mean parameter mu, shape k and truncation u:
/// k theta + y k / mu + log gamma(k, k u / mu).
LossEval trgamma(double y, double theta, double k, double u);
double trgamma_density(double x, double theta, double k, double u);
double trgamma_cdf(double x, double theta, double k, double u);

/// GPD negative log density with theta the log of the kappa-quantile of the
/// excess distribution.
LossEval gpd(double y, double theta, double xi, double kappa);
/// GPD scale sigma implied by a kappa-quantile score theta.
double gpd_scale(double theta, double xi, double kappa);
/// Inverse of gpd_scale.
double gpd_theta(double sigma, double xi, double kappa);
/// P(X <= x) for the GPD(sigma, xi), xi > 0.
double gpd_cdf(double x, double sigma, double xi);

/// Weighted softmax cross-entropy for class `label`.
MultiLossEval cross_entropy(int label, std::span<const double> theta, double weight);
/// Same, for a one-hot target vector. Throws DataError unless exactly one
/// entry is 1 and the rest are 0.
MultiLossEval cross_entropy(std::span<const double> one_hot,
                            std::span<const double> theta, double weight);

void softmax(std::span<const double> z, std::span<double> out);
std::vector<double> softmax(std::span<const double> z);

/// Squared error on z = log(1 + y).
LossEval squared_log(double y, double theta);

/// Throws DataError if y lies outside the support of a scalar loss.
void check_response(const LossSpec& spec, double y);

/// Scalar-loss dispatch. The response is checked first.
LossEval evaluate(const LossSpec& spec, double y, double theta);

}  // namespace loss
}  // namespace evgbm

#endif  // EVGBM_LOSSES_HPP_
