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

#include "evgbm/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/random/sobol.hpp>

#include "evgbm/errors.hpp"
#include "evgbm/io.hpp"
#include "evgbm/losses.hpp"
#include "evgbm/rng.hpp"
#include "evgbm/special.hpp"

namespace evgbm {

void ThresholdScoreSpec::validate() const {
  if (thresholds.empty()) throw ConfigError("score needs at least one threshold");
  if (weights.size() != thresholds.size()) {
    throw ConfigError("score weights and thresholds differ in length");
  }
  for (std::size_t j = 1; j < thresholds.size(); ++j) {
    if (!(thresholds[j] > thresholds[j - 1])) {
      throw ConfigError("score thresholds must be strictly ascending");
    }
  }
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("score weights must be nonnegative");
  }
}

ThresholdScoreSpec ThresholdScoreSpec::counts() {
  ThresholdScoreSpec s;
  for (int t = 0; t <= 9; ++t) s.thresholds.push_back(t);
  for (int t = 10; t <= 28; t += 2) s.thresholds.push_back(t);
  for (int t = 30; t <= 100; t += 10) s.thresholds.push_back(t);
  s.weights.assign(s.thresholds.size(), 1.0);
  return s;
}

ThresholdScoreSpec ThresholdScoreSpec::sizes() {
  ThresholdScoreSpec s;
  s.thresholds = {0,   1,   2,   5,    10,   20,   30,   40,    50,    60,
                  70,  80,  90,  100,  150,  200,  250,  300,   400,   500,
                  1000, 1500, 2000, 5000, 10000, 20000, 50000, 100000};
  s.weights.assign(s.thresholds.size(), 1.0);
  return s;
}

double threshold_score(const Matrix& probs, std::span<const double> y,
                       const ThresholdScoreSpec& spec) {
  spec.validate();
  if (probs.rows() != y.size() || probs.cols() != spec.thresholds.size()) {
    throw DataError("score: probabilities are " + std::to_string(probs.rows()) + "x" +
                    std::to_string(probs.cols()) + ", expected " + std::to_string(y.size()) +
                    "x" + std::to_string(spec.thresholds.size()));
  }
  if (y.empty()) throw DataError("score: no observations");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (is_missing(y[i])) throw DataError("score: response " + std::to_string(i) + " missing");
    for (std::size_t j = 0; j < spec.thresholds.size(); ++j) {
      const double p = probs(i, j);
      if (!(p >= 0.0 && p <= 1.0)) {
        throw DataError("score: probability outside [0, 1] at row " + std::to_string(i));
      }
      const double ind = y[i] <= spec.thresholds[j] ? 1.0 : 0.0;
      total += spec.weights[j] * (ind - p) * (ind - p);
    }
  }
  return total / static_cast<double>(y.size());
}

double count_cdf(const LossSpec& loss, double theta, double t) {
  if (t < 0.0) return 0.0;
  switch (loss.kind) {
    case LossKind::kPoisson:
      // P(Y <= k) = Q(k + 1, lambda).
      return std::exp(special::incomplete_gamma(std::floor(t) + 1.0, std::exp(theta)).log_q);
    case LossKind::kDgpd:
      return loss::dgpd_cdf(t, theta, loss.alpha);
    default:
      throw ConfigError("threshold probabilities need a poisson or dgpd count model, got " +
                        std::string(to_string(loss.kind)));
  }
}

Matrix count_threshold_probs(const BoostedModel& model, const Matrix& x,
                             std::span<const double> thresholds, int n_rounds) {
  const Matrix raw = predict_raw(model, x, n_rounds);
  Matrix out(x.rows(), thresholds.size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < thresholds.size(); ++j) {
      out(i, j) = count_cdf(model.loss, raw(i, 0), thresholds[j]);
    }
  }
  return out;
}

double CvResult::mean(std::size_t t) const {
  double s = 0.0;
  for (std::size_t f = 0; f < scores.rows(); ++f) s += scores(f, t);
  return s / static_cast<double>(scores.rows());
}

double CvResult::se(std::size_t t) const {
  const std::size_t n = scores.rows();
  if (n < 2) return 0.0;
  const double m = mean(t);
  double ss = 0.0;
  for (std::size_t f = 0; f < n; ++f) ss += (scores(f, t) - m) * (scores(f, t) - m);
  return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

int one_se_select(const CvResult& cv, bool largest) {
  if (cv.tree_counts.empty()) throw ConfigError("one-SE rule needs at least one tree count");
  std::size_t best = 0;
  for (std::size_t t = 1; t < cv.tree_counts.size(); ++t) {
    if (cv.mean(t) < cv.mean(best)) best = t;
  }
  const double tau = cv.mean(best) + cv.se(best);
  int pick = -1;
  for (std::size_t t = 0; t < cv.tree_counts.size(); ++t) {
    if (cv.mean(t) > tau) continue;
    const int T = cv.tree_counts[t];
    if (pick < 0 || (largest ? T > pick : T < pick)) pick = T;
  }
  return pick;
}

std::string cv_report_csv(const CvResult& cv) {
  std::vector<std::string> header{"T", "mean_score", "se"};
  for (std::size_t f = 0; f < cv.scores.rows(); ++f) header.push_back("fold_" + std::to_string(f));
  std::string out = io::csv_line(header);
  for (std::size_t t = 0; t < cv.tree_counts.size(); ++t) {
    std::vector<std::string> row{std::to_string(cv.tree_counts[t]), io::format_double(cv.mean(t)),
                                 io::format_double(cv.se(t))};
    for (std::size_t f = 0; f < cv.scores.rows(); ++f) {
      row.push_back(io::format_double(cv.scores(f, t)));
    }
    out += io::csv_line(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bayesian optimization

void Box::validate() const {
  if (lo.empty() || lo.size() != hi.size()) throw ConfigError("search box bounds mismatch");
  for (std::size_t d = 0; d < lo.size(); ++d) {
    if (!(hi[d] > lo[d])) {
      throw ConfigError("search box has zero width in dimension " + std::to_string(d));
    }
  }
}

GaussianProcess::GaussianProcess(Eigen::MatrixXd x, Eigen::VectorXd y, double length_scale,
                                 double variance, double noise)
    : x_(std::move(x)), length_scale_(length_scale), variance_(variance) {
  const auto n = x_.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = kernel(x_.row(i).transpose(), x_.row(j).transpose());
    }
  }
  k.diagonal().array() += noise;
  llt_.compute(k);
  if (llt_.info() != Eigen::Success) throw NumericError("GP kernel matrix is not positive definite");
  alpha_ = llt_.solve(y);
}

double GaussianProcess::kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  return variance_ * std::exp(-0.5 * (a - b).squaredNorm() / (length_scale_ * length_scale_));
}

std::pair<double, double> GaussianProcess::predict(const Eigen::VectorXd& x) const {
  Eigen::VectorXd ks(x_.rows());
  for (Eigen::Index i = 0; i < x_.rows(); ++i) ks[i] = kernel(x_.row(i).transpose(), x);
  const double mean = ks.dot(alpha_);
  const double var = variance_ - ks.dot(llt_.solve(ks));
  return {mean, std::sqrt(std::max(var, 0.0))};
}

double expected_improvement(double mean, double sd, double best) {
  const double diff = best - mean;
  if (!(sd > 0.0)) return std::max(diff, 0.0);
  const double z = diff / sd;
  return diff * special::normal_cdf(z) + sd * special::normal_pdf(z);
}

namespace {

constexpr double kLengthScale = 0.25;  // box width / 4 after normalization
constexpr double kNoise = 1e-6;
constexpr int kCandidates = 1024;

}  // namespace

Surrogate fit_surrogate(std::span<const Trial> history, const Box& box) {
  box.validate();
  const auto d = static_cast<Eigen::Index>(box.dims());
  const auto n = static_cast<Eigen::Index>(history.size());
  if (n == 0) throw ConfigError("surrogate needs at least one trial");
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = history[i];
    if (t.point.size() != box.dims()) throw ConfigError("trial dimension does not match the box");
    for (Eigen::Index j = 0; j < d; ++j) {
      x(i, j) = (t.point[j] - box.lo[j]) / (box.hi[j] - box.lo[j]);
    }
    y[i] = t.score;
  }
  const double offset = y.mean();
  y.array() -= offset;
  double var = n > 1 ? y.squaredNorm() / static_cast<double>(n - 1) : 0.0;
  if (!(var > 0.0)) var = 1.0;
  const double best = (y.array() + offset).minCoeff();
  return {GaussianProcess(x, y, kLengthScale, var, kNoise * var), offset, best};
}

std::vector<double> bo_suggest(std::span<const Trial> history, const Box& box,
                               std::uint64_t seed) {
  box.validate();
  const std::size_t d = box.dims();
  CounterRng rng(seed, {static_cast<std::uint64_t>(history.size())});
  std::vector<double> out(d);
  if (history.empty()) {
    for (std::size_t j = 0; j < d; ++j) out[j] = box.lo[j] + rng.uniform() * (box.hi[j] - box.lo[j]);
    return out;
  }
  const Surrogate s = fit_surrogate(history, box);
  // Sobol points with a random Cranley-Patterson shift.
  std::vector<double> shift(d);
  for (auto& v : shift) v = rng.uniform();
  boost::random::sobol qrng(d);
  std::vector<double> u(d);
  Eigen::VectorXd cand(static_cast<Eigen::Index>(d));
  double best_ei = -1.0;
  for (int c = 0; c < kCandidates; ++c) {
    for (std::size_t j = 0; j < d; ++j) {
      double v = static_cast<double>(qrng()) / (static_cast<double>(qrng.max()) + 1.0) + shift[j];
      cand[static_cast<Eigen::Index>(j)] = v - std::floor(v);
    }
    const auto [mean, sd] = s.gp.predict(cand);
    const double ei = expected_improvement(mean + s.offset, sd, s.best);
    if (ei > best_ei) {
      best_ei = ei;
      for (std::size_t j = 0; j < d; ++j) {
        out[j] = box.lo[j] + cand[static_cast<Eigen::Index>(j)] * (box.hi[j] - box.lo[j]);
      }
    }
  }
  return out;
}

}  // namespace evgbm
