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

#include "evgbm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "evgbm/errors.hpp"
#include "evgbm/special.hpp"

namespace evgbm {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kPoisson: return "poisson";
    case LossKind::kDgpd: return "dgpd";
    case LossKind::kTrGamma: return "trgamma";
    case LossKind::kGpd: return "gpd";
    case LossKind::kCrossEntropy: return "cross_entropy";
    case LossKind::kSquaredLog: return "squared_log";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (auto kind : {LossKind::kPoisson, LossKind::kDgpd, LossKind::kTrGamma,
                    LossKind::kGpd, LossKind::kCrossEntropy, LossKind::kSquaredLog}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

void LossSpec::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("loss: " + what); };
  switch (kind) {
    case LossKind::kDgpd:
      if (!(alpha > 0.0)) fail("alpha must be positive");
      break;
    case LossKind::kTrGamma:
      if (!(k_shape > 0.0)) fail("k must be positive");
      if (!(u_trunc > 0.0)) fail("truncation u must be positive");
      break;
    case LossKind::kGpd:
      if (!(xi > 0.0)) fail("xi must be positive");
      if (!(kappa > 0.0 && kappa < 1.0)) fail("kappa must lie in (0, 1)");
      break;
    case LossKind::kCrossEntropy:
      if (n_classes < 2) fail("cross_entropy needs at least 2 classes");
      break;
    case LossKind::kPoisson:
    case LossKind::kSquaredLog:
      break;
  }
}

namespace loss {
namespace {

std::string describe(double y, double theta) {
  std::ostringstream os;
  os.precision(17);
  os << "y=" << y << ", theta=" << theta;
  return os.str();
}

bool is_count(double y) { return y >= 0.0 && std::floor(y) == y && std::isfinite(y); }

}  // namespace

LossEval poisson(double y, double theta) {
  const double mu = std::exp(theta);
  const double ylogy = y > 0.0 ? y * (std::log(y) - theta) : 0.0;
  return {ylogy - y + mu, mu - y, mu};
}

LossEval dgpd(double y, double theta, double alpha, bool raw_pmf) {
  const double lam = std::exp(theta);
  const double x0 = lam * y;
  const double x1 = lam * (y + 1.0);
  // pmf = S(y) - S(y+1) with S(t) = (1 + lam t)^-alpha. Everything below is
  // scaled by S(y) so that differences of tiny powers are never formed.
  const double log_s0 = -alpha * std::log1p(x0);
  const double log_ratio = -alpha * std::log1p(lam / (1.0 + x0));  // log S(y+1)/S(y)
  const double ratio = std::exp(log_ratio);
  const double p = -std::expm1(log_ratio);
  const double log_pmf = log_s0 + std::log(p);
  if (!std::isfinite(log_pmf) || !(p > 0.0)) {
    throw NumericError("dGPD pmf underflow at " + describe(y, theta));
  }
  // dS/dtheta = -alpha S q,  d2S/dtheta2 = alpha S q ((alpha+1) q - 1),
  // with q = lam t / (1 + lam t).
  const double q0 = x0 / (1.0 + x0);
  const double q1 = x1 / (1.0 + x1);
  const double dp = -alpha * q0 + alpha * q1 * ratio;
  const double d2p = alpha * q0 * ((alpha + 1.0) * q0 - 1.0) -
                     alpha * q1 * ((alpha + 1.0) * q1 - 1.0) * ratio;
  if (raw_pmf) {
    const double s0 = std::exp(log_s0);
    return {std::exp(log_pmf), s0 * dp, s0 * d2p};
  }
  const double g = dp / p;
  return {-log_pmf, -g, g * g - d2p / p};
}

double dgpd_log_pmf(double y, double theta, double alpha) {
  return -dgpd(y, theta, alpha).value;
}

double dgpd_cdf(double y, double theta, double alpha) {
  if (y < 0.0) return 0.0;
  const double k = std::floor(y) + 1.0;
  return -std::expm1(-alpha * std::log1p(std::exp(theta) * k));
}

double dgpd_mean(double theta, double alpha, double tol) {
  if (!(alpha > 1.0)) {
    throw DataError("dGPD mean does not exist for alpha <= 1 (alpha=" +
                    std::to_string(alpha) + ")");
  }
  const double lam = std::exp(theta);
  // m-th derivative magnitude: (alpha)_m lam^m (1 + lam x)^(-alpha-m).
  auto deriv = [&](int m, double t) {
    double rising = 1.0;
    for (int j = 0; j < m; ++j) rising *= alpha + j;
    return rising * std::pow(lam, m) * std::pow(t, -alpha - m);
  };
  constexpr long kMaxTerms = 50'000'000;
  double sum = 0.0;
  for (long k = 1; k <= kMaxTerms; ++k) {
    const double t = 1.0 + lam * static_cast<double>(k);
    const double fk = std::pow(t, -alpha);
    sum += fk;
    const double integral = std::pow(t, 1.0 - alpha) / (lam * (alpha - 1.0));
    if (integral < tol) return sum + integral;
    // Euler-Maclaurin through the fifth derivative; the next term bounds
    // the error once lam (alpha + 7) <= t.
    const bool asymptotic = lam * (alpha + 7.0) <= t;
    if (asymptotic && deriv(7, t) / 1209600.0 < tol) {
      // Signs alternate: f' < 0, f''' < 0, f^(5) < 0.
      const double tail = integral - 0.5 * fk + deriv(1, t) / 12.0 -
                          deriv(3, t) / 720.0 + deriv(5, t) / 30240.0;
      return sum + tail;
    }
  }
  throw NumericError("dGPD mean did not converge at theta=" + std::to_string(theta));
}

LossEval trgamma(double y, double theta, double k, double u) {
  if (!(y > 0.0 && y <= u)) {
    throw DataError("truncated gamma response must lie in (0, u], got " +
                    describe(y, theta) + ", u=" + std::to_string(u));
  }
  const double inv_mu = std::exp(-theta);
  const double s = k * u * inv_mu;
  const double log_gamma = special::log_lower_gamma(k, s);
  // r = s^k e^-s / gamma(k, s); d/dtheta log gamma = -r,
  // d2/dtheta2 log gamma = r (k - s - r).
  const double r = std::exp(k * std::log(s) - s - log_gamma);
  const double ykm = y * k * inv_mu;
  const double value = k * theta + ykm + log_gamma;
  if (!std::isfinite(value)) {
    throw NumericError("truncated gamma loss not finite at " + describe(y, theta));
  }
  return {value, k - ykm - r, ykm + r * (k - s - r)};
}

double trgamma_density(double x, double theta, double k, double u) {
  if (!(x > 0.0) || x > u) return 0.0;
  const double scale = std::exp(theta) / k;
  const double log_f = -k * std::log(scale) + (k - 1.0) * std::log(x) - x / scale -
                       special::log_lower_gamma(k, u / scale);
  return std::exp(log_f);
}

double trgamma_cdf(double x, double theta, double k, double u) {
  if (!(x > 0.0)) return 0.0;
  if (x >= u) return 1.0;
  const double inv_scale = k * std::exp(-theta);
  return std::exp(special::incomplete_gamma(k, x * inv_scale).log_p -
                  special::incomplete_gamma(k, u * inv_scale).log_p);
}

namespace {
// (1 - kappa)^-xi - 1
double quantile_factor(double xi, double kappa) {
  return std::expm1(-xi * std::log1p(-kappa));
}
}  // namespace

LossEval gpd(double y, double theta, double xi, double kappa) {
  if (!(y > 0.0) || !std::isfinite(y)) {
    throw DataError("GPD response must be a positive excess, got " + describe(y, theta));
  }
  const double log_a = std::log(quantile_factor(xi, kappa)) - theta;
  const double ay = std::exp(log_a) * y;
  const double q = ay / (1.0 + ay);
  const double c = 1.0 + 1.0 / xi;
  return {c * std::log1p(ay) + std::log(xi) - log_a, 1.0 - c * q,
          c * q / (1.0 + ay)};
}

double gpd_scale(double theta, double xi, double kappa) {
  return xi * std::exp(theta) / quantile_factor(xi, kappa);
}

double gpd_theta(double sigma, double xi, double kappa) {
  return std::log(quantile_factor(xi, kappa) * sigma / xi);
}

double gpd_cdf(double x, double sigma, double xi) {
  if (!(x > 0.0)) return 0.0;
  return -std::expm1(-std::log1p(xi * x / sigma) / xi);
}

void softmax(std::span<const double> z, std::span<double> out) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    out[c] = std::exp(z[c] - zmax);
    total += out[c];
  }
  for (auto& v : out) v /= total;
}

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> out(z.size());
  softmax(z, out);
  return out;
}

MultiLossEval cross_entropy(int label, std::span<const double> theta, double weight) {
  const int n = static_cast<int>(theta.size());
  if (label < 0 || label >= n) {
    throw DataError("class label " + std::to_string(label) + " outside [0, " +
                    std::to_string(n) + ")");
  }
  MultiLossEval out;
  out.grad.resize(n);
  out.hess.resize(n);
  const double zmax = *std::max_element(theta.begin(), theta.end());
  double total = 0.0;
  for (int c = 0; c < n; ++c) total += std::exp(theta[c] - zmax);
  const double lse = zmax + std::log(total);
  out.value = weight * (lse - theta[label]);
  for (int c = 0; c < n; ++c) {
    const double p = std::exp(theta[c] - lse);
    out.grad[c] = weight * (p - (c == label ? 1.0 : 0.0));
    out.hess[c] = weight * p * (1.0 - p);
  }
  return out;
}

MultiLossEval cross_entropy(std::span<const double> one_hot,
                            std::span<const double> theta, double weight) {
  if (one_hot.size() != theta.size()) {
    throw DataError("one-hot target and score lengths differ");
  }
  int label = -1;
  for (std::size_t c = 0; c < one_hot.size(); ++c) {
    if (one_hot[c] == 1.0 && label < 0) {
      label = static_cast<int>(c);
    } else if (one_hot[c] != 0.0) {
      throw DataError("target is not one-hot");
    }
  }
  if (label < 0) throw DataError("target is not one-hot");
  return cross_entropy(label, theta, weight);
}

LossEval squared_log(double y, double theta) {
  const double z = std::log1p(y);
  const double r = theta - z;
  return {0.5 * r * r, r, 1.0};
}

void check_response(const LossSpec& spec, double y) {
  const auto bad = [&](const char* what) {
    std::ostringstream os;
    os.precision(17);
    os << to_string(spec.kind) << " response " << y << ": " << what;
    throw DataError(os.str());
  };
  if (!std::isfinite(y)) bad("not finite");
  switch (spec.kind) {
    case LossKind::kPoisson:
    case LossKind::kDgpd:
      if (!is_count(y)) bad("must be a nonnegative integer");
      break;
    case LossKind::kTrGamma:
      if (!(y > 0.0 && y <= spec.u_trunc)) bad("must lie in (0, u]");
      break;
    case LossKind::kGpd:
      if (!(y > 0.0)) bad("must be a positive excess");
      break;
    case LossKind::kSquaredLog:
      if (y < 0.0) bad("must be nonnegative");
      break;
    case LossKind::kCrossEntropy:
      if (!(y >= 0.0 && y < spec.n_classes && std::floor(y) == y)) {
        bad("must be a class index");
      }
      break;
  }
}

LossEval evaluate(const LossSpec& spec, double y, double theta) {
  check_response(spec, y);
  switch (spec.kind) {
    case LossKind::kPoisson: return poisson(y, theta);
    case LossKind::kDgpd: return dgpd(y, theta, spec.alpha, spec.raw_pmf_loss);
    case LossKind::kTrGamma: return trgamma(y, theta, spec.k_shape, spec.u_trunc);
    case LossKind::kGpd: return gpd(y, theta, spec.xi, spec.kappa);
    case LossKind::kSquaredLog: return squared_log(y, theta);
    case LossKind::kCrossEntropy: break;
  }
  throw DataError("cross_entropy is vector-valued; use loss::cross_entropy");
}

}  // namespace loss
}  // namespace evgbm
