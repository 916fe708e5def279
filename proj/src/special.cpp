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

#include "evgbm/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "evgbm/errors.hpp"

namespace evgbm::special {
namespace {

constexpr int kMaxIterations = 100000;
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;

// log of x^a e^-x / Gamma(a)
double log_prefactor(double a, double x) {
  return a * std::log(x) - x - std::lgamma(a);
}

}  // namespace

IncompleteGamma incomplete_gamma(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) {
    throw NumericError("incomplete gamma: need a > 0 and x >= 0 (a=" +
                       std::to_string(a) + ", x=" + std::to_string(x) + ")");
  }
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (x == 0.0) return {kNegInf, 0.0};
  if (std::isinf(x)) return {0.0, kNegInf};

  if (x < a + 1.0) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int n = 0; n < kMaxIterations; ++n) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * kEps) {
        const double log_p = std::log(sum) + log_prefactor(a, x);
        return {log_p, std::log1p(-std::exp(log_p))};
      }
    }
    throw NumericError("incomplete gamma series did not converge (a=" +
                       std::to_string(a) + ", x=" + std::to_string(x) + ")");
  }

  // Modified Lentz evaluation of the continued fraction for Q.
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) {
      const double log_q = std::log(h) + log_prefactor(a, x);
      return {std::log1p(-std::exp(log_q)), log_q};
    }
  }
  throw NumericError("incomplete gamma continued fraction did not converge (a=" +
                     std::to_string(a) + ", x=" + std::to_string(x) + ")");
}

double log_lower_gamma(double a, double x) {
  return incomplete_gamma(a, x).log_p + std::lgamma(a);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace evgbm::special
