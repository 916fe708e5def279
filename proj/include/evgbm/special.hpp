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

#ifndef EVGBM_SPECIAL_HPP_
#define EVGBM_SPECIAL_HPP_

namespace evgbm::special {

/// Logs of the regularized lower (P) and upper (Q) incomplete gamma
/// functions. Each is accurate even when the other is close to one.
struct IncompleteGamma {
  double log_p;
  double log_q;
};

/// P(a, x) and Q(a, x) for a > 0, x >= 0. Power series below x = a + 1,
/// Lentz continued fraction above. Throws NumericError if either fails to
/// converge.
IncompleteGamma incomplete_gamma(double a, double x);

/// log of the unregularized lower incomplete gamma function
/// gamma(a, x) = integral_0^x t^(a-1) e^(-t) dt.
double log_lower_gamma(double a, double x);

/// Standard normal CDF and density.
double normal_cdf(double z);
double normal_pdf(double z);

/// Logistic function 1 / (1 + exp(-x)).
double expit(double x);

}  // namespace evgbm::special

#endif  // EVGBM_SPECIAL_HPP_
