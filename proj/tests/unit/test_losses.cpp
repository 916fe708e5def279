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

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <doctest.h>

#include "evgbm/errors.hpp"
#include "evgbm/losses.hpp"
#include "evgbm/special.hpp"
#include "test_support.hpp"

using namespace evgbm;
using evgbm::testing::central_diff;
using evgbm::testing::rel_err;
using evgbm::testing::TestRng;

TEST_CASE("incomplete gamma agrees with boost") {
  TestRng rng(7);
  for (int i = 0; i < 300; ++i) {
    const double a = rng.uniform(0.05, 40.0);
    const double x = rng.uniform(0.0, 3.0) * a + rng.uniform(0.0, 2.0);
    const auto ig = special::incomplete_gamma(a, x);
    const double p = boost::math::gamma_p(a, x);
    const double q = boost::math::gamma_q(a, x);
    CHECK(rel_err(std::exp(ig.log_p), p, 1e-300) < 1e-12);
    CHECK(rel_err(std::exp(ig.log_q), q, 1e-300) < 1e-12);
  }
  CHECK(std::isinf(special::incomplete_gamma(2.0, 0.0).log_p));
  CHECK_THROWS_AS(special::incomplete_gamma(-1.0, 1.0), NumericError);
}

TEST_CASE("lower incomplete gamma matches quadrature") {
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (double a : {0.5, 1.0, 2.5, 7.0}) {
    for (double s : {0.1, 1.0, 4.0, 15.0}) {
      const double q = integrator.integrate(
          [a](double t) { return std::pow(t, a - 1.0) * std::exp(-t); }, 0.0, s);
      CHECK(rel_err(std::exp(special::log_lower_gamma(a, s)), q, 1e-300) < 1e-10);
    }
  }
}

TEST_CASE("poisson loss examples") {
  CHECK(loss::poisson(0, 0).value == doctest::Approx(1.0));
  CHECK(loss::poisson(1, 0).value == doctest::Approx(0.0));
  CHECK(loss::poisson(2, 0).value == doctest::Approx(2 * std::log(2.0) - 1).epsilon(1e-12));
  CHECK(loss::poisson(2, 0).value == doctest::Approx(0.386294).epsilon(1e-6));
  const auto e = loss::poisson(3, 0.5);
  CHECK(e.grad == doctest::Approx(std::exp(0.5) - 3));
  CHECK(e.hess == doctest::Approx(std::exp(0.5)));
}

TEST_CASE("dgpd loss examples") {
  CHECK(loss::dgpd(0, 0, 1).value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  // pmf = 1/4 - 1/9 = 5/36
  CHECK(loss::dgpd(1, 0, 2).value == doctest::Approx(std::log(36.0 / 5.0)).epsilon(1e-14));
  CHECK(loss::dgpd(1, 0, 2).value == doctest::Approx(1.974081).epsilon(1e-6));
  const auto e = loss::dgpd(1, 0, 1);
  CHECK(e.grad == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  const double fd = central_diff([](double t) { return loss::dgpd(1, t, 1).value; }, 0.0, 1e-6);
  CHECK(e.grad == doctest::Approx(fd).epsilon(1e-8));
}

TEST_CASE("dgpd raw pmf switch returns the pmf and its raw derivatives") {
  const double y = 3, theta = -0.4, alpha = 2.5;
  const auto raw = loss::dgpd(y, theta, alpha, true);
  const double lam = std::exp(theta);
  const double pmf = std::pow(1 + lam * y, -alpha) - std::pow(1 + lam * (y + 1), -alpha);
  CHECK(raw.value == doctest::Approx(pmf).epsilon(1e-13));
  // Printed derivative of the pmf, term by term.
  const double g = -alpha * std::pow(1 + lam * y, -alpha - 1) * lam * y +
                   alpha * std::pow(1 + lam * (y + 1), -alpha - 1) * lam * (y + 1);
  const double h = -alpha * (-alpha - 1) * std::pow(1 + lam * y, -alpha - 2) * std::pow(lam * y, 2) -
                   alpha * std::pow(1 + lam * y, -alpha - 1) * lam * y +
                   alpha * (-alpha - 1) * std::pow(1 + lam * (y + 1), -alpha - 2) *
                       std::pow(lam * (y + 1), 2) +
                   alpha * std::pow(1 + lam * (y + 1), -alpha - 1) * lam * (y + 1);
  CHECK(raw.grad == doctest::Approx(g).epsilon(1e-12));
  CHECK(raw.hess == doctest::Approx(h).epsilon(1e-12));
  // The negative log form follows by the chain rule.
  const auto nll = loss::dgpd(y, theta, alpha);
  CHECK(nll.grad == doctest::Approx(-g / pmf).epsilon(1e-12));
  CHECK(nll.hess == doctest::Approx(-(pmf * h - g * g) / (pmf * pmf)).epsilon(1e-12));
}

TEST_CASE("dgpd underflow is reported, not clamped") {
  CHECK_THROWS_AS(loss::dgpd(0, -800, 2), NumericError);
}

TEST_CASE("dgpd pmf telescopes") {
  for (double alpha : {0.5, 2.0, 52.0}) {
    for (double theta : {-2.0, 0.0, 1.5}) {
      const int K = 10000;
      double mass = 0.0;
      for (int k = 0; k <= K; ++k) mass += std::exp(loss::dgpd_log_pmf(k, theta, alpha));
      const double expect = 1.0 - std::pow(1.0 + std::exp(theta) * (K + 1), -alpha);
      CHECK(std::abs(mass - expect) < 1e-12);
      CHECK(loss::dgpd_cdf(K, theta, alpha) == doctest::Approx(expect).epsilon(1e-14));
    }
  }
}

TEST_CASE("dgpd mean") {
  const double expect = std::numbers::pi * std::numbers::pi / 6.0 - 1.0;
  CHECK(std::abs(loss::dgpd_mean(0.0, 2.0) - expect) < 1e-10);
  CHECK(loss::dgpd_mean(0.0, 2.0) == doctest::Approx(0.644934).epsilon(1e-6));
  CHECK_THROWS_AS(loss::dgpd_mean(0.0, 1.0), DataError);
  CHECK_THROWS_AS(loss::dgpd_mean(0.0, 0.5), DataError);
  double prev = loss::dgpd_mean(-2.0, 2.0);
  for (double theta = -1.5; theta <= 20.0; theta += 0.5) {
    const double m = loss::dgpd_mean(theta, 2.0);
    CHECK(m < prev);
    CHECK(m > 0.0);
    prev = m;
  }
  CHECK(loss::dgpd_mean(30.0, 2.0) < 1e-20);
}

TEST_CASE("dgpd mean matches brute-force partial sums") {
  // Brute force with a long explicit sum plus the integral midpoint bound.
  for (double alpha : {1.5, 3.0, 52.0}) {
    for (double theta : {-3.0, -0.5, 0.0, 2.0}) {
      const double lam = std::exp(theta);
      const long K = 2'000'000;
      long double s = 0.0L;
      for (long k = K; k >= 1; --k) s += std::pow(1.0L + lam * k, -(long double)alpha);
      const double lo = std::pow(1 + lam * (K + 1), 1 - alpha) / (lam * (alpha - 1));
      const double hi = std::pow(1 + lam * K, 1 - alpha) / (lam * (alpha - 1));
      const double m = loss::dgpd_mean(theta, alpha);
      // tol is absolute: the tail bound may be added as is once it drops below 1e-12
      CHECK(m >= static_cast<double>(s) + lo - 1e-12 - 1e-9 * m);
      CHECK(m <= static_cast<double>(s) + hi + 1e-12 + 1e-9 * m);
    }
  }
}

TEST_CASE("truncated gamma examples") {
  CHECK(loss::trgamma(0.5, 0, 1, 1).value ==
        doctest::Approx(0.5 + std::log(1 - std::exp(-1.0))).epsilon(1e-13));
  CHECK(loss::trgamma(0.5, 0, 1, 1).value == doctest::Approx(0.041325).epsilon(1e-5));
  CHECK(loss::trgamma(2, 0, 1, 1e9).value == doctest::Approx(2.0).epsilon(1e-12));
  const auto e = loss::trgamma(1, 0.5, 2, 3);
  const double fd = central_diff([](double t) { return loss::trgamma(1, t, 2, 3).value; }, 0.5, 1e-5);
  CHECK(rel_err(e.grad, fd) < 1e-6);
  CHECK_THROWS_AS(loss::trgamma(0.0, 0, 1, 1), DataError);
  CHECK_THROWS_AS(loss::trgamma(1.5, 0, 1, 1), DataError);
}

TEST_CASE("truncated gamma density integrates to one and matches its cdf") {
  boost::math::quadrature::tanh_sinh<double> integrator;
  TestRng rng(3);
  for (int i = 0; i < 10; ++i) {
    const double k = rng.uniform(0.5, 5.0);
    const double u = rng.uniform(0.5, 10.0);
    const double theta = rng.uniform(-1.0, 2.5);
    const double mass = integrator.integrate(
        [&](double x) { return loss::trgamma_density(x, theta, k, u); }, 0.0, u);
    CHECK(std::abs(mass - 1.0) < 1e-8);
    const double half = integrator.integrate(
        [&](double x) { return loss::trgamma_density(x, theta, k, u); }, 0.0, u / 2);
    CHECK(std::abs(half - loss::trgamma_cdf(u / 2, theta, k, u)) < 1e-9);
  }
  CHECK(loss::trgamma_cdf(0.0, 0.3, 2, 4) == 0.0);
  CHECK(loss::trgamma_cdf(4.0, 0.3, 2, 4) == 1.0);
}

TEST_CASE("gpd examples") {
  CHECK(loss::gpd(1, 0, 1, 0.5).value == doctest::Approx(2 * std::log(2.0)).epsilon(1e-14));
  const auto e = loss::gpd(2, 0.3, 0.8, 0.5);
  const double fd =
      central_diff([](double t) { return loss::gpd(2, t, 0.8, 0.5).value; }, 0.3, 1e-5);
  CHECK(rel_err(e.grad, fd) < 1e-6);
  CHECK_THROWS_AS(loss::gpd(0.0, 0, 1, 0.5), DataError);
}

TEST_CASE("gpd reparameterization matches the standard density") {
  TestRng rng(11);
  for (int i = 0; i < 50; ++i) {
    const double sigma = rng.uniform(0.1, 50.0);
    const double xi = rng.uniform(0.05, 2.0);
    const double kappa = rng.uniform(0.01, 0.99);
    const double y = rng.uniform(0.01, 500.0);
    const double theta = std::log((std::pow(1 - kappa, -xi) - 1) * sigma / xi);
    const double nll = std::log(sigma) + (1 + 1 / xi) * std::log1p(xi * y / sigma);
    CHECK(std::abs(loss::gpd(y, theta, xi, kappa).value - nll) < 1e-10);
    // exp(theta) is the kappa-quantile
    CHECK(loss::gpd_cdf(std::exp(theta), sigma, xi) == doctest::Approx(kappa).epsilon(1e-12));
    CHECK(loss::gpd_scale(theta, xi, kappa) == doctest::Approx(sigma).epsilon(1e-12));
    CHECK(loss::gpd_theta(sigma, xi, kappa) == doctest::Approx(theta).epsilon(1e-12));
  }
}

TEST_CASE("cross entropy examples") {
  const std::vector<double> zero{0, 0, 0};
  const std::vector<double> y0{1, 0, 0};
  CHECK(loss::cross_entropy(y0, zero, 1).value == doctest::Approx(std::log(3.0)));
  CHECK(loss::cross_entropy(y0, zero, 2).value == doctest::Approx(2 * std::log(3.0)));
  const std::vector<double> theta{0, 10, 0};
  const std::vector<double> y1{0, 1, 0};
  const double v = loss::cross_entropy(y1, theta, 1).value;
  CHECK(v == doctest::Approx(std::log1p(2 * std::exp(-10.0))).epsilon(1e-12));
  CHECK(v == doctest::Approx(9.080e-5).epsilon(1e-3));
  const std::vector<double> bad{1, 1, 0};
  CHECK_THROWS_AS(loss::cross_entropy(bad, zero, 1), DataError);
}

TEST_CASE("cross entropy is shift invariant") {
  TestRng rng(5);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> t{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const double shift = rng.uniform(-20, 20);
    std::vector<double> s{t[0] + shift, t[1] + shift, t[2] + shift};
    const int label = rng.integer(0, 2);
    const auto a = loss::cross_entropy(label, t, 1.3);
    const auto b = loss::cross_entropy(label, s, 1.3);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
    for (int c = 0; c < 3; ++c) CHECK(a.grad[c] == doctest::Approx(b.grad[c]).epsilon(1e-12));
  }
}

TEST_CASE("squared log examples") {
  CHECK(loss::squared_log(0, 0).value == 0.0);
  CHECK(loss::squared_log(std::exp(1.0) - 1, 0).value == doctest::Approx(0.5).epsilon(1e-14));
  const auto e = loss::squared_log(0, 2);
  CHECK(e.value == 2.0);
  CHECK(e.grad == 2.0);
  CHECK(e.hess == 1.0);
}

TEST_CASE("loss spec validation and dispatch") {
  LossSpec spec;
  spec.kind = LossKind::kGpd;
  spec.kappa = 1.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.kappa = 0.5;
  CHECK_NOTHROW(spec.validate());
  CHECK_THROWS_AS(loss::evaluate(spec, -1.0, 0.0), DataError);
  spec.kind = LossKind::kDgpd;
  CHECK_THROWS_AS(loss::evaluate(spec, 1.5, 0.0), DataError);
  CHECK(parse_loss_kind("trgamma") == LossKind::kTrGamma);
  CHECK_THROWS_AS(parse_loss_kind("huber"), ConfigError);
}

TEST_CASE("analytic derivatives match finite differences on random points") {
  TestRng rng(2024);
  auto check = [](const std::function<LossEval(double)>& f, double theta) {
    const auto e = f(theta);
    const double g = central_diff([&](double t) { return f(t).value; }, theta, 1e-5);
    const double h = central_diff([&](double t) { return f(t).grad; }, theta, 1e-4);
    CHECK(rel_err(e.grad, g) < 1e-6);
    CHECK(rel_err(e.hess, h) < 1e-4);
  };
  for (int i = 0; i < 100; ++i) {
    const double theta = rng.uniform(-3, 3);
    const double count = rng.integer(0, 40);
    const double alpha = rng.uniform(0.5, 20);
    const double k = rng.uniform(0.5, 5);
    const double u = rng.uniform(1, 8);
    const double ybulk = rng.uniform(0.01, 1.0) * u;
    const double xi = rng.uniform(0.1, 1.5);
    const double kappa = rng.uniform(0.05, 0.95);
    const double excess = rng.uniform(0.01, 100);
    check([&](double t) { return loss::poisson(count, t); }, theta);
    check([&](double t) { return loss::dgpd(count, t, alpha); }, theta);
    check([&](double t) { return loss::trgamma(ybulk, t, k, u); }, theta);
    check([&](double t) { return loss::gpd(excess, t, xi, kappa); }, theta);
    check([&](double t) { return loss::squared_log(excess, t); }, theta);
  }
}
