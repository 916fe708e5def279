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
#include <filesystem>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <doctest.h>

#include "evgbm/errors.hpp"
#include "evgbm/io.hpp"
#include "evgbm/losses.hpp"
#include "evgbm/mixture.hpp"
#include "test_support.hpp"

using namespace evgbm;
using evgbm::testing::draw_mixture;
using evgbm::testing::MixturePoint;
using evgbm::testing::TestRng;

namespace {

BoostedModel constant(LossSpec loss, std::vector<double> base) {
  BoostedModel m;
  m.loss = loss;
  m.base_score = std::move(base);
  m.feature_names = {"x"};
  return m;
}

MixtureModel constant_mixture(std::vector<double> class_scores, double bulk_theta,
                              double tail_theta, double u = 200.0, double k = 1.5,
                              double xi = 0.8, double kappa = 0.5) {
  LossSpec ce;
  ce.kind = LossKind::kCrossEntropy;
  LossSpec tg;
  tg.kind = LossKind::kTrGamma;
  tg.k_shape = k;
  tg.u_trunc = std::log1p(u);
  LossSpec gp;
  gp.kind = LossKind::kGpd;
  gp.xi = xi;
  gp.kappa = kappa;
  return MixtureModel(constant(ce, std::move(class_scores)), constant(tg, {bulk_theta}),
                      constant(gp, {tail_theta}), u);
}

const std::vector<double> kX{0.0};

}  // namespace

TEST_CASE("component probabilities") {
  const auto m = constant_mixture({0, 0, 0}, 1.0, 3.0);
  for (double p : m.component_probs(kX)) CHECK(p == doctest::Approx(1.0 / 3.0));
  const auto m2 = constant_mixture({0, std::log(2.0), std::log(3.0)}, 1.0, 3.0);
  const auto p = m2.component_probs(kX);
  CHECK(p[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(p[2] == doctest::Approx(1.0 / 2.0).epsilon(1e-14));
  TestRng rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto r = constant_mixture({rng.normal(0, 5), rng.normal(0, 5), rng.normal(0, 5)}, 1, 3)
                       .component_probs(kX);
    CHECK(std::abs(r[0] + r[1] + r[2] - 1.0) < 1e-12);
  }
}

TEST_CASE("cdf composition") {
  const auto m = constant_mixture({std::log(0.9), std::log(0.08), std::log(0.02)}, 1.0, 3.0);
  CHECK(m.cdf(kX, 0.0) == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(m.cdf(kX, 1e12) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(m.cdf(kX, -1.0), DataError);

  // Bulk location chosen so that F2(100) = 0.75. With k = 3 the limit of F2(100)
  // as theta grows is (log 101 / log 201)^3 < 0.75, so a root exists.
  const double k = 3.0, u = 200.0;
  auto f2 = [&](double theta) {
    return loss::trgamma_cdf(std::log1p(100.0), theta, k, std::log1p(u)) - 0.75;
  };
  boost::math::tools::eps_tolerance<double> tol(50);
  const auto [lo, hi] = boost::math::tools::bisect(f2, -5.0, 5.0, tol);
  const auto m2 = constant_mixture({std::log(0.9), std::log(0.08), std::log(0.02)},
                                   0.5 * (lo + hi), 3.0, u, k);
  CHECK(m2.cdf(kX, 100.0) == doctest::Approx(0.96).epsilon(1e-10));
}

TEST_CASE("cdf shape") {
  TestRng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = constant_mixture({rng.normal(), rng.normal(), rng.normal()},
                                    rng.uniform(0.0, 5.0), rng.uniform(0.0, 7.0), 200.0,
                                    rng.uniform(0.5, 4.0), rng.uniform(0.1, 1.5),
                                    rng.uniform(0.1, 0.9));
    const auto p = m.component_probs(kX);
    double prev = m.cdf(kX, 0.0);
    CHECK(prev == doctest::Approx(p[0]).epsilon(1e-14));
    for (double b = 0.5; b < 5000.0; b *= 1.3) {
      const double c = m.cdf(kX, b);
      CHECK(c >= prev);
      CHECK(c <= 1.0);
      if (b <= 200.0) CHECK(c <= p[0] + p[1] + 1e-15);
      prev = c;
    }
    // No jump at u: the bulk hands over to the tail.
    const double at = m.cdf(kX, 200.0);
    CHECK(at == doctest::Approx(p[0] + p[1]).epsilon(1e-14));
    const double sigma = m.tail_scale(kX);
    CHECK(m.cdf(kX, 200.0 + 1e-6) - at <= p[2] * 1e-6 / sigma * 1.01 + 1e-15);
    CHECK(at - m.cdf(kX, 200.0 - 1e-6) <= 1e-5);
  }
}

TEST_CASE("threshold probabilities") {
  const auto m = constant_mixture({0.2, 0.4, -0.1}, 1.5, 4.0);
  Matrix x(3, 1);
  const std::vector<double> t{0.0, 1.0, 1.0, 150.0, 1e15};
  const auto probs = m.threshold_probs(x, t);
  REQUIRE(probs.cols() == 5);
  const auto p = m.component_probs(kX);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(probs(i, 0) == doctest::Approx(p[0]));
    CHECK(probs(i, 1) == probs(i, 2));
    CHECK(probs(i, 4) == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t j = 1; j < 5; ++j) CHECK(probs(i, j) >= probs(i, j - 1));
    CHECK(probs(i, 3) == m.cdf(kX, 150.0));
  }
  const std::vector<double> bad{5.0, 1.0};
  CHECK_THROWS_AS(m.threshold_probs(x, bad), DataError);
}

TEST_CASE("cdf matches Monte Carlo draws") {
  const double k = 2.0, u = 200.0, xi = 0.8, kappa = 0.5;
  const auto m = constant_mixture({0.5, 0.3, -0.4}, 2.5, 4.0, u, k, xi, kappa);
  const auto p = m.component_probs(kX);
  MixturePoint mp{{p[0], p[1], p[2]}, 2.5, 4.0, k, u, xi, kappa};
  TestRng rng(77);
  std::vector<double> draws(200000);
  for (auto& d : draws) d = draw_mixture(mp, rng);
  std::sort(draws.begin(), draws.end());
  for (double b : {0.0, 1.0, 5.0, 10.0, 30.0, 100.0, 199.0, 250.0, 500.0, 5000.0}) {
    const double emp = static_cast<double>(std::upper_bound(draws.begin(), draws.end(), b) -
                                           draws.begin()) /
                       draws.size();
    CHECK(std::abs(emp - m.cdf(kX, b)) < 0.005);
  }
}

TEST_CASE("bulk truncation must match u") {
  LossSpec ce;
  ce.kind = LossKind::kCrossEntropy;
  LossSpec tg;
  tg.kind = LossKind::kTrGamma;
  tg.u_trunc = 5.0;
  LossSpec gp;
  gp.kind = LossKind::kGpd;
  CHECK_THROWS_AS(MixtureModel(constant(ce, {0, 0, 0}), constant(tg, {1.0}), constant(gp, {1.0}),
                               200.0),
                  DataError);
}

TEST_CASE("fit and manifest round trip") {
  TestRng rng(9);
  const std::size_t n = 600;
  Matrix x(n, 2);
  std::vector<double> ba(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(-1, 1);
    x(i, 1) = rng.uniform(-1, 1);
    const double v = rng.uniform();
    if (i % 17 == 0) ba[i] = kMissing;
    else if (v < 0.4 + 0.2 * x(i, 0)) ba[i] = 0.0;
    else if (v < 0.85) ba[i] = std::min(200.0, std::expm1(-1.5 * std::log(rng.uniform())));
    else ba[i] = 200.0 + std::exp(rng.normal(4.0 + x(i, 1), 1.0));
  }
  MixtureTrainSpec spec;
  spec.classifier.n_trees = 10;
  spec.bulk.n_trees = 5;
  spec.tail.n_trees = 5;
  const auto m = fit_mixture(x, ba, {"a", "b"}, spec);
  CHECK(m.feature_names() == std::vector<std::string>{"a", "b"});
  CHECK(m.classifier().n_rounds() == 10);

  const auto dir = std::filesystem::temp_directory_path() / "evgbm_mixture_test";
  std::filesystem::create_directories(dir);
  save_mixture(m, dir / "mix.json");
  CHECK(is_mixture_manifest(dir / "mix.json"));
  CHECK_FALSE(is_mixture_manifest(dir / "mix.tail.json"));
  const auto loaded = load_mixture(dir / "mix.json");
  const std::vector<double> t{0, 10, 200, 1000};
  const auto a = m.threshold_probs(x, t);
  const auto b = loaded.threshold_probs(x, t);
  CHECK(a.data() == b.data());
  std::filesystem::remove_all(dir);
}
