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
#include <vector>

#include <boost/math/distributions/poisson.hpp>
#include <doctest.h>

#include "evgbm/errors.hpp"
#include "evgbm/evaluate.hpp"
#include "evgbm/losses.hpp"
#include "evgbm/pipeline.hpp"
#include "evgbm/synth.hpp"
#include "test_support.hpp"

using namespace evgbm;
using evgbm::testing::TestRng;

namespace {

CvResult cv_of(std::vector<int> counts, std::vector<std::vector<double>> by_fold) {
  CvResult cv;
  cv.tree_counts = std::move(counts);
  cv.scores = Matrix(by_fold.size(), cv.tree_counts.size());
  for (std::size_t f = 0; f < by_fold.size(); ++f)
    for (std::size_t t = 0; t < by_fold[f].size(); ++t) cv.scores(f, t) = by_fold[f][t];
  return cv;
}

GridDataset small_synth(std::uint64_t seed = 3) {
  SynthSpec s;
  s.nx = 8;
  s.ny = 6;
  s.years = 2;
  s.seed = seed;
  return synthesize(s);
}

FoldSet some_folds(const GridDataset& ds, int n = 3) {
  MaskModelParams p;
  p.beta0_cnt = -1.5;
  p.beta0_ba = -1.5;
  return generate_folds(ds, p, n, 5).folds;
}

Recipe count_recipe() {
  Recipe r;
  r.response = Response::kCnt;
  r.loss.kind = LossKind::kDgpd;
  r.loss.alpha = 5.0;
  r.params.max_leaves = 4;
  r.features = {"temp", "dry", "noise"};
  return r;
}

}  // namespace

TEST_CASE("threshold score examples") {
  const auto spec = ThresholdScoreSpec::counts();
  CHECK(spec.thresholds.size() == 28);
  CHECK(ThresholdScoreSpec::sizes().thresholds.size() == 28);
  CHECK_NOTHROW(ThresholdScoreSpec::sizes().validate());
  const std::vector<double> y{-1.0};
  Matrix half(1, 28, 0.5);
  CHECK(threshold_score(half, y, spec) == doctest::Approx(7.0));
  const std::vector<double> ys{0.0, 5.0, 200.0};
  Matrix perfect(3, 28);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 28; ++j) perfect(i, j) = ys[i] <= spec.thresholds[j];
  CHECK(threshold_score(perfect, ys, spec) == 0.0);
  auto doubled = spec;
  for (auto& w : doubled.weights) w *= 2;
  Matrix p(3, 28, 0.3);
  CHECK(threshold_score(p, ys, doubled) == doctest::Approx(2 * threshold_score(p, ys, spec)));
  CHECK_THROWS_AS(threshold_score(Matrix(2, 28), ys, spec), DataError);
  ThresholdScoreSpec bad{{1, 1}, {1, 1}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("threshold score is proper for a constant forecast") {
  TestRng rng(1);
  std::vector<double> y(500);
  int below = 0;
  for (auto& v : y) {
    v = rng.uniform() < 0.37 ? 0.0 : 1.0;
    below += v <= 0.5;
  }
  const ThresholdScoreSpec spec{{0.5}, {1.0}};
  double best_p = -1, best = 1e300;
  for (int k = 0; k <= 1000; ++k) {
    const Matrix p(500, 1, k / 1000.0);
    const double s = threshold_score(p, y, spec);
    if (s < best) {
      best = s;
      best_p = k / 1000.0;
    }
  }
  CHECK(std::abs(best_p - below / 500.0) <= 0.001);
}

TEST_CASE("count cdfs") {
  LossSpec po;
  po.kind = LossKind::kPoisson;
  for (double theta : {-1.0, 0.5, 2.5}) {
    boost::math::poisson_distribution<> d(std::exp(theta));
    for (double t : {0.0, 1.0, 3.0, 4.5, 20.0}) {
      CHECK(count_cdf(po, theta, t) == doctest::Approx(boost::math::cdf(d, std::floor(t))).epsilon(1e-12));
    }
    CHECK(count_cdf(po, theta, -0.5) == 0.0);
  }
  LossSpec dg;
  dg.kind = LossKind::kDgpd;
  dg.alpha = 3.0;
  double mass = 0.0;
  for (int k = 0; k <= 12; ++k) mass += std::exp(loss::dgpd_log_pmf(k, 0.4, 3.0));
  CHECK(count_cdf(dg, 0.4, 12.0) == doctest::Approx(mass).epsilon(1e-13));
  LossSpec gp;
  gp.kind = LossKind::kGpd;
  CHECK_THROWS_AS(count_cdf(gp, 0.0, 1.0), ConfigError);
}

TEST_CASE("cv mean and standard error") {
  const auto cv = cv_of({10}, {{4.0}, {6.0}});
  CHECK(cv.mean(0) == 5.0);
  CHECK(cv.se(0) == doctest::Approx(1.0));
  const auto same = cv_of({10, 20}, {{3.0, 2.0}, {3.0, 2.0}, {3.0, 2.0}});
  CHECK(same.se(0) == 0.0);
  CHECK(same.se(1) == 0.0);
  const auto csv = cv_report_csv(cv);
  CHECK(csv == "T,mean_score,se,fold_0,fold_1\n10,5,1,4,6\n");
}

TEST_CASE("one standard error rule") {
  // SE at the minimum is 0.5 with two folds at 7 +- 0.5.
  const auto cv = cv_of({1, 2, 3, 4, 5}, {{10, 8, 6.5, 7.1, 7.4}, {10, 8, 7.5, 7.1, 7.4}});
  CHECK(cv.se(2) == doctest::Approx(0.5));
  CHECK(one_se_select(cv) == 5);
  CHECK(one_se_select(cv, false) == 3);
  CHECK(one_se_select(cv_of({5, 10, 15}, {{1, 1, 1}})) == 15);
  CHECK(one_se_select(cv_of({7}, {{3.0}, {4.0}})) == 7);
  // All SEs zero: argmin.
  CHECK(one_se_select(cv_of({1, 2, 3, 4}, {{5, 3, 4, 6}, {5, 3, 4, 6}})) == 2);
}

TEST_CASE("expected improvement") {
  CHECK(expected_improvement(1.0, 0.0, 2.0) == 1.0);
  CHECK(expected_improvement(3.0, 0.0, 2.0) == 0.0);
  // At mean = best: sd * phi(0).
  CHECK(expected_improvement(2.0, 0.5, 2.0) == doctest::Approx(0.5 / std::sqrt(2 * M_PI)));
}

TEST_CASE("surrogate has no improvement at the best observed point") {
  const Box box{{0.0, 0.0}, {1.0, 2.0}};
  std::vector<Trial> h{{{0.1, 0.2}, 3.0}, {{0.5, 1.0}, 1.0}, {{0.9, 1.9}, 2.0}};
  const auto s = fit_surrogate(h, box);
  Eigen::VectorXd x(2);
  x << 0.5, 0.5;  // (0.5, 1.0) normalized
  const auto [mean, sd] = s.gp.predict(x);
  CHECK(mean + s.offset == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(expected_improvement(mean + s.offset, sd, s.best) < 1e-3);
}

TEST_CASE("bo suggestions") {
  const Box box{{-1.0, 10.0}, {1.0, 20.0}};
  const auto a = bo_suggest({}, box, 4);
  CHECK(a == bo_suggest({}, box, 4));
  CHECK(a != bo_suggest({}, box, 5));
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(a[j] >= box.lo[j]);
    CHECK(a[j] <= box.hi[j]);
  }
  CHECK_THROWS_AS(bo_suggest({}, Box{{0.0}, {0.0}}, 1), ConfigError);
}

TEST_CASE("bo converges on a quadratic") {
  const Box box{{0.0}, {1.0}};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<Trial> h;
    for (int it = 0; it < 20; ++it) {
      const auto x = bo_suggest(h, box, seed);
      CHECK(x[0] >= 0.0);
      CHECK(x[0] <= 1.0);
      h.push_back({x, (x[0] - 0.3) * (x[0] - 0.3)});
    }
    const auto best = std::min_element(h.begin(), h.end(), [](const Trial& a, const Trial& b) {
      return a.score < b.score;
    });
    CHECK(std::abs(best->point[0] - 0.3) < 0.05);
  }
}

TEST_CASE("cross validation of a constant model") {
  const auto ds = small_synth();
  const auto folds = some_folds(ds);
  auto r = count_recipe();
  CvOptions opt;
  opt.tree_counts = {0};
  const auto cv = run_cv(ds, folds, r, opt);
  // With no trees the model is the base score fitted on the training rows.
  for (int f = 0; f < folds.n_folds; ++f) {
    std::vector<std::size_t> valid = folds.validation_rows(ds, f, MaskResponse::kCnt);
    Responses train;
    std::vector<double> truth;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const bool held = std::find(valid.begin(), valid.end(), i) != valid.end();
      if (held) truth.push_back(ds.rows()[i].cnt);
      else if (!is_missing(ds.rows()[i].cnt)) train.y.push_back(ds.rows()[i].cnt);
    }
    const double theta = initial_estimate(train, r.loss)[0];
    Matrix p(truth.size(), r.score.thresholds.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
      for (std::size_t j = 0; j < r.score.thresholds.size(); ++j)
        p(i, j) = loss::dgpd_cdf(r.score.thresholds[j], theta, r.loss.alpha);
    CHECK(cv.scores(f, 0) == doctest::Approx(threshold_score(p, truth, r.score)).epsilon(1e-12));
  }
}

TEST_CASE("identical folds give zero standard error") {
  const auto ds = small_synth();
  auto folds = some_folds(ds, 1);
  folds.n_folds = 3;
  folds.masks = {folds.masks[0], folds.masks[0], folds.masks[0]};
  CvOptions opt;
  opt.tree_counts = {5, 10};
  const auto cv = run_cv(ds, folds, count_recipe(), opt);
  CHECK(cv.se(0) == 0.0);
  CHECK(cv.se(1) == 0.0);
}

TEST_CASE("validation rows never influence training") {
  const auto ds = small_synth();
  const auto folds = some_folds(ds, 2);
  auto recipe = count_recipe();
  recipe.plan.impute_ba_class = true;
  recipe.plan.cross_fill = true;
  recipe.plan.aux_params.n_trees = 5;
  recipe.features = {"temp", "dry", "p_zero", "p_med", "p_large"};
  CvOptions opt;
  opt.tree_counts = {10};
  std::vector<std::string> docs(2);
  opt.on_fit = [&](int f, const FittedRecipe& m) { docs[f] = m.documents(); };
  run_cv(ds, folds, recipe, opt);
  const auto clean = docs;

  // Plant extreme values in a row validated (for both responses) in fold 0.
  const auto& kc = folds.keys(0, MaskResponse::kCnt);
  const auto& kb = folds.keys(0, MaskResponse::kBa);
  std::size_t target = ds.size();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& o = ds.rows()[i];
    const FoldKey k{o.cell, o.year, o.month};
    if (kc.count(k) && kb.count(k)) {
      target = i;
      break;
    }
  }
  REQUIRE(target < ds.size());
  std::vector<double> cnt, ba;
  for (const auto& o : ds.rows()) {
    cnt.push_back(o.cnt);
    ba.push_back(o.ba);
  }
  cnt[target] = 100000;
  ba[target] = 1e7;
  run_cv(ds.with_responses(cnt, ba), folds, recipe, opt);
  CHECK(docs[0] == clean[0]);
  CHECK(docs[1] != clean[1]);  // the sentinel is training data in fold 1
}

TEST_CASE("mixture recipe cross validation") {
  const auto ds = small_synth(8);
  const auto folds = some_folds(ds, 2);
  Recipe r;
  r.mixture = true;
  r.score = ThresholdScoreSpec::sizes();
  r.features = {"temp", "dry", "noise"};
  CvOptions opt;
  opt.tree_counts = {0, 10, 30};
  const auto cv = run_cv(ds, folds, r, opt);
  CHECK(cv.scores.rows() == 2);
  CHECK(cv.mean(2) < cv.mean(0));
}

TEST_CASE("tuning loop") {
  const auto ds = small_synth();
  const auto folds = some_folds(ds, 2);
  CvOptions opt;
  opt.tree_counts = {5, 10};
  const std::vector<TuneDim> dims{{"lambda", 0.1, 5.0, false}, {"max_leaves", 2, 8, true}};
  const auto recs = tune(ds, folds, count_recipe(), dims, opt, 3, 1);
  REQUIRE(recs.size() == 3);
  for (const auto& r : recs) {
    CHECK(r.point[1] == std::round(r.point[1]));
    CHECK((r.selected_trees == 5 || r.selected_trees == 10));
  }
  CHECK(tuning_log_csv(dims, recs).rfind("iteration,lambda,max_leaves,trees,score\n", 0) == 0);
  CHECK_THROWS_AS(tune(ds, folds, count_recipe(), {{"depth", 1, 2, true}}, opt, 1, 1),
                  ConfigError);
}
