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

#include "evgbm/spatialcv.hpp"

#include <cmath>
#include <map>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/random/normal_distribution.hpp>

#include "evgbm/errors.hpp"
#include "evgbm/io.hpp"
#include "evgbm/special.hpp"

namespace evgbm {

void MaskModelParams::validate() const {
  if (!(range > 0.0)) throw ConfigError("mask model range must be positive");
  if (!(sigma_gp >= 0.0)) throw ConfigError("mask model sigma must be >= 0");
  if (!(nu > 0.0)) throw ConfigError("mask model nu must be positive");
  if (!(phi >= 0.0)) throw ConfigError("mask model phi must be >= 0");
  if (!std::isfinite(beta)) throw ConfigError("mask model beta must be finite");
}

double matern_cov(double d, double range, double sigma_gp, double nu) {
  const double var = sigma_gp * sigma_gp;
  if (d <= 0.0) return var;
  const double x = std::sqrt(8.0 * nu) / range * d;
  if (x > 700.0) return 0.0;
  return var * std::exp((1.0 - nu) * std::log(2.0) + nu * std::log(x) - std::lgamma(nu)) *
         std::cyl_bessel_k(nu, x);
}

FieldSampler::FieldSampler(const std::vector<GridCell>& cells, const MaskModelParams& params)
    : n_(cells.size()), zero_(params.sigma_gp == 0.0) {
  params.validate();
  if (zero_ || n_ == 0) return;
  Eigen::MatrixXd cov(n_, n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double d = std::hypot(cells[i].lon - cells[j].lon, cells[i].lat - cells[j].lat);
      cov(i, j) = cov(j, i) = matern_cov(d, params.range, params.sigma_gp, params.nu);
    }
  }
  cov.diagonal().array() += 1e-8 * params.sigma_gp * params.sigma_gp;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericError("Matern covariance is not positive definite after jitter");
  }
  chol_ = llt.matrixL();
}

std::vector<double> FieldSampler::draw(CounterRng& rng) const {
  std::vector<double> out(n_, 0.0);
  if (zero_ || n_ == 0) return out;
  boost::random::normal_distribution<double> normal;
  Eigen::VectorXd z(n_);
  for (std::size_t i = 0; i < n_; ++i) z[i] = normal(rng);
  const Eigen::VectorXd g = chol_.triangularView<Eigen::Lower>() * z;
  for (std::size_t i = 0; i < n_; ++i) out[i] = g[i];
  return out;
}

std::vector<std::vector<double>> simulate_field(const std::vector<GridCell>& cells,
                                                const MaskModelParams& params,
                                                std::uint64_t seed, int n_replicates) {
  const FieldSampler sampler(cells, params);
  std::vector<std::vector<double>> out;
  for (int r = 0; r < n_replicates; ++r) {
    CounterRng rng(seed, {static_cast<std::uint64_t>(r)});
    out.push_back(sampler.draw(rng));
  }
  return out;
}

double expected_mask_rate(double beta0, double variance) {
  if (variance <= 0.0) return special::expit(beta0);
  const double sd = std::sqrt(variance);
  auto f = [&](double t) { return special::expit(beta0 + sd * t) * special::normal_pdf(t); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -12.0, 12.0, 10,
                                                                       1e-13);
}

double calibrate_intercept(double rate, double variance) {
  if (!(rate > 0.0 && rate < 1.0)) {
    throw DataError("cannot calibrate a masking intercept to rate " + io::format_double(rate));
  }
  auto f = [&](double b) { return expected_mask_rate(b, variance) - rate; };
  std::uintmax_t iters = 200;
  boost::math::tools::eps_tolerance<double> tol(50);
  const auto [lo, hi] = boost::math::tools::toms748_solve(f, -60.0, 60.0, tol, iters);
  return 0.5 * (lo + hi);
}

std::string_view to_string(MaskResponse r) { return r == MaskResponse::kCnt ? "cnt" : "ba"; }

std::vector<std::size_t> FoldSet::validation_rows(const GridDataset& ds, int fold,
                                                  MaskResponse r) const {
  const auto& k = keys(fold, r);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& o = ds.rows()[i];
    if (k.count({o.cell, o.year, o.month})) rows.push_back(i);
  }
  return rows;
}

FoldGeneration generate_folds(const GridDataset& ds, const MaskModelParams& params, int n_folds,
                              std::uint64_t seed) {
  params.validate();
  if (n_folds < 1) throw ConfigError("n_folds must be at least 1");
  const double var_cnt = params.sigma_gp * params.sigma_gp + params.phi;
  const double var_ba = params.beta * params.beta * params.sigma_gp * params.sigma_gp + params.phi;

  // Observed masking rates drive the intercepts unless given.
  std::size_t masked_cnt = 0, masked_ba = 0;
  for (const auto& r : ds.rows()) {
    masked_cnt += is_missing(r.cnt);
    masked_ba += is_missing(r.ba);
  }
  const double n = static_cast<double>(ds.size());
  const double b0_cnt = params.beta0_cnt ? *params.beta0_cnt
                                         : calibrate_intercept(masked_cnt / n, var_cnt);
  const double b0_ba =
      params.beta0_ba ? *params.beta0_ba : calibrate_intercept(masked_ba / n, var_ba);

  std::map<std::pair<int, int>, std::vector<std::size_t>> by_month;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_month[{ds.rows()[i].year, ds.rows()[i].month}].push_back(i);
  }
  const FieldSampler sampler(ds.cells(), params);
  const double noise_sd = std::sqrt(params.phi);

  FoldGeneration out{FoldSet{n_folds, {}}, b0_cnt, b0_ba};
  out.folds.masks.resize(n_folds);
  for (int f = 0; f < n_folds; ++f) {
    for (const auto& [ym, rows] : by_month) {
      CounterRng rng(seed, {static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(ym.first),
                            static_cast<std::uint64_t>(ym.second)});
      const auto g = sampler.draw(rng);
      boost::random::normal_distribution<double> normal;
      const double eps_cnt = noise_sd * normal(rng);
      const double eps_ba = noise_sd * normal(rng);
      for (auto i : rows) {
        const auto& o = ds.rows()[i];
        const double mu_cnt = b0_cnt + g[o.cell] + eps_cnt;
        const double mu_ba = b0_ba + params.beta * g[o.cell] + eps_ba;
        // Draw both indicators even when one key is dropped, so the stream
        // does not depend on the existing masks.
        const bool m_cnt = rng.uniform() < special::expit(mu_cnt);
        const bool m_ba = rng.uniform() < special::expit(mu_ba);
        const FoldKey key{o.cell, o.year, o.month};
        if (m_cnt && !is_missing(o.cnt)) out.folds.masks[f][0].insert(key);
        if (m_ba && !is_missing(o.ba)) out.folds.masks[f][1].insert(key);
      }
    }
  }
  return out;
}

std::string folds_to_csv(const FoldSet& folds, const GridDataset& ds) {
  std::string out = "fold,response,lon,lat,year,month\n";
  for (int f = 0; f < folds.n_folds; ++f) {
    for (auto r : {MaskResponse::kCnt, MaskResponse::kBa}) {
      for (const auto& k : folds.keys(f, r)) {
        const auto& c = ds.cells().at(k.cell);
        out += std::to_string(f) + "," + std::string(to_string(r)) + "," +
               io::format_double(c.lon) + "," + io::format_double(c.lat) + "," +
               std::to_string(k.year) + "," + std::to_string(k.month) + "\n";
      }
    }
  }
  return out;
}

FoldSet parse_folds(std::string_view csv_text, const GridDataset& ds) {
  const auto records = io::parse_csv(csv_text);
  const std::vector<std::string> expect{"fold", "response", "lon", "lat", "year", "month"};
  if (records.empty() || records[0].fields != expect) {
    throw DataError("fold file must have header fold,response,lon,lat,year,month");
  }
  std::map<std::pair<double, double>, int> cell_at;
  for (const auto& c : ds.cells()) cell_at[{c.lon, c.lat}] = c.id;
  FoldSet folds;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "fold file line " + std::to_string(rec.line);
    if (rec.fields.size() != 6) throw DataError(where + ": expected 6 fields");
    int fold = 0, year = 0, month = 0;
    double lon = 0.0, lat = 0.0;
    try {
      fold = std::stoi(rec.fields[0]);
      lon = std::stod(rec.fields[2]);
      lat = std::stod(rec.fields[3]);
      year = std::stoi(rec.fields[4]);
      month = std::stoi(rec.fields[5]);
    } catch (const std::exception&) {
      throw DataError(where + ": malformed number");
    }
    if (fold < 0) throw DataError(where + ": negative fold");
    MaskResponse resp;
    if (rec.fields[1] == "cnt") resp = MaskResponse::kCnt;
    else if (rec.fields[1] == "ba") resp = MaskResponse::kBa;
    else throw DataError(where + ": response must be cnt or ba");
    // Exact match first, then the nearest cell within a small tolerance.
    auto it = cell_at.find({lon, lat});
    if (it == cell_at.end()) {
      for (auto jt = cell_at.begin(); jt != cell_at.end(); ++jt) {
        if (std::abs(jt->first.first - lon) < 1e-6 && std::abs(jt->first.second - lat) < 1e-6) {
          it = jt;
          break;
        }
      }
    }
    if (it == cell_at.end()) throw DataError(where + ": cell not in the dataset");
    if (fold >= folds.n_folds) {
      folds.n_folds = fold + 1;
      folds.masks.resize(folds.n_folds);
    }
    folds.masks[fold][static_cast<int>(resp)].insert({it->second, year, month});
  }
  return folds;
}

}  // namespace evgbm
