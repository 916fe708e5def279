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

#include "evgbm/synth.hpp"

#include <cmath>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/random/normal_distribution.hpp>

#include "evgbm/errors.hpp"
#include "evgbm/rng.hpp"
#include "evgbm/special.hpp"

namespace evgbm {

namespace synth {

double count_theta(double temp, double dry) { return -2.0 + 1.5 * temp + 2.5 * dry * dry; }

double large_prob(double temp, double dry) { return special::expit(-2.5 + 1.2 * temp + 2.0 * dry); }

double bulk_theta(double temp, double dry) { return 0.3 + 0.6 * temp + 1.2 * dry; }

double tail_sigma(double temp, double dry) { return 150.0 * std::exp(0.4 * temp - 0.5 * dry); }

}  // namespace synth

GridDataset synthesize(const SynthSpec& spec) {
  if (spec.nx < 1 || spec.ny < 1 || spec.years < 1) throw ConfigError("synthetic grid is empty");
  if (!(spec.alpha > 0.0 && spec.xi > 0.0 && spec.u > 0.0 && spec.bulk_k > 0.0)) {
    throw ConfigError("synthetic shape parameters must be positive");
  }
  std::vector<GridCell> cells;
  std::vector<double> base;  // smooth spatial trend of temp
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      cells.push_back({static_cast<int>(cells.size()), -115.0 + 0.5 * i, 32.0 + 0.5 * j});
      base.push_back(std::sin(0.4 * i) + std::cos(0.3 * j));
    }
  }
  const double log_u = std::log1p(spec.u);
  std::vector<Observation> rows;
  boost::random::normal_distribution<double> normal;
  for (int y = 0; y < spec.years; ++y) {
    for (int m = 3; m <= 9; ++m) {
      CounterRng month_rng(spec.seed, {0, static_cast<std::uint64_t>(y), static_cast<std::uint64_t>(m)});
      const double season = 0.5 * std::sin((m - 3) / 6.0 * 3.14159265358979);
      const double shift = 0.3 * normal(month_rng);
      for (const auto& c : cells) {
        CounterRng rng(spec.seed, {1, static_cast<std::uint64_t>(y), static_cast<std::uint64_t>(m),
                                   static_cast<std::uint64_t>(c.id)});
        Observation o;
        o.cell = c.id;
        o.year = 2000 + y;
        o.month = m;
        const double temp = base[c.id] + season + shift + 0.3 * normal(rng);
        const double dry = rng.uniform();
        const double noise = normal(rng);
        o.covariates = {temp, dry, noise};

        // dGPD count: floor of a GPD variate with survival (1 + lambda x)^-alpha.
        const double lam = std::exp(synth::count_theta(temp, dry));
        const double v = rng.uniform();
        const double x = std::expm1(-std::log1p(-v) / spec.alpha) / lam;
        o.cnt = std::min(std::floor(x), 1e6);

        if (o.cnt == 0.0) {
          o.ba = 0.0;
        } else if (rng.uniform() < synth::large_prob(temp, dry)) {
          const double w = rng.uniform();
          o.ba = spec.u + synth::tail_sigma(temp, dry) / spec.xi *
                              std::expm1(-spec.xi * std::log1p(-w));
        } else {
          // Gamma on log1p(ba) with mean exp(theta), truncated to (0, log1p(u)].
          const double scale = std::exp(synth::bulk_theta(temp, dry)) / spec.bulk_k;
          const double top = boost::math::gamma_p(spec.bulk_k, log_u / scale);
          double w = rng.uniform();
          while (w == 0.0) w = rng.uniform();
          const double z = scale * boost::math::gamma_p_inv(spec.bulk_k, w * top);
          o.ba = std::min(std::expm1(z), spec.u);
          if (o.ba <= 0.0) o.ba = 1e-3;
        }
        if (rng.uniform() < spec.mask_cnt) o.cnt = kMissing;
        if (rng.uniform() < spec.mask_ba) o.ba = kMissing;
        rows.push_back(std::move(o));
      }
    }
  }
  return GridDataset(std::move(cells), std::move(rows), {"temp", "dry", "noise"});
}

}  // namespace evgbm
