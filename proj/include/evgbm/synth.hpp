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

#ifndef EVGBM_SYNTH_HPP_
#define EVGBM_SYNTH_HPP_

#include <cstdint>
#include <span>

#include "evgbm/dataset.hpp"

namespace evgbm {

/// Synthetic grid with known covariate effects. Covariates: `temp`
/// (smooth in space plus monthly noise), `dry` (uniform on [0, 1]) and
/// `noise` (irrelevant). Counts are dGPD with log lambda = count_theta(x);
/// burned area is zero when the count is zero, otherwise a tail excess over
/// u with probability large_prob(x) and a truncated gamma on log1p(ba)
/// below u otherwise.
struct SynthSpec {
  int nx = 12;
  int ny = 10;
  int years = 3;
  double alpha = 5.0;
  double xi = 0.8;
  double u = 200.0;
  double bulk_k = 1.5;
  double mask_cnt = 0.05;
  double mask_ba = 0.05;
  std::uint64_t seed = 0;
};

namespace synth {
double count_theta(double temp, double dry);
double large_prob(double temp, double dry);
/// Log mean of the gamma on log1p(ba) and GPD scale of the excess.
double bulk_theta(double temp, double dry);
double tail_sigma(double temp, double dry);
}  // namespace synth

GridDataset synthesize(const SynthSpec& spec);

}  // namespace evgbm

#endif  // EVGBM_SYNTH_HPP_
