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

#ifndef EVGBM_TOOLS_CLI_HPP_
#define EVGBM_TOOLS_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "evgbm/dataset.hpp"
#include "evgbm/pipeline.hpp"
#include "evgbm/spatialcv.hpp"

namespace evgbm::cli {

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Parsed INI run configuration.
struct RunConfig {
  std::filesystem::path data;
  std::filesystem::path folds;
  CsvSchema schema;
  Recipe recipe;
  // cv
  int n_folds = 5;
  std::uint64_t cv_seed = 0;
  MaskModelParams mask;
  std::vector<int> tree_counts;
  bool one_se_largest = true;
  // tune
  int max_iters = 20;
  std::uint64_t tune_seed = 0;
  std::vector<TuneDim> dims;
};

/// Parses configuration text. Relative paths resolve against `base_dir`.
/// Unknown sections or keys throw ConfigError.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Thresholds file: CSV with a `threshold` column and an optional `weight`
/// column.
ThresholdScoreSpec parse_thresholds(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// Runs one command line (without the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evgbm::cli

#endif  // EVGBM_TOOLS_CLI_HPP_
