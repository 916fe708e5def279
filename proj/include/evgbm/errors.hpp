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

#ifndef EVGBM_ERRORS_HPP_
#define EVGBM_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evgbm {

/// Bad or inconsistent configuration (unknown keys, missing files, bad flags).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that violates a documented precondition.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A response value outside the support of the loss, tagged with its row.
class LossDomainError : public DataError {
 public:
  LossDomainError(std::size_t row, const std::string& what)
      : DataError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// Floating point failure: underflow, non-convergence, failed factorization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evgbm

#endif  // EVGBM_ERRORS_HPP_
