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

#ifndef EVGBM_RNG_HPP_
#define EVGBM_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace evgbm {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a seed and a list of stream coordinates (round, fold, month...)
/// into a single key. Order matters.
constexpr std::uint64_t derive_key(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> path) {
  std::uint64_t key = mix64(seed);
  for (auto p : path) key = mix64(key ^ mix64(p + 0x632be59bd9b4e019ULL));
  return key;
}

/// Counter-based generator: the n-th output is a pure function of (key, n),
/// so any draw can be reproduced from its stream coordinates alone.
/// Satisfies UniformRandomBitGenerator for use with <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
      : key_(derive_key(seed, path)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    return mix64(key_ ^ mix64(counter_++ * 0xd1b54a32d192ed03ULL));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace evgbm

#endif  // EVGBM_RNG_HPP_
