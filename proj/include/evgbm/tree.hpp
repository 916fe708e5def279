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

#ifndef EVGBM_TREE_HPP_
#define EVGBM_TREE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "evgbm/matrix.hpp"
#include "evgbm/rng.hpp"

namespace evgbm {

/// One node of a regression tree. A node with feature < 0 is a leaf.
/// Routing: x[feature] <= threshold goes left; a missing value follows
/// default_left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  bool default_left = true;
  int left = -1;
  int right = -1;
  double weight = 0.0;  // leaf output
  double gain = 0.0;    // split gain of a branch
  double cover = 0.0;   // hessian sum of the training rows reaching the node

  bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
 public:
  /// A single leaf with weight 0.
  RegressionTree();
  /// Validates that the nodes form a binary tree rooted at node 0.
  explicit RegressionTree(std::vector<TreeNode> nodes);

  double predict(std::span<const double> x) const;
  int leaf_index(std::span<const double> x) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int n_leaves() const;
  int max_feature() const;

  /// Multiplies every leaf weight by `factor` (shrinkage).
  void scale_leaves(double factor);

 private:
  std::vector<TreeNode> nodes_;
};

/// First and second derivatives of the loss at the current scores.
struct GradientPairs {
  std::vector<double> g;
  std::vector<double> h;
};

struct TreeParams {
  int max_leaves = 8;
  double lambda_reg = 1.0;
  double eta = 0.0;
  int n_quantile_bins = 32;
  double colsample = 1.0;
};

/// Optimal leaf score -G / (H + lambda). Throws NumericError if the
/// denominator is not positive.
double leaf_weight(double g_sum, double h_sum, double lambda_reg);

/// Reduction of the regularized objective from splitting a leaf into
/// (L, R), net of the per-leaf penalty eta.
double split_gain(double g_left, double h_left, double g_right, double h_right,
                  double lambda_reg, double eta);

/// Per-feature candidate split points taken from the empirical quantiles of
/// the training values. When a feature has at most n_bins distinct values,
/// every distinct value except the largest is a candidate (exact search).
class SplitCandidates {
 public:
  SplitCandidates() = default;
  static SplitCandidates from_quantiles(const Matrix& x, int n_bins);

  std::size_t n_features() const { return thresholds_.size(); }
  std::span<const double> thresholds(std::size_t feature) const {
    return thresholds_[feature];
  }

 private:
  std::vector<std::vector<double>> thresholds_;
};

/// Rows pre-mapped to candidate bins: bin b holds values v with
/// thresholds[b-1] < v <= thresholds[b]; the last bin holds values above
/// every threshold.
class BinnedMatrix {
 public:
  static constexpr std::uint16_t kMissingBin = 0xFFFF;

  BinnedMatrix(const Matrix& x, SplitCandidates candidates);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint16_t bin(std::size_t row, std::size_t feature) const {
    return bins_[row * cols_ + feature];
  }
  const SplitCandidates& candidates() const { return candidates_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  SplitCandidates candidates_;
  std::vector<std::uint16_t> bins_;
};

/// Draws max(1, floor(colsample * n_features)) distinct feature indices,
/// returned in ascending order.
std::vector<std::size_t> sample_features(std::size_t n_features, double colsample,
                                         CounterRng& rng);

/// Best-first greedy growth: repeatedly splits the leaf whose best candidate
/// split has the largest positive gain, over the features in `features`,
/// until no split has positive gain or max_leaves is reached. Ties go to the
/// lowest feature index, then the lowest threshold.
RegressionTree grow(const BinnedMatrix& x, const GradientPairs& gp,
                    const TreeParams& params, std::span<const std::size_t> features);

/// Convenience overload: computes candidates from `x` and samples features
/// with `rng`.
RegressionTree grow(const Matrix& x, const GradientPairs& gp, const TreeParams& params,
                    CounterRng& rng);

}  // namespace evgbm

#endif  // EVGBM_TREE_HPP_
