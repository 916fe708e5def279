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

#include "evgbm/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "evgbm/errors.hpp"

namespace evgbm {

RegressionTree::RegressionTree() : nodes_{TreeNode{}} {}

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw DataError("tree has no nodes");
  const int n = static_cast<int>(nodes_.size());
  std::vector<int> parents(n, 0);
  for (int i = 0; i < n; ++i) {
    const auto& node = nodes_[i];
    if (node.is_leaf()) continue;
    for (int child : {node.left, node.right}) {
      if (child <= 0 || child >= n) {
        throw DataError("node " + std::to_string(i) + " has invalid child " +
                        std::to_string(child));
      }
      ++parents[child];
    }
  }
  for (int i = 1; i < n; ++i) {
    if (parents[i] != 1) {
      throw DataError("node " + std::to_string(i) + " is not reached exactly once");
    }
  }
}

int RegressionTree::leaf_index(std::span<const double> x) const {
  int id = 0;
  while (!nodes_[id].is_leaf()) {
    const auto& node = nodes_[id];
    const double v = x[node.feature];
    const bool go_left = is_missing(v) ? node.default_left : v <= node.threshold;
    id = go_left ? node.left : node.right;
  }
  return id;
}

double RegressionTree::predict(std::span<const double> x) const {
  return nodes_[leaf_index(x)].weight;
}

int RegressionTree::n_leaves() const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(),
                                        [](const TreeNode& n) { return n.is_leaf(); }));
}

int RegressionTree::max_feature() const {
  int out = -1;
  for (const auto& n : nodes_) out = std::max(out, n.feature);
  return out;
}

void RegressionTree::scale_leaves(double factor) {
  for (auto& n : nodes_) {
    if (n.is_leaf()) n.weight *= factor;
  }
}

double leaf_weight(double g_sum, double h_sum, double lambda_reg) {
  const double denom = h_sum + lambda_reg;
  if (!(denom > 0.0)) {
    throw NumericError("degenerate leaf: hessian sum + lambda = " + std::to_string(denom));
  }
  return -g_sum / denom;
}

double split_gain(double g_left, double h_left, double g_right, double h_right,
                  double lambda_reg, double eta) {
  const double g = g_left + g_right;
  const double h = h_left + h_right;
  return 0.5 * (g_left * g_left / (h_left + lambda_reg) +
                g_right * g_right / (h_right + lambda_reg) - g * g / (h + lambda_reg)) -
         eta;
}

SplitCandidates SplitCandidates::from_quantiles(const Matrix& x, int n_bins) {
  if (n_bins < 2) throw ConfigError("n_quantile_bins must be at least 2");
  n_bins = std::min(n_bins, static_cast<int>(BinnedMatrix::kMissingBin) - 1);
  SplitCandidates out;
  out.thresholds_.resize(x.cols());
  std::vector<double> values;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    values.clear();
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (!is_missing(x(i, j))) values.push_back(x(i, j));
    }
    auto& thr = out.thresholds_[j];
    if (values.empty()) continue;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    std::vector<double> uniq(values);
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    if (uniq.size() <= static_cast<std::size_t>(n_bins)) {
      thr.assign(uniq.begin(), uniq.end() - 1);
      continue;
    }
    // Inverse empirical CDF at i / n_bins, so thresholds are observed values.
    for (int i = 1; i < n_bins; ++i) {
      const auto rank = static_cast<std::size_t>(
          std::ceil(static_cast<double>(i) * static_cast<double>(n) / n_bins));
      const double v = values[std::max<std::size_t>(rank, 1) - 1];
      if (v < uniq.back() && (thr.empty() || v > thr.back())) thr.push_back(v);
    }
  }
  return out;
}

BinnedMatrix::BinnedMatrix(const Matrix& x, SplitCandidates candidates)
    : rows_(x.rows()), cols_(x.cols()), candidates_(std::move(candidates)),
      bins_(x.rows() * x.cols()) {
  if (candidates_.n_features() != cols_) {
    throw DataError("split candidates cover " + std::to_string(candidates_.n_features()) +
                    " features, matrix has " + std::to_string(cols_));
  }
  for (std::size_t j = 0; j < cols_; ++j) {
    const auto thr = candidates_.thresholds(j);
    for (std::size_t i = 0; i < rows_; ++i) {
      const double v = x(i, j);
      bins_[i * cols_ + j] =
          is_missing(v) ? kMissingBin
                        : static_cast<std::uint16_t>(
                              std::lower_bound(thr.begin(), thr.end(), v) - thr.begin());
    }
  }
}

std::vector<std::size_t> sample_features(std::size_t n_features, double colsample,
                                         CounterRng& rng) {
  if (!(colsample > 0.0 && colsample <= 1.0)) {
    throw ConfigError("colsample must lie in (0, 1]");
  }
  std::vector<std::size_t> all(n_features);
  std::iota(all.begin(), all.end(), 0);
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(colsample * static_cast<double>(n_features))));
  if (k >= n_features) return all;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng() % (n_features - i));
    std::swap(all[i], all[j]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

namespace {

struct SplitChoice {
  double gain = 0.0;
  int feature = -1;
  int bin = -1;  // rows with bin <= this go left
  bool default_left = true;
  bool valid() const { return feature >= 0; }
};

struct Leaf {
  int node;
  std::vector<std::size_t> rows;
  double g_sum;
  double h_sum;
  SplitChoice best;
};

struct Bucket {
  double g = 0.0;
  double h = 0.0;
  std::size_t n = 0;
};

SplitChoice find_best_split(const BinnedMatrix& x, const GradientPairs& gp,
                            const TreeParams& params, std::span<const std::size_t> features,
                            const Leaf& leaf) {
  SplitChoice best;
  std::vector<Bucket> hist;
  for (std::size_t f : features) {
    const auto thr = x.candidates().thresholds(f);
    if (thr.empty()) continue;
    hist.assign(thr.size() + 1, Bucket{});
    Bucket missing;
    for (std::size_t r : leaf.rows) {
      const auto b = x.bin(r, f);
      Bucket& dst = b == BinnedMatrix::kMissingBin ? missing : hist[b];
      dst.g += gp.g[r];
      dst.h += gp.h[r];
      ++dst.n;
    }
    Bucket present;
    for (const auto& b : hist) {
      present.g += b.g;
      present.h += b.h;
      present.n += b.n;
    }
    Bucket left;
    for (std::size_t b = 0; b < thr.size(); ++b) {
      left.g += hist[b].g;
      left.h += hist[b].h;
      left.n += hist[b].n;
      const Bucket right{present.g - left.g, present.h - left.h, present.n - left.n};
      for (bool miss_left : {true, false}) {
        const Bucket l = miss_left ? Bucket{left.g + missing.g, left.h + missing.h,
                                            left.n + missing.n}
                                   : left;
        const Bucket r = miss_left ? right
                                   : Bucket{right.g + missing.g, right.h + missing.h,
                                            right.n + missing.n};
        if (l.n == 0 || r.n == 0) continue;
        if (!(l.h + params.lambda_reg > 0.0) || !(r.h + params.lambda_reg > 0.0)) continue;
        const double gain =
            split_gain(l.g, l.h, r.g, r.h, params.lambda_reg, params.eta);
        // best.gain starts at 0, so only positive gains are accepted.
        if (gain > best.gain) {
          best = {gain, static_cast<int>(f), static_cast<int>(b), miss_left};
        }
        if (missing.n == 0) break;  // both directions are identical
      }
    }
  }
  return best;
}

}  // namespace

RegressionTree grow(const BinnedMatrix& x, const GradientPairs& gp, const TreeParams& params,
                    std::span<const std::size_t> features) {
  const std::size_t n = x.rows();
  if (n == 0) throw DataError("cannot grow a tree on an empty dataset");
  if (gp.g.size() != n || gp.h.size() != n) {
    throw DataError("gradient pairs have " + std::to_string(gp.g.size()) + "/" +
                    std::to_string(gp.h.size()) + " entries for " + std::to_string(n) +
                    " rows");
  }
  if (params.max_leaves < 2) throw ConfigError("max_leaves must be at least 2");

  std::vector<TreeNode> nodes(1);
  std::vector<Leaf> leaves;
  {
    Leaf root{0, std::vector<std::size_t>(n), 0.0, 0.0, {}};
    std::iota(root.rows.begin(), root.rows.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      root.g_sum += gp.g[i];
      root.h_sum += gp.h[i];
    }
    root.best = find_best_split(x, gp, params, features, root);
    leaves.push_back(std::move(root));
  }

  while (static_cast<int>(leaves.size()) < params.max_leaves) {
    // Highest gain wins; ties go to the earliest-created node.
    auto pick = leaves.end();
    for (auto it = leaves.begin(); it != leaves.end(); ++it) {
      if (!it->best.valid()) continue;
      if (pick == leaves.end() || it->best.gain > pick->best.gain ||
          (it->best.gain == pick->best.gain && it->node < pick->node)) {
        pick = it;
      }
    }
    if (pick == leaves.end()) break;

    Leaf parent = std::move(*pick);
    leaves.erase(pick);
    const auto& split = parent.best;
    const int left_id = static_cast<int>(nodes.size());
    const int right_id = left_id + 1;
    nodes.resize(nodes.size() + 2);
    TreeNode& node = nodes[parent.node];
    node.feature = split.feature;
    node.threshold = x.candidates().thresholds(split.feature)[split.bin];
    node.default_left = split.default_left;
    node.left = left_id;
    node.right = right_id;
    node.gain = split.gain;

    Leaf left{left_id, {}, 0.0, 0.0, {}};
    Leaf right{right_id, {}, 0.0, 0.0, {}};
    for (std::size_t r : parent.rows) {
      const auto b = x.bin(r, split.feature);
      const bool go_left = b == BinnedMatrix::kMissingBin ? split.default_left
                                                          : static_cast<int>(b) <= split.bin;
      Leaf& dst = go_left ? left : right;
      dst.rows.push_back(r);
      dst.g_sum += gp.g[r];
      dst.h_sum += gp.h[r];
    }
    left.best = find_best_split(x, gp, params, features, left);
    right.best = find_best_split(x, gp, params, features, right);
    nodes[parent.node].cover = parent.h_sum;
    leaves.push_back(std::move(left));
    leaves.push_back(std::move(right));
  }

  for (const auto& leaf : leaves) {
    nodes[leaf.node].weight = leaf_weight(leaf.g_sum, leaf.h_sum, params.lambda_reg);
    nodes[leaf.node].cover = leaf.h_sum;
  }
  return RegressionTree(std::move(nodes));
}

RegressionTree grow(const Matrix& x, const GradientPairs& gp, const TreeParams& params,
                    CounterRng& rng) {
  BinnedMatrix binned(x, SplitCandidates::from_quantiles(x, params.n_quantile_bins));
  const auto features = sample_features(x.cols(), params.colsample, rng);
  return grow(binned, gp, params, features);
}

}  // namespace evgbm
