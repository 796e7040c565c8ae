/*
 * Copyright 2026 The psoformer Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Tree baselines: CART with Gini impurity, a bagged random forest, and
// gradient boosting with logistic loss and Newton leaf values.

#ifndef PSOFORMER_BASELINES_HPP_
#define PSOFORMER_BASELINES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "psoformer/core.hpp"
#include "psoformer/data.hpp"

namespace psoformer::baselines {

inline constexpr std::size_t kUnlimitedDepth = std::numeric_limits<std::size_t>::max();

class SingleClass : public Error {
 public:
  SingleClass() : Error("training data contains a single class") {}
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;  // rows with value <= threshold
  int right = -1;
  std::size_t count0 = 0;  // training rows routed here, by class
  std::size_t count1 = 0;
  double prob1 = 0.0;  // fraction of class 1 among those rows
  double value = 0.0;  // regression output (boosting trees only)

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Nodes in preorder; node 0 is the root.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  std::size_t leaf_of(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return i;
  }

  // Majority class of the leaf; ties go to class 0.
  int predict(std::span<const double> row) const {
    const auto& leaf = nodes[leaf_of(row)];
    return leaf.count1 > leaf.count0 ? 1 : 0;
  }

  double value(std::span<const double> row) const { return nodes[leaf_of(row)].value; }

  std::size_t depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      best = std::max(best, d[i]);
      if (!nodes[i].is_leaf()) {
        d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
      }
    }
    return best;
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct TreeParams {
  std::size_t max_depth = 8;
  std::size_t min_leaf = 1;
  std::size_t m_try = 0;  // features tried per split; 0 or >= n_features means all
};

inline double gini(std::size_t c0, std::size_t c1) {
  const double n = static_cast<double>(c0 + c1);
  if (n == 0.0) return 0.0;
  const double p0 = static_cast<double>(c0) / n, p1 = static_cast<double>(c1) / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

namespace detail {

using Wide = __int128;

// Children are ranked by sum_k c_k^2 / n over both sides (larger means lower
// weighted Gini), held as an exact fraction so ties compare exactly.
struct GiniScore {
  Wide num = 0;
  Wide den = 1;
};

inline GiniScore gini_score(std::size_t l0, std::size_t l1, std::size_t r0, std::size_t r1) {
  const Wide nl = static_cast<Wide>(l0 + l1), nr = static_cast<Wide>(r0 + r1);
  const Wide sl = static_cast<Wide>(l0) * l0 + static_cast<Wide>(l1) * l1;
  const Wide sr = static_cast<Wide>(r0) * r0 + static_cast<Wide>(r1) * r1;
  return {sl * nr + sr * nl, nl * nr};
}

inline bool better(const GiniScore& a, const GiniScore& b) { return a.num * b.den > b.num * a.den; }

// Threshold strictly between a < b; falls back to a if the midpoint rounds
// onto b.
inline double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

inline std::vector<std::size_t> candidate_features(std::size_t n_features, std::size_t m_try, Rng* rng) {
  std::vector<std::size_t> all(n_features);
  std::iota(all.begin(), all.end(), 0);
  if (m_try == 0 || m_try >= n_features || rng == nullptr) return all;
  // Partial Fisher-Yates, then ascending order for deterministic tie-breaks.
  for (std::size_t i = 0; i < m_try; ++i) std::swap(all[i], all[i + rng->index(n_features - i)]);
  all.resize(m_try);
  std::sort(all.begin(), all.end());
  return all;
}

class ClassificationBuilder {
 public:
  ClassificationBuilder(const Dataset& d, const TreeParams& p, Rng* rng) : d_(d), p_(p), rng_(rng) {}

  DecisionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::size_t c1 = 0;
    for (std::size_t r : rows) c1 += static_cast<std::size_t>(d_.target(r));
    const std::size_t n = rows.size(), c0 = n - c1;
    {
      auto& node = tree_.nodes.back();
      node.count0 = c0;
      node.count1 = c1;
      node.prob1 = n ? static_cast<double>(c1) / static_cast<double>(n) : 0.0;
      node.value = node.prob1;
    }
    const std::size_t min_leaf = std::max<std::size_t>(1, p_.min_leaf);
    if (c0 == 0 || c1 == 0 || depth >= p_.max_depth || n < 2 * min_leaf) return id;

    int best_feature = -1;
    double best_threshold = 0.0;
    GiniScore best{};
    std::vector<std::size_t> sorted = rows;
    for (std::size_t f : candidate_features(d_.n_features(), p_.m_try, rng_)) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](std::size_t a, std::size_t b) { return d_.at(a, f) < d_.at(b, f); });
      std::size_t l0 = 0, l1 = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        (d_.target(sorted[i]) ? l1 : l0) += 1;
        const double a = d_.at(sorted[i], f), b = d_.at(sorted[i + 1], f);
        if (!(a < b)) continue;
        const std::size_t nl = i + 1;
        if (nl < min_leaf || n - nl < min_leaf) continue;
        const GiniScore s = gini_score(l0, l1, c0 - l0, c1 - l1);
        if (best_feature < 0 || better(s, best)) {
          best = s;
          best_feature = static_cast<int>(f);
          best_threshold = midpoint(a, b);
        }
      }
    }
    // An impure node splits even when the best gain is zero (XOR-like
    // layouts), so unlimited depth always separates consistent data.
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (d_.at(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Dataset& d_;
  const TreeParams& p_;
  Rng* rng_;
  DecisionTree tree_;
};

}  // namespace detail

// Greedy CART on the given rows (repeats allowed). Candidate thresholds are
// midpoints between consecutive distinct values; the best split maximizes the
// Gini decrease with ties going to the lowest feature index, then the lowest
// threshold. Growth stops at max_depth, when a node is pure, or when no split
// leaves min_leaf rows on both sides. The chosen split never raises the
// impurity but may leave it unchanged. `rng` is only consulted when m_try
// restricts the features.
inline DecisionTree fit_tree_rows(const Dataset& train, std::vector<std::size_t> rows,
                                  const TreeParams& params, Rng* rng = nullptr) {
  if (rows.empty()) throw std::invalid_argument("cannot fit a tree on zero rows");
  return detail::ClassificationBuilder(train, params, rng).build(std::move(rows));
}

inline DecisionTree fit_tree(const Dataset& train, const TreeParams& params, Rng* rng = nullptr) {
  std::vector<std::size_t> rows(train.n_rows());
  std::iota(rows.begin(), rows.end(), 0);
  return fit_tree_rows(train, std::move(rows), params, rng);
}

inline std::vector<int> predict_tree(const DecisionTree& tree, const Dataset& d) {
  std::vector<int> out(d.n_rows());
  for (std::size_t r = 0; r < d.n_rows(); ++r) out[r] = tree.predict(d.row(r));
  return out;
}

// --- Random forest ---------------------------------------------------------

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = kUnlimitedDepth;
  std::size_t min_leaf = 1;
  std::size_t m_try = 4;  // ceil(sqrt(13))
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::vector<std::uint64_t> tree_seeds;
  std::size_t m_try = 0;
};

// Tree t draws its bootstrap sample and per-split feature subsets from a
// stream seeded by derive_seed(seed, t), so fitting in parallel gives the
// same forest as fitting serially.
inline ForestModel fit_forest(const Dataset& train, const ForestParams& params, std::size_t threads = 1) {
  if (train.empty()) throw std::invalid_argument("cannot fit a forest on zero rows");
  if (params.m_try < 1 || params.m_try > train.n_features()) {
    throw std::invalid_argument("m_try must lie in [1, n_features]");
  }
  ForestModel model;
  model.m_try = params.m_try;
  model.trees.resize(params.n_trees);
  model.tree_seeds.resize(params.n_trees);
  const TreeParams tp{params.max_depth, params.min_leaf, params.m_try};
  const std::size_t n = train.n_rows();
  parallel_for(params.n_trees, threads, [&](std::size_t t) {
    const std::uint64_t seed = derive_seed(params.seed, stream_tag("forest_tree"), t);
    model.tree_seeds[t] = seed;
    Rng rng(seed);
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      for (auto& r : rows) r = rng.index(n);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    model.trees[t] = fit_tree_rows(train, std::move(rows), tp, &rng);
  });
  return model;
}

// Majority vote; ties go to class 0.
inline int predict_forest_row(const ForestModel& model, std::span<const double> row) {
  std::size_t ones = 0;
  for (const auto& tree : model.trees) ones += static_cast<std::size_t>(tree.predict(row));
  return 2 * ones > model.trees.size() ? 1 : 0;
}

inline std::vector<int> predict_forest(const ForestModel& model, const Dataset& d) {
  std::vector<int> out(d.n_rows());
  for (std::size_t r = 0; r < d.n_rows(); ++r) out[r] = predict_forest_row(model, d.row(r));
  return out;
}

// --- Gradient boosting -----------------------------------------------------

struct BoostedParams {
  std::size_t n_rounds = 100;
  std::size_t max_depth = 3;
  std::size_t min_leaf = 1;
  double learning_rate = 0.1;
  double subsample = 1.0;  // row fraction per round, drawn from the seeded stream
  std::uint64_t seed = 0;
};

struct BoostedModel {
  double initial_score = 0.0;  // log-odds of class 1 in the training data
  std::vector<DecisionTree> trees;
  double shrinkage = 0.1;
};

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

namespace detail {

// Regression tree on residuals y - p: splits maximize the decrease in squared
// error of the residuals; leaves hold the Newton step sum(y - p) / sum(p(1 - p)).
class RegressionBuilder {
 public:
  RegressionBuilder(const Dataset& d, std::span<const double> residual, std::span<const double> hessian,
                    const TreeParams& p)
      : d_(d), g_(residual), h_(hessian), p_(p) {}

  DecisionTree build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const std::size_t n = rows.size();
    double sg = 0.0, sh = 0.0;
    std::size_t c1 = 0;
    for (std::size_t r : rows) {
      sg += g_[r];
      sh += h_[r];
      c1 += static_cast<std::size_t>(d_.target(r));
    }
    {
      auto& node = tree_.nodes.back();
      node.count0 = n - c1;
      node.count1 = c1;
      node.prob1 = n ? static_cast<double>(c1) / static_cast<double>(n) : 0.0;
      node.value = sg / std::max(sh, 1e-12);
    }
    const std::size_t min_leaf = std::max<std::size_t>(1, p_.min_leaf);
    if (depth >= p_.max_depth || n < 2 * min_leaf) return id;

    const double parent = sg * sg / static_cast<double>(n);
    int best_feature = -1;
    double best_threshold = 0.0, best_gain = 1e-12;
    std::vector<std::size_t> sorted = rows;
    for (std::size_t f = 0; f < d_.n_features(); ++f) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](std::size_t a, std::size_t b) { return d_.at(a, f) < d_.at(b, f); });
      double left = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left += g_[sorted[i]];
        const double a = d_.at(sorted[i], f), b = d_.at(sorted[i + 1], f);
        if (!(a < b)) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double right = sg - left;
        const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = midpoint(a, b);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> l_rows, r_rows;
    for (std::size_t r : rows) {
      (d_.at(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? l_rows : r_rows).push_back(r);
    }
    const int l = grow(std::move(l_rows), depth + 1);
    const int r = grow(std::move(r_rows), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Dataset& d_;
  std::span<const double> g_;
  std::span<const double> h_;
  const TreeParams& p_;
  DecisionTree tree_;
};

}  // namespace detail

inline BoostedModel fit_boosted(const Dataset& train, const BoostedParams& params) {
  const std::size_t n = train.n_rows();
  const std::size_t pos = train.count_class(1);
  if (pos == 0 || pos == n) throw SingleClass();
  if (!(params.learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (!(params.subsample > 0.0 && params.subsample <= 1.0)) {
    throw std::invalid_argument("subsample must lie in (0, 1]");
  }

  BoostedModel model;
  model.shrinkage = params.learning_rate;
  const double p1 = static_cast<double>(pos) / static_cast<double>(n);
  model.initial_score = std::log(p1 / (1.0 - p1));

  std::vector<double> score(n, model.initial_score), residual(n), hessian(n);
  const TreeParams tp{params.max_depth, params.min_leaf, 0};
  Rng rng(derive_seed(params.seed, stream_tag("boosting")));
  for (std::size_t round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(score[i]);
      residual[i] = static_cast<double>(train.target(i)) - p;
      hessian[i] = p * (1.0 - p);
    }
    std::vector<std::size_t> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (params.subsample >= 1.0 || rng.bernoulli(params.subsample)) rows.push_back(i);
    }
    if (rows.empty()) rows.push_back(rng.index(n));
    DecisionTree tree = detail::RegressionBuilder(train, residual, hessian, tp).build(std::move(rows));
    for (std::size_t i = 0; i < n; ++i) score[i] += model.shrinkage * tree.value(train.row(i));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

// Additive score after the first `stages` trees (all trees by default).
inline double boosted_score(const BoostedModel& model, std::span<const double> row,
                            std::size_t stages = std::numeric_limits<std::size_t>::max()) {
  double s = model.initial_score;
  const std::size_t k = std::min(stages, model.trees.size());
  for (std::size_t t = 0; t < k; ++t) s += model.shrinkage * model.trees[t].value(row);
  return s;
}

// Class 1 iff sigmoid(score) > 0.5; probability exactly 0.5 gives class 0.
inline std::vector<int> predict_boosted(const BoostedModel& model, const Dataset& d,
                                        std::size_t stages = std::numeric_limits<std::size_t>::max()) {
  std::vector<int> out(d.n_rows());
  for (std::size_t r = 0; r < d.n_rows(); ++r) out[r] = boosted_score(model, d.row(r), stages) > 0.0 ? 1 : 0;
  return out;
}

inline double boosted_log_loss(const BoostedModel& model, const Dataset& d,
                               std::size_t stages = std::numeric_limits<std::size_t>::max()) {
  double total = 0.0;
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    const double s = boosted_score(model, d.row(r), stages);
    // log(1 + e^-s) for y = 1, log(1 + e^s) for y = 0, computed stably.
    const double z = d.target(r) == 1 ? -s : s;
    total += z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }
  return total / static_cast<double>(d.n_rows());
}

}  // namespace psoformer::baselines

#endif  // PSOFORMER_BASELINES_HPP_
