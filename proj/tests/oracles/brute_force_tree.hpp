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

// Reference CART learner for tiny datasets. At every node it enumerates every
// (feature, cut value) pair, partitions the rows by direct filtering and
// scores the children by weighted Gini impurity in exact rational
// arithmetic. Nothing is shared with the library's sweep-based builder.

#ifndef PSOFORMER_TESTS_ORACLES_BRUTE_FORCE_TREE_HPP_
#define PSOFORMER_TESTS_ORACLES_BRUTE_FORCE_TREE_HPP_

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "psoformer/baselines.hpp"
#include "psoformer/data.hpp"

namespace oracle {

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Fraction() = default;
  Fraction(std::int64_t n, std::int64_t d) : num(n), den(d) {
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  friend Fraction operator+(Fraction a, Fraction b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
  friend Fraction operator-(Fraction a, Fraction b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
  friend bool operator<(Fraction a, Fraction b) { return a.num * b.den < b.num * a.den; }
  friend bool operator==(Fraction a, Fraction b) { return a.num == b.num && a.den == b.den; }
};

// n * gini = n - sum_k c_k^2 / n, i.e. the impurity weighted by row count.
inline Fraction weighted_gini(std::int64_t c0, std::int64_t c1) {
  const std::int64_t n = c0 + c1;
  if (n == 0) return {};
  return Fraction(n, 1) - Fraction(c0 * c0 + c1 * c1, n);
}

struct Builder {
  const psoformer::Dataset& d;
  std::size_t max_depth;
  std::size_t min_leaf;
  psoformer::baselines::DecisionTree tree;

  int grow(const std::vector<std::size_t>& rows, std::size_t depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::int64_t c0 = 0, c1 = 0;
    for (auto r : rows) (d.target(r) ? c1 : c0) += 1;
    {
      auto& node = tree.nodes.back();
      node.count0 = static_cast<std::size_t>(c0);
      node.count1 = static_cast<std::size_t>(c1);
      node.prob1 = static_cast<double>(c1) / static_cast<double>(c0 + c1);
      node.value = node.prob1;
    }
    if (c0 == 0 || c1 == 0 || depth >= max_depth) return id;

    bool found = false;
    std::size_t best_f = 0;
    double best_cut = 0.0, best_next = 0.0;
    Fraction best_impurity;
    for (std::size_t f = 0; f < d.n_features(); ++f) {
      std::set<double> values;
      for (auto r : rows) values.insert(d.at(r, f));
      for (auto it = values.begin(); it != values.end(); ++it) {
        auto next = std::next(it);
        if (next == values.end()) break;
        std::int64_t l0 = 0, l1 = 0, r0 = 0, r1 = 0;
        for (auto r : rows) {
          const bool left = d.at(r, f) <= *it;
          (left ? (d.target(r) ? l1 : l0) : (d.target(r) ? r1 : r0)) += 1;
        }
        if (static_cast<std::size_t>(l0 + l1) < min_leaf || static_cast<std::size_t>(r0 + r1) < min_leaf) continue;
        const Fraction impurity = weighted_gini(l0, l1) + weighted_gini(r0, r1);
        if (!found || impurity < best_impurity) {
          found = true;
          best_impurity = impurity;
          best_f = f;
          best_cut = *it;
          best_next = *next;
        }
      }
    }
    if (!found) return id;

    const double threshold = (best_cut + best_next) / 2.0;
    std::vector<std::size_t> left, right;
    for (auto r : rows) (d.at(r, best_f) <= threshold ? left : right).push_back(r);
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<int>(best_f);
    node.threshold = threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

inline psoformer::baselines::DecisionTree fit(const psoformer::Dataset& d, std::size_t max_depth,
                                              std::size_t min_leaf = 1) {
  Builder b{d, max_depth, min_leaf, {}};
  std::vector<std::size_t> rows(d.n_rows());
  std::iota(rows.begin(), rows.end(), 0);
  b.grow(rows, 0);
  return b.tree;
}

}  // namespace oracle

#endif  // PSOFORMER_TESTS_ORACLES_BRUTE_FORCE_TREE_HPP_
