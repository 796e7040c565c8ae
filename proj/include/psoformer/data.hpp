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

// Tabular heart-disease data: CSV ingestion, stratified splitting,
// standardization, Pearson correlation and a seeded synthetic generator.

#ifndef PSOFORMER_DATA_HPP_
#define PSOFORMER_DATA_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "psoformer/core.hpp"

namespace psoformer {

// Canonical column order of the 13 clinical features.
inline constexpr std::array<std::string_view, 13> kHeartSchema = {
    "age",      "sex",   "cp",      "trestbps", "chol",  "fbs", "restecg",
    "thalachh", "exang", "oldpeak", "slope",    "ca",    "thal"};

inline constexpr std::string_view kTargetColumn = "target";

inline std::vector<std::string> heart_schema() {
  return {kHeartSchema.begin(), kHeartSchema.end()};
}

enum class DataErrc {
  kMissingColumn,
  kNonNumericCell,
  kInvalidLabel,
  kEmptyDataset,
  kClassTooSmall,
  kTooFewRows,
  kShapeMismatch,
};

class DataError : public Error {
 public:
  DataError(DataErrc code, std::string message, std::string column = {},
            std::size_t row = 0)
      : Error(std::move(message)), code_(code), column_(std::move(column)), row_(row) {}

  DataErrc code() const { return code_; }
  // Offending column name, when the error concerns one.
  const std::string& column() const { return column_; }
  // Zero-based data row index (header excluded), when the error concerns one.
  std::size_t row() const { return row_; }

 private:
  DataErrc code_;
  std::string column_;
  std::size_t row_;
};

// Immutable table of finite numeric features with binary labels.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<std::string> feature_names, std::vector<double> features,
          std::vector<int> targets)
      : names_(std::move(feature_names)),
        values_(std::move(features)),
        targets_(std::move(targets)) {
    if (names_.empty()) {
      throw DataError(DataErrc::kShapeMismatch, "dataset needs at least one feature");
    }
    if (values_.size() != names_.size() * targets_.size()) {
      throw DataError(DataErrc::kShapeMismatch,
                      "feature matrix size does not match rows x features");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        const std::size_t r = i / names_.size();
        throw DataError(DataErrc::kNonNumericCell,
                        "non-finite value at row " + std::to_string(r), names_[i % names_.size()], r);
      }
    }
    for (std::size_t r = 0; r < targets_.size(); ++r) {
      if (targets_[r] != 0 && targets_[r] != 1) {
        throw DataError(DataErrc::kInvalidLabel,
                        "target must be 0 or 1 at row " + std::to_string(r),
                        std::string(kTargetColumn), r);
      }
    }
  }

  std::size_t n_rows() const { return targets_.size(); }
  std::size_t n_features() const { return names_.size(); }
  bool empty() const { return targets_.empty(); }

  const std::vector<std::string>& feature_names() const { return names_; }
  std::span<const double> values() const { return values_; }
  const std::vector<int>& targets() const { return targets_; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * names_.size(), names_.size());
  }
  double at(std::size_t r, std::size_t c) const { return values_[r * names_.size() + c]; }
  int target(std::size_t r) const { return targets_[r]; }

  std::size_t count_class(int label) const {
    std::size_t n = 0;
    for (int t : targets_) n += (t == label);
    return n;
  }

  // Rows in the given order; indices may repeat.
  Dataset subset(std::span<const std::size_t> rows) const {
    std::vector<double> v;
    std::vector<int> t;
    v.reserve(rows.size() * n_features());
    t.reserve(rows.size());
    for (std::size_t r : rows) {
      auto src = row(r);
      v.insert(v.end(), src.begin(), src.end());
      t.push_back(targets_[r]);
    }
    return Dataset(names_, std::move(v), std::move(t));
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
  std::vector<int> targets_;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return cells;
}

inline std::string_view trim_cell(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace detail

// Reads a header-first, comma-separated table. Columns are located by name
// and reordered to `schema`; unknown extra columns are ignored. The target
// column must hold 0 or 1.
inline Dataset load_csv(std::istream& in, std::span<const std::string> schema) {
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(DataErrc::kEmptyDataset, "input has no header row");
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);

  const auto header = detail::split_csv_line(line);
  auto find_column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (detail::trim_cell(header[i]) == name) return i;
    }
    return std::nullopt;
  };

  std::vector<std::size_t> source_index;
  for (const auto& name : schema) {
    auto idx = find_column(name);
    if (!idx) throw DataError(DataErrc::kMissingColumn, "missing column \"" + name + "\"", name);
    source_index.push_back(*idx);
  }
  const auto target_idx = find_column(kTargetColumn);
  if (!target_idx) {
    throw DataError(DataErrc::kMissingColumn, "missing column \"target\"", std::string(kTargetColumn));
  }

  std::vector<double> values;
  std::vector<int> targets;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim_cell(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    auto cell_value = [&](std::size_t src, std::string_view col) {
      double v = 0.0;
      if (src >= cells.size() || !parse_double(detail::trim_cell(cells[src]), v) || !std::isfinite(v)) {
        throw DataError(DataErrc::kNonNumericCell,
                        "non-numeric cell at row " + std::to_string(row) + ", column \"" +
                            std::string(col) + "\"",
                        std::string(col), row);
      }
      return v;
    };
    for (std::size_t c = 0; c < schema.size(); ++c) {
      values.push_back(cell_value(source_index[c], schema[c]));
    }
    const double t = cell_value(*target_idx, kTargetColumn);
    if (t != 0.0 && t != 1.0) {
      throw DataError(DataErrc::kInvalidLabel,
                      "target must be 0 or 1 at row " + std::to_string(row),
                      std::string(kTargetColumn), row);
    }
    targets.push_back(static_cast<int>(t));
    ++row;
  }
  if (targets.empty()) throw DataError(DataErrc::kEmptyDataset, "no data rows");
  return Dataset({schema.begin(), schema.end()}, std::move(values), std::move(targets));
}

inline Dataset load_csv(std::istream& in) {
  const auto schema = heart_schema();
  return load_csv(in, schema);
}

// Writes features then target; values use the shortest exact decimal form so
// a reload reproduces every double bit for bit.
inline void write_csv(const Dataset& d, std::ostream& out) {
  for (const auto& name : d.feature_names()) out << name << ',';
  out << kTargetColumn << '\n';
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    for (double v : d.row(r)) out << format_double(v) << ',';
    out << d.target(r) << '\n';
  }
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per-class seeded shuffle, then round(test_fraction * class_size) rows of
// each class go to the test side. Both sides keep original row order.
inline SplitIndices stratified_split_indices(const Dataset& d, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  }
  SplitIndices out;
  Rng rng(derive_seed(seed, stream_tag("stratified_split")));
  for (int label : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
      if (d.target(r) == label) rows.push_back(r);
    }
    const std::size_t n = rows.size();
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    if (n < 2 || n_test < 1 || n_test >= n) {
      throw DataError(DataErrc::kClassTooSmall,
                      "class " + std::to_string(label) + " has " + std::to_string(n) +
                          " rows; cannot place it on both sides of the split");
    }
    rng.shuffle(rows);
    out.test.insert(out.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline std::pair<Dataset, Dataset> stratified_split(const Dataset& d, double test_fraction,
                                                    std::uint64_t seed) {
  const auto idx = stratified_split_indices(d, test_fraction, seed);
  return {d.subset(idx.train), d.subset(idx.test)};
}

// Per-column standardization with population standard deviation. Columns
// with zero variance are flagged and map to 0.
struct Scaler {
  std::vector<double> means;
  std::vector<double> stds;
  std::vector<bool> constant;

  double transform(std::size_t col, double v) const {
    return constant[col] ? 0.0 : (v - means[col]) / stds[col];
  }
  double inverse(std::size_t col, double z) const {
    return constant[col] ? means[col] : z * stds[col] + means[col];
  }
};

inline Scaler fit_scaler(const Dataset& train) {
  if (train.empty()) throw DataError(DataErrc::kEmptyDataset, "cannot fit scaler on empty data");
  const std::size_t n = train.n_rows();
  const std::size_t f = train.n_features();
  Scaler s;
  s.means.assign(f, 0.0);
  s.stds.assign(f, 0.0);
  s.constant.assign(f, false);
  for (std::size_t c = 0; c < f; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) sum += train.at(r, c);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = train.at(r, c) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    s.means[c] = mean;
    s.stds[c] = sd;
    s.constant[c] = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
  }
  return s;
}

inline Dataset apply_scaler(const Scaler& s, const Dataset& d) {
  if (s.means.size() != d.n_features()) {
    throw DataError(DataErrc::kShapeMismatch, "scaler width does not match dataset");
  }
  std::vector<double> v(d.values().begin(), d.values().end());
  const std::size_t f = d.n_features();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = s.transform(i % f, v[i]);
  return Dataset(d.feature_names(), std::move(v), d.targets());
}

// Square matrix of Pearson coefficients over the features plus the target.
struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<double> values;  // row-major, names.size() squared
  std::vector<bool> constant;  // per column; such columns correlate 0 with others

  std::size_t size() const { return names.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * names.size() + j]; }
};

// Sums are taken in sorted-term order, so the matrix is bit-identical under
// any permutation of rows.
inline CorrelationMatrix pearson_matrix(const Dataset& d) {
  const std::size_t n = d.n_rows();
  if (n < 2) throw DataError(DataErrc::kTooFewRows, "correlation needs at least 2 rows");
  const std::size_t f = d.n_features();
  const std::size_t k = f + 1;

  std::vector<std::vector<double>> centered(k, std::vector<double>(n));
  std::vector<double> norm(k);
  CorrelationMatrix out;
  out.names = d.feature_names();
  out.names.emplace_back(kTargetColumn);
  out.constant.assign(k, false);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> col(n);
    for (std::size_t r = 0; r < n; ++r) col[r] = c < f ? d.at(r, c) : static_cast<double>(d.target(r));
    const double mean = order_independent_sum(col) / static_cast<double>(n);
    std::vector<double> sq(n);
    for (std::size_t r = 0; r < n; ++r) {
      centered[c][r] = col[r] - mean;
      sq[r] = centered[c][r] * centered[c][r];
    }
    norm[c] = std::sqrt(order_independent_sum(std::move(sq)));
    out.constant[c] = !(norm[c] > 0.0);
  }

  out.values.assign(k * k, 0.0);
  std::vector<double> prod(n);
  for (std::size_t i = 0; i < k; ++i) {
    out.values[i * k + i] = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      double r = 0.0;
      if (!out.constant[i] && !out.constant[j]) {
        for (std::size_t t = 0; t < n; ++t) prod[t] = centered[i][t] * centered[j][t];
        r = std::clamp(order_independent_sum(prod) / (norm[i] * norm[j]), -1.0, 1.0);
      }
      out.values[i * k + j] = r;
      out.values[j * k + i] = r;
    }
  }
  return out;
}

inline void write_correlation_csv(const CorrelationMatrix& m, std::ostream& out) {
  for (const auto& name : m.names) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << m.names[i];
    for (std::size_t j = 0; j < m.size(); ++j) out << ',' << format_double(m.at(i, j));
    out << '\n';
  }
}

// --- Synthetic desk-scale data -------------------------------------------

// Score of the generating rule: one point per indicator over cp, thalachh,
// oldpeak, ca and thal, each true for roughly half of the population drawn
// below. The noiseless label is a majority (3 of 5).
inline double synthetic_score(std::span<const double> row) {
  const double cp = row[2], thalachh = row[7], oldpeak = row[9], ca = row[11], thal = row[12];
  return (thalachh >= 137.0 ? 1.0 : 0.0) + (oldpeak < 3.1 ? 1.0 : 0.0) + (cp >= 2.0 ? 1.0 : 0.0) +
         (ca <= 1.0 ? 1.0 : 0.0) + (thal >= 2.0 ? 1.0 : 0.0);
}

inline int synthetic_rule(std::span<const double> row) { return synthetic_score(row) >= 3.0 ? 1 : 0; }

// Draws n_rows patients uniformly over the clinical ranges of each column and
// labels them with synthetic_rule. Each label is then flipped independently
// with probability `noise`, so the Bayes accuracy is 1 - noise.
inline Dataset synthesize_dataset(std::size_t n_rows, double noise, std::uint64_t seed) {
  if (n_rows < 20) throw std::invalid_argument("synthetic dataset needs at least 20 rows");
  if (!(noise >= 0.0 && noise <= 0.5)) throw std::invalid_argument("noise must lie in [0, 0.5]");
  Rng rng(derive_seed(seed, stream_tag("synthesize_dataset")));
  auto int_in = [&](int lo, int hi) {
    return static_cast<double>(lo + static_cast<int>(rng.index(static_cast<std::size_t>(hi - lo + 1))));
  };
  std::vector<double> values;
  std::vector<int> targets;
  values.reserve(n_rows * kHeartSchema.size());
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::array<double, 13> row{};
    row[0] = int_in(29, 77);                 // age
    row[1] = rng.bernoulli(0.68) ? 1 : 0;    // sex
    row[2] = int_in(0, 3);                   // cp
    row[3] = int_in(94, 200);                // trestbps
    row[4] = int_in(126, 564);               // chol
    row[5] = rng.bernoulli(0.15) ? 1 : 0;    // fbs
    row[6] = int_in(0, 2);                   // restecg
    row[7] = int_in(71, 202);                // thalachh
    row[8] = rng.bernoulli(0.33) ? 1 : 0;    // exang
    row[9] = int_in(0, 62) / 10.0;           // oldpeak
    row[10] = int_in(0, 2);                  // slope
    row[11] = int_in(0, 4);                  // ca
    row[12] = int_in(0, 3);                  // thal
    int label = synthetic_rule(row);
    if (rng.bernoulli(noise)) label = 1 - label;
    values.insert(values.end(), row.begin(), row.end());
    targets.push_back(label);
  }
  return Dataset(heart_schema(), std::move(values), std::move(targets));
}

}  // namespace psoformer

#endif  // PSOFORMER_DATA_HPP_
