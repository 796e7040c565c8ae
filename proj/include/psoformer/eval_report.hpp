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

// Binary confusion matrices, accuracy/precision/recall/F1 in micro and macro
// form, and the multi-model comparison table.

#ifndef PSOFORMER_EVAL_REPORT_HPP_
#define PSOFORMER_EVAL_REPORT_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "psoformer/core.hpp"

namespace psoformer::eval {

enum class EvalErrc { kLengthMismatch, kInvalidLabel, kEmptyMatrix, kBadReportFile };

class EvalError : public Error {
 public:
  EvalError(EvalErrc code, const std::string& what) : Error(what), code_(code) {}
  EvalErrc code() const { return code_; }

 private:
  EvalErrc code_;
};

// counts[true][predicted].
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, 2>, 2> counts{};

  std::uint64_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
  std::uint64_t trace() const { return counts[0][0] + counts[1][1]; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw EvalError(EvalErrc::kLengthMismatch, "label vectors differ in length");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) {
      throw EvalError(EvalErrc::kInvalidLabel, "label outside {0, 1} at index " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return cm;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when the denominator was zero and the value defaulted to 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct MetricSet {
  double accuracy = 0.0;
  std::array<ClassMetrics, 2> per_class{};
  ClassMetrics micro;
  ClassMetrics macro;
};

namespace detail {

inline double ratio(std::uint64_t num, std::uint64_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Precision, recall and F1 straight from tp/fp/fn counts.
inline ClassMetrics from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  ClassMetrics m;
  m.precision = ratio(tp, tp + fp, m.precision_undefined);
  m.recall = ratio(tp, tp + fn, m.recall_undefined);
  m.f1 = ratio(2 * tp, 2 * tp + fp + fn, m.f1_undefined);
  return m;
}

}  // namespace detail

// Micro figures pool the per-class tp/fp/fn, which for single-label data
// makes each of them trace / total, bit-identical to accuracy.
inline MetricSet metrics(const ConfusionMatrix& cm) {
  const std::uint64_t n = cm.total();
  if (n == 0) throw EvalError(EvalErrc::kEmptyMatrix, "confusion matrix is empty");
  MetricSet m;
  m.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(n);
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    const std::uint64_t ctp = cm.counts[c][c];
    const std::uint64_t cfp = cm.counts[1 - c][c];
    const std::uint64_t cfn = cm.counts[c][1 - c];
    m.per_class[c] = detail::from_counts(ctp, cfp, cfn);
    tp += ctp;
    fp += cfp;
    fn += cfn;
  }
  m.micro = detail::from_counts(tp, fp, fn);
  const auto& a = m.per_class[0];
  const auto& b = m.per_class[1];
  m.macro.precision = (a.precision + b.precision) / 2.0;
  m.macro.recall = (a.recall + b.recall) / 2.0;
  m.macro.f1 = (a.f1 + b.f1) / 2.0;
  m.macro.precision_undefined = a.precision_undefined || b.precision_undefined;
  m.macro.recall_undefined = a.recall_undefined || b.recall_undefined;
  m.macro.f1_undefined = a.f1_undefined || b.f1_undefined;
  return m;
}

struct EvaluationReport {
  std::string model;
  std::string split = "test";
  ConfusionMatrix cm;
  std::optional<MetricSet> metrics;  // empty when the matrix is empty
  std::uint64_t seed = 0;
  std::string config_digest;
};

inline EvaluationReport evaluate(std::string model, std::span<const int> y_true, std::span<const int> y_pred,
                                 std::uint64_t seed = 0, std::string digest = {}, std::string split = "test") {
  EvaluationReport r;
  r.model = std::move(model);
  r.split = std::move(split);
  r.cm = confusion(y_true, y_pred);
  if (r.cm.total() > 0) r.metrics = metrics(r.cm);
  r.seed = seed;
  r.config_digest = std::move(digest);
  return r;
}

// --- Report files ----------------------------------------------------------

inline constexpr const char* kReportHeader =
    "model,split,tn,fp,fn,tp,accuracy,micro_precision,micro_recall,micro_f1,"
    "macro_precision,macro_recall,macro_f1,undefined_flags,seed,config_digest";

inline void write_reports_csv(std::span<const EvaluationReport> reports, std::ostream& out) {
  out << kReportHeader << '\n';
  for (const auto& r : reports) {
    const auto& c = r.cm.counts;
    out << r.model << ',' << r.split << ',' << c[0][0] << ',' << c[0][1] << ',' << c[1][0] << ',' << c[1][1];
    if (r.metrics) {
      const auto& m = *r.metrics;
      for (double v : {m.accuracy, m.micro.precision, m.micro.recall, m.micro.f1, m.macro.precision,
                       m.macro.recall, m.macro.f1}) {
        out << ',' << format_double(v);
      }
      std::string flags;
      if (m.macro.precision_undefined) flags += "P";
      if (m.macro.recall_undefined) flags += "R";
      if (m.macro.f1_undefined) flags += "F";
      out << ',' << flags;
    } else {
      out << ",,,,,,,,all";
    }
    out << ',' << r.seed << ',' << r.config_digest << '\n';
  }
}

// Reads files produced by write_reports_csv; metrics are recomputed from the
// stored counts. Lines starting with '#' are skipped.
inline std::vector<EvaluationReport> read_reports_csv(std::istream& in) {
  std::vector<EvaluationReport> out;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("model,split,", 0) != 0) throw EvalError(EvalErrc::kBadReportFile, "unexpected report header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 16) throw EvalError(EvalErrc::kBadReportFile, "malformed report row: " + line);
    EvaluationReport r;
    r.model = cells[0];
    r.split = cells[1];
    try {
      r.cm.counts[0][0] = std::stoull(cells[2]);
      r.cm.counts[0][1] = std::stoull(cells[3]);
      r.cm.counts[1][0] = std::stoull(cells[4]);
      r.cm.counts[1][1] = std::stoull(cells[5]);
      r.seed = std::stoull(cells[14]);
    } catch (const std::exception&) {
      throw EvalError(EvalErrc::kBadReportFile, "malformed report row: " + line);
    }
    r.config_digest = cells[15];
    if (r.cm.total() > 0) r.metrics = metrics(r.cm);
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& out) {
  out << "true\\predicted,0,1\n";
  out << "0," << cm.counts[0][0] << ',' << cm.counts[0][1] << '\n';
  out << "1," << cm.counts[1][0] << ',' << cm.counts[1][1] << '\n';
}

// Plain grayscale pixmap (PGM "P2"): a `rows` x `cols` grid of cells, each
// `cell` pixels square. Intensities are 0..255, one value per pixel, rows top
// to bottom. Optional comment lines go after the magic number.
inline void write_pgm_grid(std::ostream& out, std::size_t rows, std::size_t cols,
                           std::span<const std::uint8_t> cell_values, std::size_t cell,
                           std::span<const std::string> comments = {}) {
  out << "P2\n";
  for (const auto& c : comments) out << "# " << c << '\n';
  out << cols * cell << ' ' << rows * cell << "\n255\n";
  for (std::size_t r = 0; r < rows * cell; ++r) {
    for (std::size_t c = 0; c < cols * cell; ++c) {
      if (c) out << ' ';
      out << static_cast<int>(cell_values[(r / cell) * cols + c / cell]);
    }
    out << '\n';
  }
}

// Heatmap of a confusion matrix: brightness proportional to count / max count.
inline void write_confusion_pgm(const ConfusionMatrix& cm, std::ostream& out,
                                std::span<const std::string> comments = {}) {
  std::uint64_t peak = 0;
  for (const auto& row : cm.counts) {
    for (auto v : row) peak = std::max(peak, v);
  }
  std::vector<std::uint8_t> cells;
  for (const auto& row : cm.counts) {
    for (auto v : row) {
      cells.push_back(peak ? static_cast<std::uint8_t>(std::lround(255.0 * static_cast<double>(v) /
                                                                   static_cast<double>(peak)))
                           : 0);
    }
  }
  write_pgm_grid(out, 2, 2, cells, 32, comments);
}

// --- Comparison table ------------------------------------------------------

struct AccuracyDelta {
  std::string better;
  std::string worse;
  double points = 0.0;  // (accuracy_better - accuracy_worse) * 100
};

struct ComparisonTable {
  std::vector<EvaluationReport> rows;  // sorted by accuracy, descending
  std::vector<AccuracyDelta> deltas;   // every pair (i < j) in row order
};

inline double headline_accuracy(const EvaluationReport& r) { return r.metrics ? r.metrics->accuracy : 0.0; }

inline ComparisonTable comparison_report(std::vector<EvaluationReport> reports) {
  if (reports.empty()) throw std::invalid_argument("comparison needs at least one report");
  ComparisonTable t;
  std::stable_sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
    return headline_accuracy(a) > headline_accuracy(b);
  });
  t.rows = std::move(reports);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t j = i + 1; j < t.rows.size(); ++j) {
      t.deltas.push_back({t.rows[i].model, t.rows[j].model,
                          (headline_accuracy(t.rows[i]) - headline_accuracy(t.rows[j])) * 100.0});
    }
  }
  return t;
}

// "+4.3 points" style, one decimal, explicit sign.
inline std::string format_points(double points) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.1f points", points + 0.0);
  std::string s(buf);
  if (s.rfind("-0.0 ", 0) == 0) s[0] = '+';
  return s;
}

inline constexpr std::array<const char*, 5> kComparisonColumns = {"model", "Accuracy", "Precision", "recall", "F1"};

// Headline figures are the micro averages.
inline void write_comparison_csv(const ComparisonTable& t, std::ostream& out) {
  for (std::size_t i = 0; i < kComparisonColumns.size(); ++i) out << (i ? "," : "") << kComparisonColumns[i];
  out << '\n';
  for (const auto& r : t.rows) {
    out << r.model;
    if (r.metrics) {
      const auto& m = *r.metrics;
      for (double v : {m.accuracy, m.micro.precision, m.micro.recall, m.micro.f1}) out << ',' << format_fixed(v, 3);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
}

inline std::string format_comparison_text(const ComparisonTable& t) {
  std::size_t width = std::string_view(kComparisonColumns[0]).size();
  for (const auto& r : t.rows) width = std::max(width, r.model.size());
  std::ostringstream out;
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(w, s.size()), ' ');
    return s;
  };
  out << pad(kComparisonColumns[0], width);
  for (std::size_t i = 1; i < kComparisonColumns.size(); ++i) out << "  " << pad(kComparisonColumns[i], 9);
  out << '\n';
  for (const auto& r : t.rows) {
    out << pad(r.model, width);
    if (r.metrics) {
      const auto& m = *r.metrics;
      for (double v : {m.accuracy, m.micro.precision, m.micro.recall, m.micro.f1}) {
        out << "  " << pad(format_fixed(v, 3), 9);
      }
    } else {
      out << "  (no rows evaluated)";
    }
    out << '\n';
  }
  if (!t.deltas.empty()) out << '\n';
  for (const auto& d : t.deltas) out << d.better << " vs " << d.worse << ": " << format_points(d.points) << '\n';
  return out.str();
}

}  // namespace psoformer::eval

#endif  // PSOFORMER_EVAL_REPORT_HPP_
