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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "psoformer/eval_report.hpp"

namespace psoformer::eval {
namespace {

ConfusionMatrix cm_of(std::uint64_t tn, std::uint64_t fp, std::uint64_t fn, std::uint64_t tp) {
  ConfusionMatrix cm;
  cm.counts = {{{tn, fp}, {fn, tp}}};
  return cm;
}

EvaluationReport report(std::string name, const ConfusionMatrix& cm) {
  EvaluationReport r;
  r.model = std::move(name);
  r.cm = cm;
  r.metrics = metrics(cm);
  return r;
}

TEST(Confusion, Counting) {
  const std::vector<int> t{1, 1, 0, 0}, p{1, 0, 0, 1};
  EXPECT_EQ(confusion(t, p), cm_of(1, 1, 1, 1));
  const std::vector<int> y{0, 1, 1, 0, 1};
  const auto perfect = confusion(y, y);
  EXPECT_EQ(perfect.counts[0][1], 0u);
  EXPECT_EQ(perfect.counts[1][0], 0u);
  EXPECT_EQ(perfect.total(), 5u);
}

TEST(Confusion, Errors) {
  const std::vector<int> a{0, 1}, b{0}, bad{0, 2};
  try {
    confusion(a, b);
    FAIL();
  } catch (const EvalError& e) {
    EXPECT_EQ(e.code(), EvalErrc::kLengthMismatch);
  }
  try {
    confusion(a, bad);
    FAIL();
  } catch (const EvalError& e) {
    EXPECT_EQ(e.code(), EvalErrc::kInvalidLabel);
  }
}

TEST(Confusion, EmptyInputsFlagUndefined) {
  const std::vector<int> none;
  const auto r = evaluate("m", none, none);
  EXPECT_EQ(r.cm.total(), 0u);
  EXPECT_FALSE(r.metrics.has_value());
  try {
    metrics(r.cm);
    FAIL();
  } catch (const EvalError& e) {
    EXPECT_EQ(e.code(), EvalErrc::kEmptyMatrix);
  }
}

TEST(Confusion, PermutationInvariant) {
  Rng rng(4);
  std::vector<int> t(200), p(200);
  for (int i = 0; i < 200; ++i) t[i] = rng.bernoulli(0.4), p[i] = rng.bernoulli(0.6);
  const auto base = confusion(t, p);
  std::vector<std::size_t> perm(200);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<int> t2, p2;
  for (auto i : perm) t2.push_back(t[i]), p2.push_back(p[i]);
  EXPECT_EQ(confusion(t2, p2), base);
}

TEST(Metrics, SymmetricMatrix) {
  const auto m = metrics(cm_of(9, 1, 1, 9));
  EXPECT_DOUBLE_EQ(m.accuracy, 0.9);
  EXPECT_DOUBLE_EQ(m.macro.precision, 0.9);
  EXPECT_DOUBLE_EQ(m.macro.recall, 0.9);
  EXPECT_DOUBLE_EQ(m.macro.f1, 0.9);
}

TEST(Metrics, PerfectClassifier) {
  const auto m = metrics(cm_of(10, 0, 0, 10));
  for (double v : {m.accuracy, m.micro.precision, m.micro.recall, m.micro.f1, m.macro.precision, m.macro.recall,
                   m.macro.f1}) {
    EXPECT_EQ(v, 1.0);
  }
}

TEST(Metrics, HandComputedAsymmetric) {
  // tn=50 fp=10 fn=5 tp=35
  const auto m = metrics(cm_of(50, 10, 5, 35));
  EXPECT_DOUBLE_EQ(m.accuracy, 0.85);
  EXPECT_DOUBLE_EQ(m.per_class[1].precision, 35.0 / 45.0);
  EXPECT_DOUBLE_EQ(m.per_class[1].recall, 35.0 / 40.0);
  EXPECT_DOUBLE_EQ(m.per_class[0].precision, 50.0 / 55.0);
  EXPECT_DOUBLE_EQ(m.per_class[0].recall, 50.0 / 60.0);
  const double f1_1 = 2.0 * (35.0 / 45.0) * (35.0 / 40.0) / (35.0 / 45.0 + 35.0 / 40.0);
  EXPECT_NEAR(m.per_class[1].f1, f1_1, 1e-15);
  EXPECT_NEAR(m.macro.precision, (35.0 / 45.0 + 50.0 / 55.0) / 2.0, 1e-15);
}

TEST(Metrics, ZeroDenominatorsAreFlagged) {
  // Never predicts class 1.
  const auto m = metrics(cm_of(6, 0, 4, 0));
  EXPECT_EQ(m.per_class[1].precision, 0.0);
  EXPECT_TRUE(m.per_class[1].precision_undefined);
  EXPECT_FALSE(m.per_class[1].recall_undefined);
  EXPECT_TRUE(m.macro.precision_undefined);
  EXPECT_FALSE(m.micro.precision_undefined);
}

TEST(Metrics, MicroEqualsAccuracyExactly) {
  Rng rng(12);
  for (int i = 0; i < 2000; ++i) {
    const auto cm = cm_of(rng.index(500), rng.index(500), rng.index(500), rng.index(500) + 1);
    const auto m = metrics(cm);
    ASSERT_EQ(m.micro.precision, m.accuracy);
    ASSERT_EQ(m.micro.recall, m.accuracy);
    ASSERT_EQ(m.micro.f1, m.accuracy);
  }
}

TEST(Metrics, MacroInvariantUnderClassRelabeling) {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const std::uint64_t a = rng.index(50) + 1, b = rng.index(50), c = rng.index(50), d = rng.index(50) + 1;
    const auto m = metrics(cm_of(a, b, c, d));
    const auto s = metrics(cm_of(d, c, b, a));  // swap both rows and columns
    EXPECT_DOUBLE_EQ(m.macro.precision, s.macro.precision);
    EXPECT_DOUBLE_EQ(m.macro.recall, s.macro.recall);
    EXPECT_DOUBLE_EQ(m.macro.f1, s.macro.f1);
    EXPECT_EQ(m.accuracy, s.accuracy);
  }
}

TEST(Comparison, HeadlineDelta) {
  // 0.965 and 0.922 on 1000 rows.
  const auto t = comparison_report({report("Random forest", cm_of(461, 39, 39, 461)),
                                    report("PSO-Transformer", cm_of(482, 17, 18, 483))});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].model, "PSO-Transformer");
  EXPECT_DOUBLE_EQ(t.rows[0].metrics->accuracy, 0.965);
  EXPECT_DOUBLE_EQ(t.rows[1].metrics->accuracy, 0.922);
  ASSERT_EQ(t.deltas.size(), 1u);
  EXPECT_EQ(format_points(t.deltas[0].points), "+4.3 points");
  EXPECT_NE(format_comparison_text(t).find("PSO-Transformer vs Random forest: +4.3 points"), std::string::npos);
}

TEST(Comparison, DegenerateInputs) {
  const auto one = comparison_report({report("a", cm_of(3, 1, 1, 3))});
  EXPECT_EQ(one.rows.size(), 1u);
  EXPECT_TRUE(one.deltas.empty());
  const auto same = comparison_report({report("a", cm_of(3, 1, 1, 3)), report("b", cm_of(3, 1, 1, 3))});
  EXPECT_EQ(same.deltas[0].points, 0.0);
  EXPECT_EQ(format_points(same.deltas[0].points), "+0.0 points");
  EXPECT_EQ(same.rows[0].model, "a");  // stable order on ties
  EXPECT_THROW(comparison_report({}), std::invalid_argument);
  EXPECT_EQ(format_points(-1.25), "-1.2 points");
}

TEST(Comparison, CsvHeaderAndRows) {
  const auto t = comparison_report({report("Decision tree", cm_of(9, 1, 1, 9)),
                                    report("Random forest", cm_of(10, 0, 1, 9))});
  std::ostringstream out;
  write_comparison_csv(t, out);
  EXPECT_EQ(out.str(),
            "model,Accuracy,Precision,recall,F1\n"
            "Random forest,0.950,0.950,0.950,0.950\n"
            "Decision tree,0.900,0.900,0.900,0.900\n");
}

TEST(ReportsCsv, RoundTrip) {
  std::vector<EvaluationReport> rs{report("Decision tree", cm_of(9, 1, 2, 8)),
                                   report("Never positive", cm_of(6, 0, 4, 0))};
  rs[0].seed = 42;
  rs[0].config_digest = "00ff";
  const std::vector<int> none;
  rs.push_back(evaluate("Empty", none, none, 3, ""));
  std::stringstream buf;
  buf << "# comment line\n";
  write_reports_csv(rs, buf);
  const auto back = read_reports_csv(buf);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].model, "Decision tree");
  EXPECT_EQ(back[0].cm, rs[0].cm);
  EXPECT_EQ(back[0].seed, 42u);
  EXPECT_EQ(back[0].config_digest, "00ff");
  EXPECT_EQ(back[0].metrics->accuracy, rs[0].metrics->accuracy);
  EXPECT_EQ(back[1].cm, rs[1].cm);
  EXPECT_FALSE(back[2].metrics.has_value());
  std::stringstream bad("nonsense\n");
  EXPECT_THROW(read_reports_csv(bad), EvalError);
}

TEST(Images, ConfusionCsvAndPgm) {
  const auto cm = cm_of(40, 10, 0, 20);
  std::ostringstream csv;
  write_confusion_csv(cm, csv);
  EXPECT_EQ(csv.str(), "true\\predicted,0,1\n0,40,10\n1,0,20\n");
  std::ostringstream pgm;
  const std::vector<std::string> comments{"hello"};
  write_confusion_pgm(cm, pgm, comments);
  std::istringstream in(pgm.str());
  std::string magic, comment;
  std::getline(in, magic);
  std::getline(in, comment);
  EXPECT_EQ(magic, "P2");
  EXPECT_EQ(comment, "# hello");
  std::size_t w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  EXPECT_EQ(w, 64u);
  EXPECT_EQ(h, 64u);
  EXPECT_EQ(maxval, 255u);
  std::vector<int> px(w * h);
  for (auto& v : px) in >> v;
  EXPECT_TRUE(in);
  EXPECT_EQ(px[0], 255);                        // tn is the peak
  EXPECT_EQ(px[40], std::lround(255.0 / 4.0));  // fp cell
  EXPECT_EQ(px[40 * 64], 0);                    // fn cell
  EXPECT_EQ(px[40 * 64 + 40], std::lround(255.0 / 2.0));
}

}  // namespace
}  // namespace psoformer::eval
