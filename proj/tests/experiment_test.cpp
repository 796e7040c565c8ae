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

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fixtures.hpp"
#include "psoformer/experiment.hpp"

namespace psoformer::experiment {
namespace {

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / ("psoformer_" + std::string(info->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string path(const std::string& name) const { return (root_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream out(root_ / name, std::ios::binary);
    out << text;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  // Small, fast experiment over the synthetic generator.
  ExperimentConfig small(const std::string& out) const {
    ExperimentConfig c;
    c.output_dir = path(out);
    c.data.synthetic_rows = 200;
    c.baselines.forest_trees = 10;
    c.baselines.boost_rounds = 10;
    c.search.swarm.n_particles = 2;
    c.search.swarm.max_iters = 1;
    c.search.d_model_menu = {8, 16};
    c.search.heads_menu = {1, 2};
    c.search.layers_max = 1;
    c.search.epochs = 2;
    c.search.fitness_epochs = 1;
    return c;
  }

  static RunOptions quiet(std::size_t threads = 1) { return {threads, nullptr}; }

  fs::path root_;
};

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::vector<std::string> problems_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

TEST(Config, DefaultsAndOverrides) {
  const auto c = parse(
      "[experiment]\nseed = 7\noutput_dir = runs/a\n"
      "[search]\nparticles = 5\nd_model_menu = 16, 32\nrecord_wall_time = true\n"
      "[baselines]\nforest_trees = 12\n");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.output_dir, "runs/a");
  EXPECT_EQ(c.search.swarm.n_particles, 5u);
  EXPECT_EQ(c.search.d_model_menu, (std::vector<std::size_t>{16, 32}));
  EXPECT_TRUE(c.record_wall_time);
  EXPECT_EQ(c.baselines.forest_trees, 12u);
  EXPECT_EQ(c.search.swarm.max_iters, 100u);
  EXPECT_DOUBLE_EQ(c.test_fraction, 0.2);
  EXPECT_FALSE(c.transformer.has_value());
}

TEST(Config, ReportsEveryProblemAtOnce) {
  const auto p = problems_of(
      "[search]\nparticles = 0\nlr_min = -1\nbogus = 3\n"
      "[split]\ntest_fraction = 1.5\n"
      "[baselines]\nforest_trees = many\n");
  ASSERT_GE(p.size(), 5u);
  auto has = [&](const std::string& needle) {
    return std::any_of(p.begin(), p.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
  };
  EXPECT_TRUE(has("unknown key search.bogus"));
  EXPECT_TRUE(has("search.particles"));
  EXPECT_TRUE(has("search.lr_min"));
  EXPECT_TRUE(has("split.test_fraction"));
  EXPECT_TRUE(has("baselines.forest_trees"));
}

TEST(Config, TransformerSectionIsValidated) {
  const auto p = problems_of("[transformer]\nd_model = 10\nn_heads = 4\n");
  auto joined = std::accumulate(p.begin(), p.end(), std::string());
  EXPECT_NE(joined.find("divisible"), std::string::npos);
  EXPECT_NE(joined.find("transformer.model"), std::string::npos);
}

TEST(Config, RoundTripAndDigest) {
  auto c = parse("[experiment]\nseed = 9\n[search]\nheads_menu = 1,2,4\n[transformer]\nmodel = m.bin\nd_model = 32\n");
  const auto again = parse(to_ini(c));
  EXPECT_EQ(to_ini(again), to_ini(c));
  EXPECT_EQ(config_digest(again), config_digest(c));
  const auto digest = config_digest(c);
  c.output_dir = "elsewhere";
  EXPECT_EQ(config_digest(c), digest);
  c.seed = 10;
  EXPECT_NE(config_digest(c), digest);
  EXPECT_NE(run_stamp(c).find("seed=10"), std::string::npos);
}

TEST_F(ExperimentTest, LoadConfigMissingFile) {
  EXPECT_THROW(load_config(path("nope.ini")), ConfigError);
}

TEST_F(ExperimentTest, CorrelatePlantedPair) {
  Rng rng(3);
  std::ostringstream csv;
  csv << "a,b,c,d,target\n";
  for (int i = 0; i < 300; ++i) {
    const double a = rng.uniform(-1, 1), noise = rng.uniform(-1, 1);
    // d copies the target; c tracks a closely.
    csv << a << ',' << rng.uniform(-1, 1) << ',' << (a + 0.1 * noise) << ',' << (i % 2) << ',' << (i % 2) << '\n';
  }
  write("planted.csv", csv.str());
  ExperimentConfig c;
  c.output_dir = path("out");
  c.data.path = path("planted.csv");
  c.data.columns = {"a", "b", "c", "d"};
  c.baselines.forest_mtry = 2;
  const auto pairs = run_correlate(c, quiet());
  ASSERT_EQ(pairs.size(), 5u);
  EXPECT_EQ(pairs[0].a, "d");
  EXPECT_EQ(pairs[0].b, "target");
  EXPECT_NEAR(pairs[0].r, 1.0, 1e-12);
  EXPECT_EQ(pairs[1].a, "a");
  EXPECT_EQ(pairs[1].b, "c");
  EXPECT_GT(pairs[1].r, 0.99);
  const auto text = slurp(root_ / "out" / "correlation.csv");
  EXPECT_EQ(text.rfind("# " + run_stamp(c), 0), 0u);
  EXPECT_EQ(slurp(root_ / "out" / "correlation.pgm").rfind("P2\n", 0), 0u);
}

TEST_F(ExperimentTest, CorrelateSampleRows) {
  write("table1.csv", fixtures::kTable1Csv);
  ExperimentConfig c;
  c.output_dir = path("out");
  c.data.path = path("table1.csv");
  c.data.columns = fixtures::table1_schema();
  c.baselines.forest_mtry = 4;
  const auto pairs = run_correlate(c, quiet());
  ASSERT_EQ(pairs.size(), 5u);
  for (std::size_t i = 1; i < pairs.size(); ++i) EXPECT_GE(std::abs(pairs[i - 1].r), std::abs(pairs[i].r));
  for (const auto& p : pairs) {
    EXPECT_LE(std::abs(p.r), 1.0);
  }
}

TEST_F(ExperimentTest, MissingDataFileNamesThePath) {
  ExperimentConfig c;
  c.output_dir = path("out");
  c.data.path = path("absent.csv");
  try {
    run_correlate(c, quiet());
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find(c.data.path), std::string::npos);
  }
}

TEST_F(ExperimentTest, SingleClassDataIsRejected) {
  // Every sample row is positive.
  write("table1.csv", fixtures::kTable1Csv);
  ExperimentConfig c;
  c.output_dir = path("out");
  c.data.path = path("table1.csv");
  c.data.columns = fixtures::table1_schema();
  try {
    run_baselines(c, quiet());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.code(), DataErrc::kClassTooSmall);
  }
}

TEST_F(ExperimentTest, BaselinesAreByteIdenticalAcrossRuns) {
  const auto a = small("a"), b = small("b");
  const auto ra = run_baselines(a, quiet());
  run_baselines(b, quiet());
  ASSERT_EQ(ra.size(), 3u);
  EXPECT_EQ(ra[0].model, "Decision tree");
  EXPECT_EQ(ra[1].model, "Random forest");
  EXPECT_EQ(ra[2].model, "Gradient boosting");
  for (const char* f : {"baseline_reports.csv", "comparison.csv", "comparison.txt", "confusion_decision_tree.csv",
                        "confusion_random_forest.pgm"}) {
    ASSERT_TRUE(fs::exists(root_ / "a" / f)) << f;
    EXPECT_EQ(slurp(root_ / "a" / f), slurp(root_ / "b" / f)) << f;
  }
}

TEST_F(ExperimentTest, SearchThenReport) {
  const auto c = small("run");
  run_baselines(c, quiet());
  const auto run = run_search(c, quiet());
  for (const char* f : {"search_log.csv", "search_progress.txt", "convergence.csv", "model.bin", "best_config.ini",
                        "transformer_report.csv", "confusion_pso_transformer.csv"}) {
    EXPECT_TRUE(fs::exists(root_ / "run" / f)) << f;
  }
  const auto table = slurp(root_ / "run" / "comparison.txt");
  EXPECT_NE(table.find("PSO-Transformer"), std::string::npos);
  EXPECT_NE(table.find("Random forest"), std::string::npos);

  // search_log: stamp, header, one row per evaluation, empty seconds column.
  std::istringstream log(slurp(root_ / "run" / "search_log.csv"));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(log, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 2u + 4u);
  EXPECT_EQ(lines[1], search::kSearchLogHeader);
  EXPECT_EQ(lines[2].back(), ',');

  // The written config reproduces the test-set report.
  auto reusable = load_config(root_ / "run" / "best_config.ini");
  EXPECT_EQ(reusable.output_dir, "out");  // not recorded; supplied per run
  reusable.output_dir = c.output_dir;
  ASSERT_TRUE(reusable.transformer.has_value());
  EXPECT_EQ(reusable.transformer->config.d_model, run.result.best_config.d_model);
  run_report(reusable, quiet());
  std::ifstream in(root_ / "run" / "transformer_report.csv");
  const auto after = eval::read_reports_csv(in);
  ASSERT_EQ(after.size(), 1u);
  EXPECT_EQ(after[0].cm, run.test_report.cm);
}

TEST_F(ExperimentTest, ReportWithoutModelNeedsReports) {
  auto c = small("empty");
  EXPECT_THROW(run_report(c, quiet()), Error);
}

TEST_F(ExperimentTest, ThreadCountDoesNotChangeOutputs) {
  const auto a = small("t1"), b = small("t2");
  run_baselines(a, quiet(1));
  run_baselines(b, quiet(2));
  run_search(a, quiet(1));
  run_search(b, quiet(2));
  for (const char* f : {"baseline_reports.csv", "search_log.csv", "convergence.csv", "model.bin",
                        "transformer_report.csv", "comparison.csv"}) {
    EXPECT_EQ(slurp(root_ / "t1" / f), slurp(root_ / "t2" / f)) << f;
  }
}

}  // namespace
}  // namespace psoformer::experiment
