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

// Experiment configuration (INI) and the correlate / baselines / search /
// report stages driven by the command-line tool.
//
// Every file written by a stage lives under the configured output directory
// and starts with a "# psoformer run: config_digest=... seed=..." stamp (as a
// comment line for text formats, in the tag field for the model file). The
// digest hashes the canonical form of every setting except the output
// directory and thread count, so serial and parallel runs share it.

#ifndef PSOFORMER_EXPERIMENT_HPP_
#define PSOFORMER_EXPERIMENT_HPP_

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "psoformer/baselines.hpp"
#include "psoformer/core.hpp"
#include "psoformer/data.hpp"
#include "psoformer/eval_report.hpp"
#include "psoformer/pso_search.hpp"
#include "psoformer/transformer.hpp"

namespace psoformer::experiment {

namespace fs = std::filesystem;

// All problems found in a configuration, one per line.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = "invalid configuration:";
    for (const auto& line : p) s += "\n  " + line;
    return s;
  }
  std::vector<std::string> problems_;
};

struct DataSource {
  std::string path;  // empty selects the synthetic generator
  std::vector<std::string> columns = heart_schema();
  std::size_t synthetic_rows = 1000;
  double synthetic_noise = 0.05;
  std::uint64_t synthetic_seed = 42;
};

struct BaselineSettings {
  std::size_t tree_max_depth = 8;  // 0 = unlimited
  std::size_t tree_min_leaf = 1;
  std::size_t forest_trees = 100;
  std::size_t forest_max_depth = 0;
  std::size_t forest_min_leaf = 1;
  std::size_t forest_mtry = 4;
  std::size_t boost_rounds = 100;
  std::size_t boost_max_depth = 3;
  double boost_learning_rate = 0.1;
};

// A fixed, already-trained Transformer (written by the search stage).
struct FixedModel {
  transformer::TransformerConfig config;
  std::string model_path;
};

struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "out";
  DataSource data;
  double test_fraction = 0.2;
  BaselineSettings baselines;
  search::HyperSearchSpec search;
  double holdout_fraction = 0.25;
  bool record_wall_time = false;
  std::optional<FixedModel> transformer;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline bool parse_size(const std::string& s, std::size_t& out) {
  double v = 0.0;
  if (!parse_double(s, v) || v < 0.0 || v != std::floor(v) || v > 1e15) return false;
  out = static_cast<std::size_t>(v);
  return true;
}

inline bool parse_u64(const std::string& s, std::uint64_t& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  return res.ec == std::errc() && res.ptr == t.data() + t.size();
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::string join_list(const std::vector<T>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  return out.str();
}

// One configuration key: how to parse it into the struct and how to print it
// back in canonical form.
struct Field {
  std::string section;
  std::string key;
  std::function<bool(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Member>
Field size_field(std::string section, std::string key, Member member) {
  return {std::move(section), std::move(key),
          [member](ExperimentConfig& c, const std::string& v) { return parse_size(v, member(c)); },
          [member](const ExperimentConfig& c) {
            return std::to_string(member(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Member>
Field double_field(std::string section, std::string key, Member member) {
  return {std::move(section), std::move(key),
          [member](ExperimentConfig& c, const std::string& v) { return parse_double(v, member(c)); },
          [member](const ExperimentConfig& c) { return format_double(member(const_cast<ExperimentConfig&>(c))); }};
}

inline std::vector<Field> fields() {
  using C = ExperimentConfig;
  std::vector<Field> f;
  f.push_back({"experiment", "seed", [](C& c, const std::string& v) { return parse_u64(v, c.seed); },
               [](const C& c) { return std::to_string(c.seed); }});
  f.push_back({"data", "path",
               [](C& c, const std::string& v) {
                 c.data.path = trim(v);
                 return true;
               },
               [](const C& c) { return c.data.path; }});
  f.push_back({"data", "columns",
               [](C& c, const std::string& v) {
                 c.data.columns = split_list(v);
                 return !c.data.columns.empty();
               },
               [](const C& c) { return join_list(c.data.columns); }});
  f.push_back(size_field("data", "synthetic_rows", [](C& c) -> auto& { return c.data.synthetic_rows; }));
  f.push_back(double_field("data", "synthetic_noise", [](C& c) -> auto& { return c.data.synthetic_noise; }));
  f.push_back({"data", "synthetic_seed", [](C& c, const std::string& v) { return parse_u64(v, c.data.synthetic_seed); },
               [](const C& c) { return std::to_string(c.data.synthetic_seed); }});
  f.push_back(double_field("split", "test_fraction", [](C& c) -> auto& { return c.test_fraction; }));

  f.push_back(size_field("baselines", "tree_max_depth", [](C& c) -> auto& { return c.baselines.tree_max_depth; }));
  f.push_back(size_field("baselines", "tree_min_leaf", [](C& c) -> auto& { return c.baselines.tree_min_leaf; }));
  f.push_back(size_field("baselines", "forest_trees", [](C& c) -> auto& { return c.baselines.forest_trees; }));
  f.push_back(size_field("baselines", "forest_max_depth", [](C& c) -> auto& { return c.baselines.forest_max_depth; }));
  f.push_back(size_field("baselines", "forest_min_leaf", [](C& c) -> auto& { return c.baselines.forest_min_leaf; }));
  f.push_back(size_field("baselines", "forest_mtry", [](C& c) -> auto& { return c.baselines.forest_mtry; }));
  f.push_back(size_field("baselines", "boost_rounds", [](C& c) -> auto& { return c.baselines.boost_rounds; }));
  f.push_back(size_field("baselines", "boost_max_depth", [](C& c) -> auto& { return c.baselines.boost_max_depth; }));
  f.push_back(double_field("baselines", "boost_learning_rate",
                           [](C& c) -> auto& { return c.baselines.boost_learning_rate; }));

  f.push_back(size_field("search", "particles", [](C& c) -> auto& { return c.search.swarm.n_particles; }));
  f.push_back(size_field("search", "iterations", [](C& c) -> auto& { return c.search.swarm.max_iters; }));
  f.push_back(double_field("search", "w_start", [](C& c) -> auto& { return c.search.swarm.w_start; }));
  f.push_back(double_field("search", "w_end", [](C& c) -> auto& { return c.search.swarm.w_end; }));
  f.push_back(double_field("search", "c1", [](C& c) -> auto& { return c.search.swarm.c1; }));
  f.push_back(double_field("search", "c2", [](C& c) -> auto& { return c.search.swarm.c2; }));
  f.push_back(double_field("search", "vmax_fraction", [](C& c) -> auto& { return c.search.swarm.vmax_fraction; }));
  f.push_back(double_field("search", "lr_min", [](C& c) -> auto& { return c.search.lr_min; }));
  f.push_back(double_field("search", "lr_max", [](C& c) -> auto& { return c.search.lr_max; }));
  f.push_back(size_field("search", "layers_min", [](C& c) -> auto& { return c.search.layers_min; }));
  f.push_back(size_field("search", "layers_max", [](C& c) -> auto& { return c.search.layers_max; }));
  auto menu_field = [](std::string key, std::vector<std::size_t> search::HyperSearchSpec::*menu) {
    return Field{"search", std::move(key),
                 [menu](C& c, const std::string& v) {
                   std::vector<std::size_t> out;
                   for (const auto& item : split_list(v)) {
                     std::size_t x = 0;
                     if (!parse_size(item, x) || x == 0) return false;
                     out.push_back(x);
                   }
                   c.search.*menu = std::move(out);
                   return !(c.search.*menu).empty();
                 },
                 [menu](const C& c) { return join_list(c.search.*menu); }};
  };
  f.push_back(menu_field("d_model_menu", &search::HyperSearchSpec::d_model_menu));
  f.push_back(menu_field("heads_menu", &search::HyperSearchSpec::heads_menu));
  f.push_back(size_field("search", "ff_multiplier", [](C& c) -> auto& { return c.search.ff_multiplier; }));
  f.push_back(size_field("search", "batch_size", [](C& c) -> auto& { return c.search.batch_size; }));
  f.push_back(size_field("search", "epochs", [](C& c) -> auto& { return c.search.epochs; }));
  f.push_back(size_field("search", "fitness_epochs", [](C& c) -> auto& { return c.search.fitness_epochs; }));
  f.push_back(double_field("search", "holdout_fraction", [](C& c) -> auto& { return c.holdout_fraction; }));
  f.push_back({"search", "record_wall_time",
               [](C& c, const std::string& v) {
                 const std::string t = trim(v);
                 if (t == "true" || t == "1") c.record_wall_time = true;
                 else if (t == "false" || t == "0") c.record_wall_time = false;
                 else return false;
                 return true;
               },
               [](const C& c) { return std::string(c.record_wall_time ? "true" : "false"); }});
  return f;
}

// [transformer] keys; present only in configs written after a search.
inline std::vector<Field> transformer_fields() {
  using C = ExperimentConfig;
  auto tf = [](C& c) -> FixedModel& {
    if (!c.transformer) c.transformer.emplace();
    return *c.transformer;
  };
  std::vector<Field> f;
  auto size_key = [&](std::string key, std::size_t transformer::TransformerConfig::*m) {
    return Field{"transformer", std::move(key),
                 [tf, m](C& c, const std::string& v) { return parse_size(v, tf(c).config.*m); },
                 [m](const C& c) { return std::to_string(c.transformer->config.*m); }};
  };
  f.push_back(size_key("n_layers", &transformer::TransformerConfig::n_layers));
  f.push_back(size_key("d_model", &transformer::TransformerConfig::d_model));
  f.push_back(size_key("n_heads", &transformer::TransformerConfig::n_heads));
  f.push_back(size_key("d_ff", &transformer::TransformerConfig::d_ff));
  f.push_back(size_key("batch_size", &transformer::TransformerConfig::batch_size));
  f.push_back(size_key("epochs", &transformer::TransformerConfig::epochs));
  f.push_back({"transformer", "learning_rate",
               [tf](C& c, const std::string& v) { return parse_double(v, tf(c).config.learning_rate); },
               [](const C& c) { return format_double(c.transformer->config.learning_rate); }});
  f.push_back({"transformer", "seed",
               [tf](C& c, const std::string& v) { return parse_u64(v, tf(c).config.seed); },
               [](const C& c) { return std::to_string(c.transformer->config.seed); }});
  f.push_back({"transformer", "model",
               [tf](C& c, const std::string& v) {
                 tf(c).model_path = trim(v);
                 return !tf(c).model_path.empty();
               },
               [](const C& c) { return c.transformer->model_path; }});
  return f;
}

}  // namespace detail

// Cross-field checks; returns every problem found.
inline std::vector<std::string> validation_problems(const ExperimentConfig& c) {
  std::vector<std::string> p;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) p.push_back(msg);
  };
  need(c.data.synthetic_rows >= 20, "data.synthetic_rows must be >= 20");
  need(c.data.synthetic_noise >= 0.0 && c.data.synthetic_noise <= 0.5, "data.synthetic_noise must lie in [0, 0.5]");
  if (c.data.path.empty()) {
    need(c.data.columns == heart_schema(), "data.columns can only be changed when data.path is set");
  }
  need(c.test_fraction > 0.0 && c.test_fraction < 1.0, "split.test_fraction must lie in (0, 1)");
  need(c.holdout_fraction > 0.0 && c.holdout_fraction < 1.0, "search.holdout_fraction must lie in (0, 1)");
  const auto& b = c.baselines;
  need(b.tree_min_leaf >= 1 && b.forest_min_leaf >= 1, "baselines min_leaf values must be >= 1");
  need(b.forest_trees >= 1, "baselines.forest_trees must be >= 1");
  need(b.forest_mtry >= 1 && b.forest_mtry <= c.data.columns.size(),
       "baselines.forest_mtry must lie in [1, number of feature columns]");
  need(b.boost_learning_rate >= 0.0, "baselines.boost_learning_rate must be >= 0");
  const auto& s = c.search;
  need(s.swarm.n_particles >= 1, "search.particles must be >= 1");
  need(s.swarm.max_iters >= 1, "search.iterations must be >= 1");
  need(s.swarm.w_end > 0.0 && s.swarm.w_end <= s.swarm.w_start, "need 0 < search.w_end <= search.w_start");
  need(s.swarm.c1 >= 0.0 && s.swarm.c2 >= 0.0, "search.c1 and search.c2 must be >= 0");
  need(s.swarm.vmax_fraction > 0.0 && s.swarm.vmax_fraction <= 1.0, "search.vmax_fraction must lie in (0, 1]");
  need(s.lr_min > 0.0 && s.lr_min < s.lr_max, "need 0 < search.lr_min < search.lr_max");
  need(s.layers_min >= 1 && s.layers_min <= s.layers_max, "need 1 <= search.layers_min <= search.layers_max");
  need(std::is_sorted(s.heads_menu.begin(), s.heads_menu.end()) && !s.heads_menu.empty() && s.heads_menu.front() == 1,
       "search.heads_menu must be ascending and start at 1");
  need(s.ff_multiplier >= 1 && s.batch_size >= 1 && s.epochs >= 1 && s.fitness_epochs >= 1,
       "search.ff_multiplier, batch_size, epochs and fitness_epochs must be >= 1");
  if (c.transformer) {
    transformer::TransformerConfig t = c.transformer->config;
    t.n_features = c.data.columns.size();
    try {
      t.validate();
    } catch (const std::exception& e) {
      p.push_back(std::string("[transformer] ") + e.what());
    }
    need(!c.transformer->model_path.empty(), "transformer.model must name the model file");
  }
  return p;
}

// Parses INI text. Unknown keys, unparseable values and failed cross-field
// checks are all collected and raised together.
inline ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({std::string("syntax error: ") + e.what()});
  }
  ExperimentConfig cfg;
  std::vector<std::string> problems;
  auto all = detail::fields();
  for (auto& f : detail::transformer_fields()) all.push_back(std::move(f));
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      problems.push_back("key \"" + section + "\" must be inside a [section]");
      continue;
    }
    for (const auto& [key, value] : body) {
      if (section == "experiment" && key == "output_dir") {
        cfg.output_dir = detail::trim(value.data());
        if (cfg.output_dir.empty()) problems.push_back("experiment.output_dir must not be empty");
        continue;
      }
      auto it = std::find_if(all.begin(), all.end(),
                             [&](const detail::Field& f) { return f.section == section && f.key == key; });
      if (it == all.end()) {
        problems.push_back("unknown key " + section + "." + key);
      } else if (!it->set(cfg, value.data())) {
        problems.push_back("bad value for " + section + "." + key + ": \"" + value.data() + "\"");
      }
    }
  }
  if (cfg.transformer) {
    if (cfg.transformer->model_path.empty()) problems.push_back("transformer.model is required");
    cfg.transformer->config.n_features = cfg.data.columns.size();
  }
  for (auto& p : validation_problems(cfg)) problems.push_back(std::move(p));
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

inline ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path.string()});
  return parse_config(in);
}

// Canonical INI text. With `include_output` false the output directory is
// omitted; that form is what the digest hashes.
inline std::string to_ini(const ExperimentConfig& c, bool include_output = true) {
  std::ostringstream out;
  std::string current;
  auto emit = [&](const detail::Field& f) {
    if (f.section != current) {
      out << (current.empty() ? "" : "\n") << '[' << f.section << "]\n";
      current = f.section;
      if (f.section == "experiment" && include_output) out << "output_dir = " << c.output_dir << '\n';
    }
    out << f.key << " = " << f.get(c) << '\n';
  };
  for (const auto& f : detail::fields()) emit(f);
  if (c.transformer) {
    for (const auto& f : detail::transformer_fields()) emit(f);
  }
  return out.str();
}

inline std::string config_digest(const ExperimentConfig& c) { return hex64(fnv1a64(to_ini(c, false))); }

inline std::string run_stamp(const ExperimentConfig& c) {
  return "psoformer run: config_digest=" + config_digest(c) + " seed=" + std::to_string(c.seed);
}

// --- Stages ----------------------------------------------------------------

struct RunOptions {
  std::size_t threads = 1;
  std::ostream* log = &std::cout;
};

inline Dataset load_dataset(const ExperimentConfig& c) {
  if (c.data.path.empty()) {
    return synthesize_dataset(c.data.synthetic_rows, c.data.synthetic_noise, c.data.synthetic_seed);
  }
  std::ifstream in(c.data.path);
  if (!in) throw Error("cannot open data file " + c.data.path);
  try {
    return load_csv(in, c.data.columns);
  } catch (const DataError& e) {
    throw DataError(e.code(), c.data.path + ": " + e.what(), e.column(), e.row());
  }
}

struct PreparedSplit {
  Dataset train;
  Dataset test;
};

inline PreparedSplit outer_split(const ExperimentConfig& c) {
  auto [train, test] = stratified_split(load_dataset(c), c.test_fraction, c.seed);
  return {std::move(train), std::move(test)};
}

namespace detail {

inline fs::path prepare_output(const ExperimentConfig& c) {
  fs::path dir(c.output_dir);
  fs::create_directories(dir);
  return dir;
}

inline std::ofstream open_output(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

inline std::string slug(const std::string& model) {
  std::string s;
  for (char ch : model) {
    if (std::isalnum(static_cast<unsigned char>(ch))) s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    else if (!s.empty() && s.back() != '_') s += '_';
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s;
}

inline void write_confusion_files(const fs::path& dir, const eval::EvaluationReport& r, const std::string& stamp) {
  const std::string name = slug(r.model);
  {
    auto out = open_output(dir / ("confusion_" + name + ".csv"));
    out << "# " << stamp << '\n';
    eval::write_confusion_csv(r.cm, out);
  }
  auto out = open_output(dir / ("confusion_" + name + ".pgm"));
  const std::vector<std::string> comments{stamp, "confusion matrix " + r.model + " rows=true cols=predicted"};
  eval::write_confusion_pgm(r.cm, out, comments);
}

inline void write_reports(const fs::path& path, std::span<const eval::EvaluationReport> reports,
                          const std::string& stamp) {
  auto out = open_output(path);
  out << "# " << stamp << '\n';
  eval::write_reports_csv(reports, out);
}

inline std::vector<eval::EvaluationReport> read_reports_if_present(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return {};
  return eval::read_reports_csv(in);
}

}  // namespace detail

inline constexpr const char* kBaselineReportsFile = "baseline_reports.csv";
inline constexpr const char* kTransformerReportFile = "transformer_report.csv";
inline constexpr const char* kTransformerModelName = "PSO-Transformer";

// Builds comparison.csv / comparison.txt from whichever report files exist
// in the output directory. Returns the text table.
inline std::string write_comparison(const ExperimentConfig& c, const std::string& stamp) {
  const fs::path dir = detail::prepare_output(c);
  auto reports = detail::read_reports_if_present(dir / kBaselineReportsFile);
  for (auto& r : detail::read_reports_if_present(dir / kTransformerReportFile)) reports.push_back(std::move(r));
  if (reports.empty()) throw Error("no evaluation reports found in " + dir.string());
  const auto table = eval::comparison_report(std::move(reports));
  {
    auto out = detail::open_output(dir / "comparison.csv");
    out << "# " << stamp << '\n';
    eval::write_comparison_csv(table, out);
  }
  const std::string text = eval::format_comparison_text(table);
  auto out = detail::open_output(dir / "comparison.txt");
  out << "# " << stamp << '\n' << text;
  return text;
}

struct CorrelatePair {
  std::string a;
  std::string b;
  double r = 0.0;
};

// Writes correlation.csv and correlation.pgm; returns the five strongest
// off-diagonal pairs by |r| (ties in matrix order).
inline std::vector<CorrelatePair> run_correlate(const ExperimentConfig& c, const RunOptions& opt = {}) {
  const Dataset d = load_dataset(c);
  const auto m = pearson_matrix(d);
  const fs::path dir = detail::prepare_output(c);
  const std::string stamp = run_stamp(c);
  {
    auto out = detail::open_output(dir / "correlation.csv");
    out << "# " << stamp << '\n';
    write_correlation_csv(m, out);
  }
  {
    std::vector<std::uint8_t> cells;
    for (double v : m.values) cells.push_back(static_cast<std::uint8_t>(std::lround((v + 1.0) / 2.0 * 255.0)));
    std::vector<std::string> comments{stamp, "pearson correlation, black=-1 white=+1, order: " +
                                                 detail::join_list(m.names)};
    auto out = detail::open_output(dir / "correlation.pgm");
    eval::write_pgm_grid(out, m.size(), m.size(), cells, 16, comments);
  }

  std::vector<CorrelatePair> pairs;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = i + 1; j < m.size(); ++j) pairs.push_back({m.names[i], m.names[j], m.at(i, j)});
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& x, const auto& y) { return std::abs(x.r) > std::abs(y.r); });
  if (pairs.size() > 5) pairs.resize(5);
  if (opt.log) {
    *opt.log << "strongest correlations (" << d.n_rows() << " rows):\n";
    for (const auto& p : pairs) *opt.log << "  " << p.a << " ~ " << p.b << ": " << format_fixed(p.r, 4) << '\n';
  }
  return pairs;
}

inline std::vector<eval::EvaluationReport> run_baselines(const ExperimentConfig& c, const RunOptions& opt = {}) {
  const auto split = outer_split(c);
  const std::string digest = config_digest(c);
  const std::string stamp = run_stamp(c);
  const auto& b = c.baselines;
  auto depth = [](std::size_t d) { return d == 0 ? baselines::kUnlimitedDepth : d; };

  std::vector<eval::EvaluationReport> reports;
  const auto tree = baselines::fit_tree(split.train, {depth(b.tree_max_depth), b.tree_min_leaf, 0});
  reports.push_back(eval::evaluate("Decision tree", split.test.targets(), baselines::predict_tree(tree, split.test),
                                   c.seed, digest));

  baselines::ForestParams fp;
  fp.n_trees = b.forest_trees;
  fp.max_depth = depth(b.forest_max_depth);
  fp.min_leaf = b.forest_min_leaf;
  fp.m_try = b.forest_mtry;
  fp.seed = derive_seed(c.seed, stream_tag("forest"));
  const auto forest = baselines::fit_forest(split.train, fp, opt.threads);
  reports.push_back(eval::evaluate("Random forest", split.test.targets(), baselines::predict_forest(forest, split.test),
                                   c.seed, digest));

  baselines::BoostedParams bp;
  bp.n_rounds = b.boost_rounds;
  bp.max_depth = depth(b.boost_max_depth);
  bp.learning_rate = b.boost_learning_rate;
  bp.seed = derive_seed(c.seed, stream_tag("boosting"));
  const auto boosted = baselines::fit_boosted(split.train, bp);
  reports.push_back(eval::evaluate("Gradient boosting", split.test.targets(),
                                   baselines::predict_boosted(boosted, split.test), c.seed, digest));

  const fs::path dir = detail::prepare_output(c);
  for (const auto& r : reports) detail::write_confusion_files(dir, r, stamp);
  detail::write_reports(dir / kBaselineReportsFile, reports, stamp);
  const std::string table = write_comparison(c, stamp);
  if (opt.log) *opt.log << table;
  return reports;
}

struct SearchRun {
  search::SearchResult result;
  eval::EvaluationReport test_report;
};

// The outer training split is standardized (scaler fit on it alone), then a
// stratified holdout_fraction slice of it becomes the validation set that
// scores particles. The final model is evaluated on the untouched test split.
inline SearchRun run_search(const ExperimentConfig& c, const RunOptions& opt = {}) {
  auto split = outer_split(c);
  const Scaler scaler = fit_scaler(split.train);
  const Dataset train = apply_scaler(scaler, split.train);
  const Dataset test = apply_scaler(scaler, split.test);
  auto [fit, val] = stratified_split(train, c.holdout_fraction, derive_seed(c.seed, stream_tag("holdout")));

  const fs::path dir = detail::prepare_output(c);
  const std::string stamp = run_stamp(c);
  const std::string digest = config_digest(c);

  search::HyperSearchSpec spec = c.search;
  spec.seed = derive_seed(c.seed, stream_tag("search"));
  spec.threads = opt.threads;

  auto log_out = detail::open_output(dir / "search_log.csv");
  log_out << "# " << stamp << '\n' << search::kSearchLogHeader << '\n';
  log_out.flush();
  search::SearchHooks hooks;
  hooks.on_iteration = [&](std::size_t iteration, std::span<const search::EvaluationRecord> records) {
    search::write_search_log_rows(records, log_out, c.record_wall_time);
    log_out.flush();
    auto progress = detail::open_output(dir / "search_progress.txt");
    progress << "# " << stamp << '\n'
             << "last_completed_iteration=" << iteration << '\n'
             << "total_iterations=" << spec.swarm.max_iters << '\n';
    if (opt.log) {
      double best = 0.0;
      for (const auto& r : records) best = std::max(best, r.accuracy);
      *opt.log << "iteration " << iteration << "/" << spec.swarm.max_iters
               << ": best validation accuracy this round " << format_fixed(best, 4) << '\n';
    }
  };

  auto outcome = search::search(spec, fit, val, hooks);
  log_out.close();
  const auto& best = outcome.result.best_config;

  {
    auto out = detail::open_output(dir / "convergence.csv");
    out << "# " << stamp << '\n';
    pso::write_history_csv(outcome.result.optimization, spec.space(), out);
  }
  {
    auto out = detail::open_output(dir / "model.bin", true);
    transformer::save_model(out, best, outcome.final_params, stamp);
  }
  {
    ExperimentConfig reusable = c;
    reusable.transformer = FixedModel{best, "model.bin"};
    auto out = detail::open_output(dir / "best_config.ini");
    out << "# " << stamp << '\n' << "# best validation accuracy " << format_double(outcome.result.best_accuracy)
        << "\n# model path is relative to the run directory; pass it with --out\n\n"
        << to_ini(reusable, false);
  }

  const auto pred = transformer::predict(outcome.final_params, best, test);
  auto report = eval::evaluate(kTransformerModelName, test.targets(), pred.labels, c.seed, digest);
  detail::write_confusion_files(dir, report, stamp);
  const std::vector<eval::EvaluationReport> reports{report};
  detail::write_reports(dir / kTransformerReportFile, reports, stamp);
  const std::string table = write_comparison(c, stamp);
  if (opt.log) {
    *opt.log << "best config: lr=" << format_double(best.learning_rate) << " layers=" << best.n_layers
             << " d_model=" << best.d_model << " heads=" << best.n_heads << " d_ff=" << best.d_ff << '\n'
             << table;
  }
  return {std::move(outcome.result), std::move(report)};
}

// Re-evaluates the model named in [transformer] (if any) on the test split,
// then rebuilds the comparison table from the report files present.
inline std::string run_report(const ExperimentConfig& c, const RunOptions& opt = {}) {
  const fs::path dir = detail::prepare_output(c);
  const std::string stamp = run_stamp(c);
  if (c.transformer) {
    auto split = outer_split(c);
    const Scaler scaler = fit_scaler(split.train);
    const Dataset test = apply_scaler(scaler, split.test);
    fs::path model_path(c.transformer->model_path);
    if (model_path.is_relative()) model_path = dir / model_path;
    std::ifstream in(model_path, std::ios::binary);
    if (!in) throw Error("cannot open model file " + model_path.string());
    auto loaded = transformer::load_model(in);
    if (loaded.config.n_features != test.n_features()) throw Error("model feature count does not match data");
    const auto pred = transformer::predict(loaded.params, loaded.config, test);
    auto report = eval::evaluate(kTransformerModelName, test.targets(), pred.labels, c.seed, config_digest(c));
    detail::write_confusion_files(dir, report, stamp);
    const std::vector<eval::EvaluationReport> reports{report};
    detail::write_reports(dir / kTransformerReportFile, reports, stamp);
  }
  const std::string table = write_comparison(c, stamp);
  if (opt.log) *opt.log << table;
  return table;
}

}  // namespace psoformer::experiment

#endif  // PSOFORMER_EXPERIMENT_HPP_
