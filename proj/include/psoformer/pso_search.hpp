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

// Particle swarm search over Transformer hyperparameters.
//
// A particle position encodes (learning rate, layer count, d_model menu
// index, head-count menu index). Its fitness is the negated validation
// accuracy of a Transformer trained for a reduced epoch budget with a seed
// derived from (search seed, iteration, particle). The best position is then
// retrained for the full epoch budget.

#ifndef PSOFORMER_PSO_SEARCH_HPP_
#define PSOFORMER_PSO_SEARCH_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "psoformer/core.hpp"
#include "psoformer/data.hpp"
#include "psoformer/pso.hpp"
#include "psoformer/transformer.hpp"

namespace psoformer::search {

using transformer::TransformerConfig;

struct HyperSearchSpec {
  double lr_min = 1e-4;
  double lr_max = 1e-1;
  std::size_t layers_min = 1;
  std::size_t layers_max = 4;
  std::vector<std::size_t> d_model_menu{16, 32, 64, 128, 256, 512};
  std::vector<std::size_t> heads_menu{1, 2, 4, 8};
  std::size_t ff_multiplier = 4;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::size_t fitness_epochs = 10;
  pso::SwarmConfig swarm;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const {
    swarm.validate();
    if (!(lr_min > 0.0 && lr_min < lr_max)) throw std::invalid_argument("need 0 < lr_min < lr_max");
    if (!(layers_min >= 1 && layers_min <= layers_max)) {
      throw std::invalid_argument("need 1 <= layers_min <= layers_max");
    }
    if (d_model_menu.empty() || heads_menu.empty()) throw std::invalid_argument("menus must be non-empty");
    for (std::size_t v : d_model_menu) {
      if (v == 0) throw std::invalid_argument("d_model menu entries must be positive");
    }
    if (!std::is_sorted(heads_menu.begin(), heads_menu.end()) || heads_menu.front() < 1) {
      throw std::invalid_argument("heads menu must be ascending positive counts");
    }
    // Repair must always find a head count; 1 divides everything.
    if (heads_menu.front() != 1) throw std::invalid_argument("heads menu must contain 1");
    if (ff_multiplier < 1 || batch_size < 1 || epochs < 1 || fitness_epochs < 1) {
      throw std::invalid_argument("ff_multiplier, batch_size, epochs and fitness_epochs must be >= 1");
    }
  }

  // Integer layer bounds are widened by 0.5 only when they coincide, so the
  // space stays non-degenerate; menu indices are integer dims over [0, size-1].
  pso::SearchSpace space() const {
    using pso::DimensionKind;
    auto int_dim = [](std::string name, double lo, double hi) {
      return pso::Dimension{std::move(name), DimensionKind::kInteger, lo, hi == lo ? lo + 0.5 : hi, false};
    };
    return pso::SearchSpace({
        {"learning_rate", DimensionKind::kContinuous, lr_min, lr_max, true},
        int_dim("n_layers", static_cast<double>(layers_min), static_cast<double>(layers_max)),
        int_dim("d_model_index", 0.0, static_cast<double>(d_model_menu.size() - 1)),
        int_dim("n_heads_index", 0.0, static_cast<double>(heads_menu.size() - 1)),
    });
  }
};

// Largest menu value that divides d_model and does not exceed `requested`.
inline std::size_t repair_heads(std::size_t d_model, std::size_t requested, std::span<const std::size_t> menu) {
  std::size_t best = 1;
  for (std::size_t h : menu) {
    if (h <= requested && d_model % h == 0) best = std::max(best, h);
  }
  return best;
}

inline TransformerConfig decode_config(std::span<const double> position, const HyperSearchSpec& spec,
                                       std::size_t n_features) {
  const auto p = pso::decode_position(position, spec.space());
  TransformerConfig cfg;
  cfg.n_features = n_features;
  cfg.learning_rate = p.at("learning_rate");
  cfg.n_layers = static_cast<std::size_t>(std::min(p.at("n_layers"), static_cast<double>(spec.layers_max)));
  cfg.d_model = spec.d_model_menu[static_cast<std::size_t>(p.at("d_model_index"))];
  const std::size_t requested = spec.heads_menu[static_cast<std::size_t>(p.at("n_heads_index"))];
  cfg.n_heads = repair_heads(cfg.d_model, requested, spec.heads_menu);
  cfg.d_ff = spec.ff_multiplier * cfg.d_model;
  cfg.batch_size = spec.batch_size;
  cfg.epochs = spec.fitness_epochs;
  return cfg;
}

inline std::uint64_t particle_seed(std::uint64_t search_seed, std::size_t iteration, std::size_t particle) {
  return derive_seed(search_seed, stream_tag("fitness"), iteration, particle);
}

inline std::uint64_t final_seed(std::uint64_t search_seed) {
  return derive_seed(search_seed, stream_tag("final_retrain"));
}

struct EvaluationRecord {
  std::size_t iteration = 0;
  std::size_t particle = 0;
  std::vector<double> position;
  TransformerConfig config;
  double accuracy = 0.0;  // validation accuracy; 0 when training failed
  double fitness = 0.0;   // -accuracy
  bool failed = false;
  std::string failure;
  double seconds = 0.0;
};

// Replaceable training entry points; defaults train real Transformers.
struct SearchHooks {
  // Validation accuracy of `cfg` trained on `train`.
  std::function<double(const TransformerConfig&, const Dataset& train, const Dataset& val)> evaluate;
  std::function<transformer::TrainResult(const TransformerConfig&, const Dataset& train, const Dataset& val)>
      retrain;
  // Called after each evaluation round with that round's records.
  std::function<void(std::size_t iteration, std::span<const EvaluationRecord>)> on_iteration;
};

inline double default_evaluate(const TransformerConfig& cfg, const Dataset& train, const Dataset& val) {
  const auto trained = transformer::train(cfg, train, val);
  const auto pred = transformer::predict(trained.params, cfg, val);
  return transformer::accuracy(val.targets(), pred.labels);
}

// Trains the decoded configuration and scores it. Failed trainings (divergence
// or any other error) score accuracy 0 and are reported in the record rather
// than thrown.
inline EvaluationRecord evaluate_particle(std::span<const double> position, const HyperSearchSpec& spec,
                                          const Dataset& train, const Dataset& val, pso::EvalContext ctx,
                                          const SearchHooks& hooks = {}) {
  EvaluationRecord rec;
  rec.iteration = ctx.iteration;
  rec.particle = ctx.particle;
  rec.position.assign(position.begin(), position.end());
  rec.config = decode_config(position, spec, train.n_features());
  rec.config.seed = particle_seed(spec.seed, ctx.iteration, ctx.particle);
  const auto started = std::chrono::steady_clock::now();
  try {
    rec.accuracy = hooks.evaluate ? hooks.evaluate(rec.config, train, val) : default_evaluate(rec.config, train, val);
    if (!std::isfinite(rec.accuracy)) throw transformer::NonFiniteLoss("fitness is not finite");
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.failure = e.what();
    rec.accuracy = 0.0;
  }
  rec.fitness = 0.0 - rec.accuracy;
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

inline double fitness(std::span<const double> position, const HyperSearchSpec& spec, const Dataset& train,
                      const Dataset& val, pso::EvalContext ctx = {}, const SearchHooks& hooks = {}) {
  return evaluate_particle(position, spec, train, val, ctx, hooks).fitness;
}

struct SearchResult {
  TransformerConfig best_config;  // full-epoch configuration used for the retrain
  double best_accuracy = 0.0;     // best validation accuracy seen during the search
  pso::OptimizationResult optimization;
  std::vector<EvaluationRecord> log;  // iteration-major, particle-minor
  std::size_t fitness_trainings = 0;
};

struct SearchOutcome {
  SearchResult result;
  transformer::ModelParams final_params;
  transformer::TrainReport final_report;
};

inline SearchOutcome search(const HyperSearchSpec& spec, const Dataset& train, const Dataset& val,
                            const SearchHooks& hooks = {}) {
  spec.validate();
  if (train.empty() || val.empty()) throw DataError(DataErrc::kEmptyDataset, "search needs train and val rows");
  const auto space = spec.space();
  pso::SwarmConfig swarm = spec.swarm;
  swarm.seed = derive_seed(spec.seed, stream_tag("swarm"));

  const std::size_t n = swarm.n_particles;
  std::vector<EvaluationRecord> log(n * (swarm.max_iters + 1));
  auto objective = [&](std::span<const double> x, const pso::EvalContext& ctx) {
    auto& slot = log[ctx.iteration * n + ctx.particle];
    slot = evaluate_particle(x, spec, train, val, ctx, hooks);
    return slot.fitness;
  };
  pso::OptimizeOptions options;
  options.threads = spec.threads;
  options.on_iteration = [&](std::size_t round, const pso::Swarm&, std::span<const double>) {
    if (hooks.on_iteration) hooks.on_iteration(round, std::span<const EvaluationRecord>(log).subspan(round * n, n));
  };

  SearchOutcome out;
  SearchResult& r = out.result;
  r.optimization = pso::optimize(space, objective, swarm, options);
  r.log = std::move(log);
  r.fitness_trainings = r.optimization.evaluations;
  r.best_accuracy = 0.0 - r.optimization.gbest_fitness;
  r.best_config = decode_config(r.optimization.gbest_position, spec, train.n_features());
  r.best_config.epochs = spec.epochs;
  r.best_config.seed = final_seed(spec.seed);

  auto trained = hooks.retrain ? hooks.retrain(r.best_config, train, val) : transformer::train(r.best_config, train, val);
  out.final_params = std::move(trained.params);
  out.final_report = std::move(trained.report);
  return out;
}

inline constexpr const char* kSearchLogHeader = "iteration,particle,lr,n_layers,d_model,n_heads,fitness,seconds";

// One line per evaluation. `with_seconds` false leaves the seconds column
// empty so logs from identical runs compare byte for byte.
inline void write_search_log_rows(std::span<const EvaluationRecord> records, std::ostream& out, bool with_seconds) {
  for (const auto& rec : records) {
    out << rec.iteration << ',' << rec.particle << ',' << format_double(rec.config.learning_rate) << ','
        << rec.config.n_layers << ',' << rec.config.d_model << ',' << rec.config.n_heads << ','
        << format_double(rec.fitness) << ',';
    if (with_seconds) out << format_fixed(rec.seconds, 3);
    out << '\n';
  }
}

}  // namespace psoformer::search

#endif  // PSOFORMER_PSO_SEARCH_HPP_
