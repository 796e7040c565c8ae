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

// Global-best particle swarm optimizer over bounded mixed continuous/integer
// spaces. Particles live in the unit hypercube; decode_position maps a
// coordinate vector to named values in the caller's units. The optimizer
// minimizes.

#ifndef PSOFORMER_PSO_HPP_
#define PSOFORMER_PSO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "psoformer/core.hpp"

namespace psoformer::pso {

enum class DimensionKind { kContinuous, kInteger };

struct Dimension {
  std::string name;
  DimensionKind kind = DimensionKind::kContinuous;
  double lower = 0.0;
  double upper = 1.0;
  bool log_scale = false;
};

class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<Dimension> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw std::invalid_argument("search space needs at least one dimension");
    for (const auto& d : dims_) {
      if (!(d.lower < d.upper)) {
        throw std::invalid_argument("dimension " + d.name + ": lower bound must be below upper bound");
      }
      if (d.log_scale && !(d.lower > 0.0)) {
        throw std::invalid_argument("dimension " + d.name + ": log scale requires a positive lower bound");
      }
    }
  }

  std::size_t size() const { return dims_.size(); }
  const std::vector<Dimension>& dims() const { return dims_; }
  const Dimension& operator[](std::size_t i) const { return dims_[i]; }

 private:
  std::vector<Dimension> dims_;
};

struct SwarmConfig {
  std::size_t n_particles = 30;
  std::size_t max_iters = 100;
  double w_start = 0.9;
  double w_end = 0.4;
  double c1 = 2.0;
  double c2 = 2.0;
  double vmax_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_particles < 1) throw std::invalid_argument("n_particles must be >= 1");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(w_end > 0.0 && w_end <= w_start)) throw std::invalid_argument("need 0 < w_end <= w_start");
    if (!(c1 >= 0.0 && c2 >= 0.0)) throw std::invalid_argument("c1 and c2 must be >= 0");
    if (!(vmax_fraction > 0.0 && vmax_fraction <= 1.0)) {
      throw std::invalid_argument("vmax_fraction must lie in (0, 1]");
    }
  }

  // Linearly decaying inertia; constant w_start when there is one iteration.
  double inertia(std::size_t iter) const {
    if (max_iters <= 1) return w_start;
    return w_start - (w_start - w_end) * static_cast<double>(iter) / static_cast<double>(max_iters - 1);
  }
};

struct Particle {
  std::vector<double> position;
  std::vector<double> velocity;
  std::vector<double> pbest_position;
  double pbest_fitness = std::numeric_limits<double>::infinity();
};

struct Swarm {
  std::vector<Particle> particles;
  std::vector<double> gbest_position;
  double gbest_fitness = std::numeric_limits<double>::infinity();
  std::size_t gbest_particle = 0;
  std::size_t evaluations = 0;
  Rng rng;
};

// Identifies one objective call. Iteration 0 is the evaluation of the
// initial positions; step k (0-based) evaluates iteration k + 1.
struct EvalContext {
  std::size_t iteration = 0;
  std::size_t particle = 0;
};

class ObjectiveFailure : public Error {
 public:
  ObjectiveFailure(std::size_t iteration, std::size_t particle, const std::string& what)
      : Error("objective failed at iteration " + std::to_string(iteration) + ", particle " +
              std::to_string(particle) + ": " + what),
        iteration_(iteration),
        particle_(particle) {}

  std::size_t iteration() const { return iteration_; }
  std::size_t particle() const { return particle_; }
  // gbest fitness after every completed iteration before the failure.
  const std::vector<double>& partial_history() const { return partial_history_; }
  void set_partial_history(std::vector<double> h) { partial_history_ = std::move(h); }

 private:
  std::size_t iteration_;
  std::size_t particle_;
  std::vector<double> partial_history_;
};

// Decoded point: one value per dimension, in space order.
struct DecodedPoint {
  std::vector<std::string> names;
  std::vector<double> values;

  double at(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return values[i];
    }
    throw std::out_of_range("no dimension named " + std::string(name));
  }
};

inline double decode_coordinate(double u, const Dimension& d) {
  u = std::clamp(u, 0.0, 1.0);
  double v = d.log_scale ? std::exp(std::log(d.lower) + u * (std::log(d.upper) - std::log(d.lower)))
                         : d.lower + u * (d.upper - d.lower);
  if (d.kind == DimensionKind::kInteger) v = std::floor(v + 0.5);
  return std::clamp(v, d.lower, d.upper);
}

inline DecodedPoint decode_position(std::span<const double> p, const SearchSpace& space) {
  if (p.size() != space.size()) throw std::invalid_argument("position dimension mismatch");
  DecodedPoint out;
  for (std::size_t i = 0; i < space.size(); ++i) {
    out.names.push_back(space[i].name);
    out.values.push_back(decode_coordinate(p[i], space[i]));
  }
  return out;
}

inline Swarm initialize_swarm(const SearchSpace& space, const SwarmConfig& cfg) {
  cfg.validate();
  Swarm s;
  s.rng = Rng(derive_seed(cfg.seed, stream_tag("swarm")));
  const std::size_t dim = space.size();
  const double vmax = cfg.vmax_fraction;
  s.particles.resize(cfg.n_particles);
  for (auto& p : s.particles) {
    p.position.resize(dim);
    p.velocity.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) p.position[d] = s.rng.uniform();
    for (std::size_t d = 0; d < dim; ++d) p.velocity[d] = s.rng.uniform(-vmax, vmax);
    p.pbest_position = p.position;
  }
  s.gbest_position = s.particles.front().position;
  return s;
}

namespace detail {

template <typename Objective>
double call_objective(Objective& f, std::span<const double> x, const EvalContext& ctx) {
  if constexpr (std::is_invocable_r_v<double, Objective&, std::span<const double>, const EvalContext&>) {
    return f(x, ctx);
  } else {
    return f(x);
  }
}

}  // namespace detail

// Evaluates every particle at its current position (possibly in parallel),
// then folds results into pbest/gbest serially in particle order. Strict
// improvement is required; NaN never improves.
template <typename Objective>
std::vector<double> evaluate_swarm(Swarm& swarm, Objective& objective, std::size_t iteration,
                                   std::size_t threads = 1) {
  const std::size_t n = swarm.particles.size();
  std::vector<double> fitness(n);
  try {
    parallel_for(n, threads, [&](std::size_t i) {
      try {
        fitness[i] = detail::call_objective(objective, swarm.particles[i].position,
                                            EvalContext{iteration, i});
      } catch (const ObjectiveFailure&) {
        throw;
      } catch (const std::exception& e) {
        throw ObjectiveFailure(iteration, i, e.what());
      }
    });
  } catch (...) {
    swarm.evaluations += n;
    throw;
  }
  swarm.evaluations += n;
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = swarm.particles[i];
    if (fitness[i] < p.pbest_fitness) {
      p.pbest_fitness = fitness[i];
      p.pbest_position = p.position;
    }
    if (fitness[i] < swarm.gbest_fitness) {
      swarm.gbest_fitness = fitness[i];
      swarm.gbest_position = p.position;
      swarm.gbest_particle = i;
    }
  }
  return fitness;
}

// Moves every particle once:
//   v <- w(iter) v + c1 r1 (pbest - x) + c2 r2 (gbest - x), clamped to +-vmax
//   x <- x + v, clamped to [0, 1]
// with r1, r2 drawn per coordinate. Random draws are consumed serially in
// particle order before any evaluation.
inline void move_swarm(Swarm& swarm, std::size_t iter_index, const SwarmConfig& cfg) {
  const double w = cfg.inertia(iter_index);
  const double vmax = cfg.vmax_fraction;
  for (auto& p : swarm.particles) {
    for (std::size_t d = 0; d < p.position.size(); ++d) {
      const double r1 = swarm.rng.uniform();
      const double r2 = swarm.rng.uniform();
      double v = w * p.velocity[d] + cfg.c1 * r1 * (p.pbest_position[d] - p.position[d]) +
                 cfg.c2 * r2 * (swarm.gbest_position[d] - p.position[d]);
      v = std::clamp(v, -vmax, vmax);
      p.velocity[d] = v;
      p.position[d] = std::clamp(p.position[d] + v, 0.0, 1.0);
    }
  }
}

template <typename Objective>
std::vector<double> step(Swarm& swarm, Objective& objective, std::size_t iter_index,
                         const SwarmConfig& cfg, std::size_t threads = 1) {
  if (iter_index >= cfg.max_iters) throw std::invalid_argument("iteration index out of range");
  move_swarm(swarm, iter_index, cfg);
  return evaluate_swarm(swarm, objective, iter_index + 1, threads);
}

struct OptimizationResult {
  std::vector<double> gbest_position;
  DecodedPoint gbest_decoded;
  double gbest_fitness = std::numeric_limits<double>::infinity();
  // Entry k is gbest fitness after evaluation round k (0 = initial swarm).
  std::vector<double> history;
  std::vector<std::vector<double>> history_positions;
  std::size_t evaluations = 0;
};

struct OptimizeOptions {
  std::size_t threads = 1;
  // Called after each evaluation round with the round index and the fitness
  // of every particle in that round.
  std::function<void(std::size_t, const Swarm&, std::span<const double>)> on_iteration;
};

template <typename Objective>
OptimizationResult optimize(const SearchSpace& space, Objective objective, const SwarmConfig& cfg,
                            const OptimizeOptions& options = {}) {
  Swarm swarm = initialize_swarm(space, cfg);
  OptimizationResult result;
  auto record = [&](std::size_t round, const std::vector<double>& fitness) {
    result.history.push_back(swarm.gbest_fitness);
    result.history_positions.push_back(swarm.gbest_position);
    if (options.on_iteration) options.on_iteration(round, swarm, fitness);
  };
  try {
    record(0, evaluate_swarm(swarm, objective, 0, options.threads));
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
      record(it + 1, step(swarm, objective, it, cfg, options.threads));
    }
  } catch (ObjectiveFailure& e) {
    e.set_partial_history(result.history);
    throw;
  }
  result.gbest_position = swarm.gbest_position;
  result.gbest_decoded = decode_position(swarm.gbest_position, space);
  result.gbest_fitness = swarm.gbest_fitness;
  result.evaluations = swarm.evaluations;
  return result;
}

// CSV with columns iteration, gbest_fitness, then one decoded column per
// dimension.
inline void write_history_csv(const OptimizationResult& r, const SearchSpace& space, std::ostream& out) {
  out << "iteration,gbest_fitness";
  for (const auto& d : space.dims()) out << ',' << d.name;
  out << '\n';
  for (std::size_t k = 0; k < r.history.size(); ++k) {
    out << k << ',' << format_double(r.history[k]);
    const auto decoded = decode_position(r.history_positions[k], space);
    for (double v : decoded.values) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace psoformer::pso

#endif  // PSOFORMER_PSO_HPP_
