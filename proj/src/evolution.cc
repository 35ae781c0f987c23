// Copyright 2026 The PatchMix Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "patchmix/evolution.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "patchmix/error.h"
#include "patchmix/mixing.h"

namespace patchmix {

namespace {

std::vector<std::size_t> forced_slots(const SearchConfig& cfg, const ClassPairIndex& pairs) {
  std::vector<std::size_t> out;
  if (!cfg.force_same_class) return out;
  for (std::size_t c = 0; c < pairs.classes(); ++c) out.push_back(pairs.index_of(c, c));
  return out;
}

bool is_forced(const SearchConfig& cfg, const ClassPairIndex& pairs, std::size_t k) {
  return cfg.force_same_class && pairs.is_same_class(k);
}

// Uniform sample of `count` distinct elements of `from`, in draw order.
std::vector<std::size_t> sample_without_replacement(std::span<const std::size_t> from,
                                                    std::size_t count, SeededRng& rng) {
  std::vector<std::size_t> pool(from.begin(), from.end());
  count = std::min(count, pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  }
  pool.resize(count);
  return pool;
}

void check_genome(const Individual& ind, std::size_t classes) {
  const ClassPairIndex pairs(classes);
  if (ind.head.size() != pairs.pair_count() || ind.masks.size() != pairs.pair_count()) {
    throw ConfigError("individual does not match " + std::to_string(classes) + " classes");
  }
}

double score_of(const Individual& ind) {
  return ind.fitness.value_or(std::numeric_limits<double>::infinity());
}

}  // namespace

ClassPairIndex::ClassPairIndex(std::size_t classes) : classes_(classes) {
  for (std::size_t i = 0; i < classes; ++i) {
    for (std::size_t j = i; j < classes; ++j) pairs_.emplace_back(i, j);
  }
}

std::size_t ClassPairIndex::index_of(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  if (j >= classes_) throw ConfigError("class pair out of range");
  // Rows 0..i-1 hold C, C-1, ..., C-i+1 entries.
  return i * classes_ - i * (i - 1) / 2 + (j - i);
}

std::pair<std::size_t, std::size_t> ClassPairIndex::pair_at(std::size_t k) const {
  return pairs_.at(k);
}

bool ClassPairIndex::is_same_class(std::size_t k) const {
  const auto& p = pairs_.at(k);
  return p.first == p.second;
}

std::string to_string(Objective o) {
  switch (o) {
    case Objective::kMinPatchAcc:
      return "min_patch_acc";
    case Objective::kMaxPatchAcc:
      return "max_patch_acc";
    case Objective::kMinPatchLoss:
      return "min_LP";
    case Objective::kMaxPatchLoss:
      return "max_LP";
  }
  return "min_patch_acc";
}

Objective parse_objective(const std::string& text) {
  if (text == "min_patch_acc") return Objective::kMinPatchAcc;
  if (text == "max_patch_acc") return Objective::kMaxPatchAcc;
  if (text == "min_LP") return Objective::kMinPatchLoss;
  if (text == "max_LP") return Objective::kMaxPatchLoss;
  throw ConfigError("unknown objective '" + text +
                    "' (expected min_patch_acc, max_patch_acc, min_LP, max_LP)");
}

void SearchConfig::validate(std::size_t classes) const {
  if (population_size == 0) throw ConfigError("search.population_size must be >= 1");
  if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0)) {
    throw ConfigError("search.crossover_prob must be in [0,1]");
  }
  if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) {
    throw ConfigError("search.mutation_prob must be in [0,1]");
  }
  if (tournament_size < 2) throw ConfigError("search.tournament_size must be >= 2");
  if (pairs_per_combo == 0) throw ConfigError("search.pairs_per_combo must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction <= 1.0)) {
    throw ConfigError("search.val_fraction must be in (0,1]");
  }
  if (classes == 0) throw ConfigError("search needs at least one class");
  const std::size_t pair_count = classes * (classes + 1) / 2;
  const std::size_t n = active_limit(classes);
  if (n > pair_count) {
    throw ConfigError("search.N = " + std::to_string(n) + " exceeds the " +
                      std::to_string(pair_count) + " class pairs");
  }
  if (force_same_class && n < classes) {
    throw ConfigError("search.N = " + std::to_string(n) + " cannot hold the " +
                      std::to_string(classes) + " forced same-class pairs");
  }
}

std::size_t Individual::active_count() const {
  return static_cast<std::size_t>(std::count(head.begin(), head.end(), 1));
}

std::vector<std::size_t> Individual::active_slots() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < head.size(); ++k) {
    if (head[k]) out.push_back(k);
  }
  return out;
}

std::vector<Individual> init_population(const SearchConfig& cfg, std::size_t classes,
                                        std::size_t grid_size, SeededRng& rng) {
  cfg.validate(classes);
  if (grid_size == 0) throw ConfigError("grid size must be >= 1");
  const ClassPairIndex pairs(classes);
  const auto forced = forced_slots(cfg, pairs);
  std::vector<std::size_t> free_slots;
  for (std::size_t k = 0; k < pairs.pair_count(); ++k) {
    if (!is_forced(cfg, pairs, k)) free_slots.push_back(k);
  }
  const std::size_t n_random = cfg.active_limit(classes) - forced.size();

  std::vector<Individual> pop(cfg.population_size);
  for (Individual& ind : pop) {
    ind.head.assign(pairs.pair_count(), 0);
    for (std::size_t k : sample_without_replacement(free_slots, n_random, rng)) ind.head[k] = 1;
    for (std::size_t k : forced) ind.head[k] = 1;
    ind.masks.reserve(pairs.pair_count());
    for (std::size_t k = 0; k < pairs.pair_count(); ++k) {
      PatchMask m(grid_size);
      for (std::size_t n = 0; n < m.cell_count(); ++n) m.set(n, rng.below(2) == 1);
      ind.masks.push_back(std::move(m));
    }
  }
  return pop;
}

void repair(Individual& ind, const SearchConfig& cfg, std::size_t classes, SeededRng& rng) {
  check_genome(ind, classes);
  const ClassPairIndex pairs(classes);
  const std::size_t before = ind.active_count();
  for (std::size_t k : forced_slots(cfg, pairs)) ind.head[k] = 1;
  const std::size_t limit = cfg.active_limit(classes);
  std::vector<std::size_t> removable;
  for (std::size_t k : ind.active_slots()) {
    if (!is_forced(cfg, pairs, k)) removable.push_back(k);
  }
  std::size_t active = ind.active_count();
  while (active > limit && !removable.empty()) {
    const std::size_t pick = rng.below(removable.size());
    ind.head[removable[pick]] = 0;
    removable.erase(removable.begin() + static_cast<std::ptrdiff_t>(pick));
    --active;
  }
  if (ind.active_count() != before) ind.fitness.reset();
}

std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b,
                                            const SearchConfig& cfg, std::size_t classes,
                                            SeededRng& rng) {
  check_genome(a, classes);
  check_genome(b, classes);
  std::pair<Individual, Individual> kids{a, b};
  auto& [c1, c2] = kids;
  const std::size_t slots = a.head.size();
  for (std::size_t k = 0; k < slots; ++k) {
    const PatchMask& ma = a.masks[k];
    const PatchMask& mb = b.masks[k];
    if (ma.grid_size() != mb.grid_size()) throw ConfigError("parents differ in grid size");
    const std::size_t p = ma.grid_size();
    const std::size_t split = p / 2;
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t c = 0; c < p; ++c) {
        const bool left = c < split;
        c1.masks[k].set(r, c, left ? ma.at(r, c) : mb.at(r, c));
        c2.masks[k].set(r, c, left ? mb.at(r, c) : ma.at(r, c));
      }
    }
  }
  const std::size_t cut = rng.below(slots + 1);
  for (std::size_t k = 0; k < slots; ++k) {
    c1.head[k] = k < cut ? a.head[k] : b.head[k];
    c2.head[k] = k < cut ? b.head[k] : a.head[k];
  }
  c1.fitness.reset();
  c2.fitness.reset();
  repair(c1, cfg, classes, rng);
  repair(c2, cfg, classes, rng);
  return kids;
}

void apply_mutation(Individual& ind, MutationOp op, const SearchConfig& cfg, std::size_t classes,
                    SeededRng& rng) {
  check_genome(ind, classes);
  const ClassPairIndex pairs(classes);
  switch (op) {
    case MutationOp::kFlipTails:
      for (std::size_t k : ind.active_slots()) ind.masks[k] = ind.masks[k].complement();
      break;
    case MutationOp::kTranspose:
      for (std::size_t k : ind.active_slots()) ind.masks[k] = ind.masks[k].transposed();
      break;
    case MutationOp::kFlipHeads: {
      std::vector<std::size_t> free_slots;
      std::size_t active_free = 0;
      for (std::size_t k = 0; k < ind.head.size(); ++k) {
        if (is_forced(cfg, pairs, k)) continue;
        free_slots.push_back(k);
        active_free += ind.head[k];
        ind.head[k] = 0;
      }
      for (std::size_t k : sample_without_replacement(free_slots, active_free, rng)) {
        ind.head[k] = 1;
      }
      break;
    }
    case MutationOp::kRandomTails:
      for (std::size_t k : ind.active_slots()) {
        PatchMask& m = ind.masks[k];
        for (std::size_t n = 0; n < m.cell_count(); ++n) {
          if (rng.bernoulli(kRandomTailsFlipProb)) m.set(n, m[n] == 0);
        }
      }
      break;
  }
  ind.fitness.reset();
  repair(ind, cfg, classes, rng);
}

MutationOp mutate(Individual& ind, const SearchConfig& cfg, std::size_t classes, SeededRng& rng) {
  const auto op = static_cast<MutationOp>(rng.below(4));
  apply_mutation(ind, op, cfg, classes, rng);
  return op;
}

std::size_t tournament_select(std::span<const Individual> population, std::size_t k,
                              SeededRng& rng) {
  if (population.empty()) throw ConfigError("tournament over an empty population");
  if (k == 0) throw ConfigError("tournament size must be >= 1");
  std::size_t best = rng.below(population.size());
  for (std::size_t t = 1; t < k; ++t) {
    const std::size_t cand = rng.below(population.size());
    if (score_of(population[cand]) < score_of(population[best])) best = cand;
  }
  return best;
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::exception_ptr> errors(n);
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
            failed = true;
          }
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

void evaluate_invalid(std::vector<Individual>& pop, const FitnessFn& fitness,
                      std::size_t generation, std::size_t threads) {
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (!pop[i].fitness) todo.push_back(i);
  }
  std::vector<double> scores(todo.size());
  parallel_for(todo.size(), threads, [&](std::size_t t) {
    const std::size_t i = todo[t];
    try {
      scores[t] = fitness(pop[i], generation);
    } catch (const std::exception& e) {
      throw std::runtime_error("fitness evaluation failed at generation " +
                               std::to_string(generation) + ", individual " + std::to_string(i) +
                               ": " + e.what());
    }
  });
  for (std::size_t t = 0; t < todo.size(); ++t) pop[todo[t]].fitness = scores[t];
}

std::size_t best_index(const std::vector<Individual>& pop) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pop.size(); ++i) {
    if (score_of(pop[i]) < score_of(pop[best])) best = i;
  }
  return best;
}

GenerationRecord make_record(std::size_t generation, const Individual& hof,
                             const std::vector<Individual>& pop) {
  GenerationRecord rec;
  rec.generation = generation;
  rec.best = score_of(hof);
  double sum = 0.0;
  std::size_t finite = 0;
  rec.census.assign(hof.head.size(), 0);
  for (const Individual& ind : pop) {
    const double s = score_of(ind);
    if (std::isfinite(s)) {
      sum += s;
      ++finite;
    }
    for (std::size_t k = 0; k < ind.head.size(); ++k) rec.census[k] += ind.head[k];
  }
  rec.mean = finite ? sum / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
  rec.best_active_pairs = hof.active_slots();
  return rec;
}

}  // namespace

SearchResult run_search(const SearchConfig& cfg, std::size_t classes, std::size_t grid_size,
                        const FitnessFn& fitness, std::size_t threads) {
  cfg.validate(classes);
  SeededRng init_rng(cfg.seed, {stream_tag("search"), stream_tag("init")});
  std::vector<Individual> pop = init_population(cfg, classes, grid_size, init_rng);
  evaluate_invalid(pop, fitness, 0, threads);

  SearchResult result;
  Individual hof = pop[best_index(pop)];
  result.history.push_back(make_record(0, hof, pop));

  std::size_t stale = 0;
  for (std::size_t gen = 1; gen <= cfg.generations && stale < cfg.patience; ++gen) {
    SeededRng select_rng(cfg.seed, {stream_tag("search"), stream_tag("select"), gen});
    std::vector<Individual> offspring;
    offspring.reserve(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
      offspring.push_back(pop[tournament_select(pop, cfg.tournament_size, select_rng)]);
    }

    SeededRng vary_rng(cfg.seed, {stream_tag("search"), stream_tag("vary"), gen});
    for (std::size_t i = 1; i < offspring.size(); i += 2) {
      if (vary_rng.bernoulli(cfg.crossover_prob)) {
        auto kids = crossover(offspring[i - 1], offspring[i], cfg, classes, vary_rng);
        offspring[i - 1] = std::move(kids.first);
        offspring[i] = std::move(kids.second);
      }
    }
    for (Individual& ind : offspring) {
      if (vary_rng.bernoulli(cfg.mutation_prob)) mutate(ind, cfg, classes, vary_rng);
    }

    evaluate_invalid(offspring, fitness, gen, threads);

    const std::size_t gen_best = best_index(offspring);
    if (score_of(offspring[gen_best]) < score_of(hof)) {
      hof = offspring[gen_best];
      stale = 0;
    } else {
      ++stale;
      // Hall of fame re-enters the population in place of the worst member.
      std::size_t worst = 0;
      for (std::size_t i = 1; i < offspring.size(); ++i) {
        if (score_of(offspring[i]) >= score_of(offspring[worst])) worst = i;
      }
      offspring[worst] = hof;
    }
    pop = std::move(offspring);
    result.history.push_back(make_record(gen, hof, pop));
  }
  result.best = std::move(hof);
  result.population = std::move(pop);
  return result;
}

double evaluate_fitness(const Individual& ind, const Predictor& model, const Dataset& val,
                        const SearchConfig& cfg, std::size_t generation) {
  check_genome(ind, val.class_count);
  const ClassPairIndex pairs(val.class_count);
  const auto by_class = val.indices_by_class();
  const auto active = ind.active_slots();
  if (active.empty()) return std::numeric_limits<double>::infinity();

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k : active) {
    const auto [ci, cj] = pairs.pair_at(k);
    for (std::size_t c : {ci, cj}) {
      if (by_class[c].empty()) {
        throw ConfigError("class " + std::to_string(c) +
                          " has no validation samples but appears in an active pair");
      }
    }
    SeededRng rng(cfg.seed, {stream_tag("fitness"), generation, k});
    for (std::size_t s = 0; s < cfg.pairs_per_combo; ++s) {
      const std::size_t a = by_class[ci][rng.below(by_class[ci].size())];
      const std::size_t b = by_class[cj][rng.below(by_class[cj].size())];
      const MixedSample mixed =
          patchmix(val.images[a], static_cast<ClassId>(ci), val.images[b],
                   static_cast<ClassId>(cj), ind.masks[k], val.class_count);
      const ModelOutputs out = model(mixed.image);
      switch (cfg.objective) {
        case Objective::kMinPatchAcc:
          sum += patch_accuracy(out, *mixed.patch_labels);
          break;
        case Objective::kMaxPatchAcc:
          sum -= patch_accuracy(out, *mixed.patch_labels);
          break;
        case Objective::kMinPatchLoss:
          sum += patch_loss(out, *mixed.patch_labels);
          break;
        case Objective::kMaxPatchLoss:
          sum -= patch_loss(out, *mixed.patch_labels);
          break;
      }
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

double evaluate_fitness(const Individual& ind, const ReferenceModel& model, const Dataset& val,
                        const SearchConfig& cfg, std::size_t generation) {
  const Predictor predict = [&model](const ImageTensor& img) { return model.forward(img); };
  return evaluate_fitness(ind, predict, val, cfg, generation);
}

}  // namespace patchmix
