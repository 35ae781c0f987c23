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
#ifndef PATCHMIX_EVOLUTION_H_
#define PATCHMIX_EVOLUTION_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "patchmix/dataset.h"
#include "patchmix/losses.h"
#include "patchmix/masks.h"
#include "patchmix/refmodel.h"
#include "patchmix/rng.h"

namespace patchmix {

// Unordered class pairs (i, j), i <= j, enumerated row-major over the upper
// triangle: (0,0), (0,1), ..., (0,C-1), (1,1), ...
class ClassPairIndex {
 public:
  explicit ClassPairIndex(std::size_t classes);

  std::size_t classes() const { return classes_; }
  std::size_t pair_count() const { return classes_ * (classes_ + 1) / 2; }
  // Order of i and j does not matter.
  std::size_t index_of(std::size_t i, std::size_t j) const;
  std::pair<std::size_t, std::size_t> pair_at(std::size_t k) const;
  bool is_same_class(std::size_t k) const;

 private:
  std::size_t classes_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
};

enum class Objective { kMinPatchAcc, kMaxPatchAcc, kMinPatchLoss, kMaxPatchLoss };

std::string to_string(Objective o);
Objective parse_objective(const std::string& text);

struct SearchConfig {
  std::size_t population_size = 500;
  std::size_t generations = 60;
  double crossover_prob = 0.5;
  double mutation_prob = 0.3;
  std::size_t tournament_size = 3;
  std::optional<std::size_t> max_active;  // N; the class count when unset
  bool force_same_class = false;
  Objective objective = Objective::kMinPatchAcc;
  std::size_t pairs_per_combo = 32;  // S
  double val_fraction = 0.25;
  std::size_t patience = 50;
  std::uint64_t seed = 0;

  std::size_t active_limit(std::size_t classes) const { return max_active.value_or(classes); }
  // Throws ConfigError on invalid fields or an infeasible N.
  void validate(std::size_t classes) const;
  bool operator==(const SearchConfig&) const = default;
};

// Per-bit flip probability of the random_tails mutation.
inline constexpr double kRandomTailsFlipProb = 0.1;

struct Individual {
  std::vector<std::uint8_t> head;  // one activation flag per class pair
  std::vector<PatchMask> masks;    // one mask per class pair
  std::optional<double> fitness;   // lower is fitter

  std::size_t active_count() const;
  std::vector<std::size_t> active_slots() const;
  // Genome equality; the cached fitness is ignored.
  bool same_genome(const Individual& o) const { return head == o.head && masks == o.masks; }
};

std::vector<Individual> init_population(const SearchConfig& cfg, std::size_t classes,
                                        std::size_t grid_size, SeededRng& rng);

// Forces same-class slots on (if configured) and trims the head to N active
// slots by switching off uniformly chosen non-forced slots.
void repair(Individual& ind, const SearchConfig& cfg, std::size_t classes, SeededRng& rng);

// Masks: child 1 takes columns [0, P/2) from a and [P/2, P) from b, child 2
// the reverse. Heads: one-point crossover, then repair.
std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b,
                                            const SearchConfig& cfg, std::size_t classes,
                                            SeededRng& rng);

enum class MutationOp { kFlipTails, kTranspose, kFlipHeads, kRandomTails };

// Applies one specific operator followed by repair.
void apply_mutation(Individual& ind, MutationOp op, const SearchConfig& cfg, std::size_t classes,
                    SeededRng& rng);
// Picks one of the four operators uniformly and applies it.
MutationOp mutate(Individual& ind, const SearchConfig& cfg, std::size_t classes, SeededRng& rng);

// k draws with replacement; returns the index of the lowest fitness (first
// drawn on ties).
std::size_t tournament_select(std::span<const Individual> population, std::size_t k,
                              SeededRng& rng);

// Score of an individual in a given generation; lower is fitter.
using FitnessFn = std::function<double(const Individual&, std::size_t generation)>;

struct GenerationRecord {
  std::size_t generation = 0;
  double best = 0.0;  // best-ever score
  double mean = 0.0;  // mean over finite scores of the population
  std::vector<std::size_t> best_active_pairs;
  std::vector<std::size_t> census;  // per pair slot: individuals with it active
};

struct SearchResult {
  Individual best;
  std::vector<GenerationRecord> history;
  std::vector<Individual> population;
};

// Tournament selection, crossover of adjacent parents, mutation, evaluation
// of changed individuals (in parallel up to `threads`) and a hall of fame of
// one. Stops after cfg.generations or cfg.patience generations without
// improvement of the best score.
SearchResult run_search(const SearchConfig& cfg, std::size_t classes, std::size_t grid_size,
                        const FitnessFn& fitness, std::size_t threads = 1);

// Anything mapping an image to patch and image logits.
using Predictor = std::function<ModelOutputs(const ImageTensor&)>;

// Training-free fitness: mixes S validation pairs per active slot with the
// slot's mask and scores the frozen model's patch predictions. The pairs
// depend only on (seed, generation, slot), so every individual of a
// generation sees the same raw images.
double evaluate_fitness(const Individual& ind, const Predictor& model, const Dataset& val,
                        const SearchConfig& cfg, std::size_t generation);
double evaluate_fitness(const Individual& ind, const ReferenceModel& model, const Dataset& val,
                        const SearchConfig& cfg, std::size_t generation);

// Runs fn(i) for i in [0, n) on up to `threads` threads. The first failing
// index (lowest) is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

// Text checkpoints.
struct IndividualRecord {
  std::size_t classes = 0;
  std::size_t grid_size = 0;
  std::size_t max_active = 0;
  Individual individual;
};

std::string serialize_individual(const Individual& ind, std::size_t classes,
                                 std::size_t grid_size, std::size_t max_active);
IndividualRecord parse_individual(const std::string& text);
std::string serialize_population(std::span<const Individual> population, std::size_t classes,
                                 std::size_t grid_size, std::size_t max_active);
std::vector<IndividualRecord> parse_population(const std::string& text);

// "generation,best,mean,active_pairs" header; pairs as i-j joined by spaces.
std::string format_history(std::span<const GenerationRecord> history, std::size_t classes);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace patchmix

#endif  // PATCHMIX_EVOLUTION_H_
