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
#ifndef PATCHMIX_WORKFLOW_H_
#define PATCHMIX_WORKFLOW_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "patchmix/dataset.h"
#include "patchmix/evolution.h"
#include "patchmix/mixing.h"
#include "patchmix/refmodel.h"
#include "patchmix/training.h"

namespace patchmix {

struct GuidedConfig {
  // original : randomly mixed : guided samples per phase-4 batch.
  std::array<double, 3> ratio = {1.0, 1.0, 1.0};
  // Guided set size; the training set size when unset.
  std::optional<std::size_t> guided_set_size;

  void validate() const;
  bool operator==(const GuidedConfig&) const = default;
};

struct GuidedPlan {
  Individual best_individual;
  double sampling_weight = 0.0;  // share of guided samples in a phase-4 batch
};

GuidedPlan make_guided_plan(const Individual& best, const GuidedConfig& cfg);

struct GuidedSample {
  MixedSample sample;
  std::size_t slot = 0;          // class-pair slot of the individual
  std::size_t first_index = 0;   // training index of the first image
  std::size_t second_index = 0;  // training index of the second image
};

// Each sample: a uniformly chosen active slot, one training image from each
// class of its pair, mixed with the slot's mask.
std::vector<GuidedSample> generate_guided_set(const Individual& ind, const Dataset& train,
                                              std::size_t count, SeededRng& rng);

struct BatchComposition {
  std::size_t original = 0;
  std::size_t random = 0;
  std::size_t guided = 0;
};

// random = floor(B r1 / sum), guided = floor(B r2 / sum), original = the rest.
BatchComposition compose_batch(std::size_t batch_size, const std::array<double, 3>& ratio);

using RandomMixer = std::function<MixedSample(SeededRng&)>;

// Random PatchMix sample from two uniformly drawn training images.
RandomMixer random_patchmix_mixer(const Dataset& train, std::size_t grid_size, double alpha);

// Batches mixing original, randomly mixed and guided samples. Originals and
// guided samples are visited in a per-epoch shuffled order; random mixes are
// regenerated for every batch.
class GuidedBatchComposer {
 public:
  GuidedBatchComposer(const Dataset& train, RandomMixer random_mixer,
                      const std::vector<GuidedSample>& guided, const std::array<double, 3>& ratio,
                      std::size_t batch_size, std::size_t grid_size, std::uint64_t seed);

  std::size_t batches_per_epoch() const { return batches_per_epoch_; }
  const BatchComposition& composition() const { return composition_; }
  std::vector<MixedSample> batch(std::size_t epoch, std::size_t index);

 private:
  void reshuffle(std::size_t epoch);

  const Dataset& train_;
  RandomMixer random_mixer_;
  const std::vector<GuidedSample>& guided_;
  BatchComposition composition_;
  std::size_t grid_size_;
  std::uint64_t seed_;
  std::size_t batches_per_epoch_ = 0;
  std::size_t epoch_ = static_cast<std::size_t>(-1);
  std::vector<std::size_t> original_order_;
  std::vector<std::size_t> guided_order_;
};

// Phase 2: seeded stratified subset of the validation set used by the fitness.
Dataset fitness_subset(const Dataset& val, const SearchConfig& cfg);

// Phase 2: search with the frozen f_T as fitness model.
SearchResult search_with_model(const ReferenceModel& f_t, const Dataset& val,
                               const SearchConfig& cfg, std::size_t threads);

// Phase 4: trains f_O on the image-level loss only.
TrainResult train_guided(const Dataset& train, const Dataset& val,
                         const std::vector<GuidedSample>& guided, const TrainConfig& cfg,
                         const GuidedConfig& guided_cfg);

// Run directory layout.
struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path config() const { return dir / "config.json"; }
  std::filesystem::path f_t() const { return dir / "f_T.pmxm"; }
  std::filesystem::path f_t_metrics() const { return dir / "metrics_f_T.csv"; }
  std::filesystem::path search_history() const { return dir / "search_history.csv"; }
  std::filesystem::path population() const { return dir / "population.txt"; }
  std::filesystem::path best_individual() const { return dir / "best_individual.txt"; }
  std::filesystem::path guided_manifest() const { return dir / "guided_manifest.csv"; }
  std::filesystem::path f_o() const { return dir / "f_O.pmxm"; }
  std::filesystem::path f_o_metrics() const { return dir / "metrics_f_O.csv"; }
  std::filesystem::path summary() const { return dir / "summary.csv"; }
};

void write_guided_manifest(const std::vector<GuidedSample>& guided, std::size_t classes,
                           const std::filesystem::path& path);

struct PipelineResult {
  ReferenceModel f_t;
  ReferenceModel f_o;
  SearchResult search;
  GuidedPlan plan;
  std::vector<EpochMetrics> f_t_metrics;
  std::vector<EpochMetrics> f_o_metrics;
  EvalResult f_t_eval;  // random PatchMix model on the validation set
  EvalResult f_o_eval;  // guided model on the validation set
  bool phase1_skipped = false;
};

struct PipelineOptions {
  std::optional<std::filesystem::path> run_dir;  // no artifacts when unset
  std::size_t threads = 1;
  std::ostream* log = nullptr;
};

// Phase 1 (Random PatchMix f_T, skipped when the run directory already holds
// f_T), phase 2 (search), phase 3 (guided set), phase 4 (f_O). Failures are
// rethrown with the phase name and the original error category.
PipelineResult run_guided_pipeline(const Dataset& train, const Dataset& val,
                                   const TrainConfig& train_cfg, const SearchConfig& search_cfg,
                                   const GuidedConfig& guided_cfg, const PipelineOptions& opts);

}  // namespace patchmix

#endif  // PATCHMIX_WORKFLOW_H_
