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
#ifndef PATCHMIX_CONFIG_H_
#define PATCHMIX_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include "patchmix/dataset.h"
#include "patchmix/evolution.h"
#include "patchmix/training.h"
#include "patchmix/workflow.h"

namespace patchmix {

enum class DatasetKind { kSynth, kCifar, kCheckpoint };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::kSynth;
  // kSynth
  std::size_t classes = 3;
  std::size_t image_size = 16;
  std::size_t samples_per_class = 200;
  std::size_t val_samples_per_class = 100;
  std::uint64_t seed = 0;
  // kCifar / kCheckpoint
  std::string train_path;
  std::string val_path;

  bool operator==(const DatasetConfig&) const = default;
};

struct RunConfig {
  DatasetConfig dataset;
  TrainConfig train;
  SearchConfig search;
  GuidedConfig guided;
  std::string output_dir = "run";
  std::size_t threads = 1;

  bool operator==(const RunConfig&) const = default;
};

// JSON text. Unknown keys and ill-typed values raise ConfigError naming the
// key; absent keys take their defaults.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& cfg);

// Applies a --seed override to the training and search seeds.
void override_seed(RunConfig& cfg, std::uint64_t seed);

// Train and validation splits described by the dataset section.
std::pair<Dataset, Dataset> load_datasets(const DatasetConfig& cfg);

}  // namespace patchmix

#endif  // PATCHMIX_CONFIG_H_
