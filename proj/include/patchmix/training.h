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
#ifndef PATCHMIX_TRAINING_H_
#define PATCHMIX_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "patchmix/dataset.h"
#include "patchmix/losses.h"
#include "patchmix/mixing.h"
#include "patchmix/refmodel.h"

namespace patchmix {

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 100;
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double alpha = 1.0;
  std::size_t grid_size = 4;
  double eta_min = 0.0;
  LossMode loss_mode = LossMode::kBoth;
  double mix_probability = 1.0;
  std::size_t hidden = 64;
  std::uint64_t seed = 0;

  // Throws ConfigError on out-of-range fields.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::string to_string(LossMode mode);
LossMode parse_loss_mode(const std::string& text);

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_top1 = 0.0;
  double val_patch_acc = 0.0;
};

struct TrainResult {
  ReferenceModel model;
  std::vector<EpochMetrics> metrics;
};

struct EvalResult {
  double top1 = 0.0;       // image head
  double patch_acc = 0.0;  // patch head against the image label
};

EvalResult evaluate(const ReferenceModel& model, const Dataset& ds);

// Learning rate for epoch e of E: cosine from lr0 at e = 0 to eta_min at
// e = E - 1.
double epoch_lr(const TrainConfig& cfg, std::size_t epoch);

// Produces the samples of one batch. Called in (epoch, batch) order.
using BatchSource = std::function<std::vector<MixedSample>(std::size_t epoch, std::size_t batch)>;

// Generic loop: cosine schedule, Nesterov SGD, one validation pass per epoch.
// Numeric failures are rethrown with the epoch and batch index.
TrainResult run_training(ReferenceModel model, const Dataset& val, const TrainConfig& cfg,
                         std::size_t batches_per_epoch, const BatchSource& source,
                         LossMode mode);

// Fresh seeded model sized for the dataset's images.
ReferenceModel initial_model(const Dataset& train, const TrainConfig& cfg);

// Random PatchMix: shuffle, pair each sample with a random in-batch partner,
// mix with a fresh random mask per pair (with probability mix_probability,
// otherwise the sample is used unmixed) and minimize the configured loss.
TrainResult train_random_patchmix(const Dataset& train, const Dataset& val,
                                  const TrainConfig& cfg);

// x_adv = clamp(x + eps * sign(dL_O/dx), 0, 1) against the one-hot label.
ImageTensor fgsm_attack(const ReferenceModel& model, const ImageTensor& image, ClassId label,
                        double epsilon);

// Top-1 of the image head on FGSM-perturbed copies of ds.
double adversarial_top1(const ReferenceModel& model, const Dataset& ds, double epsilon);

// "epoch,lr,train_loss,val_top1,val_patch_acc" header, then one row per epoch.
void write_metrics_csv(const std::vector<EpochMetrics>& metrics,
                       const std::filesystem::path& path);

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace patchmix

#endif  // PATCHMIX_TRAINING_H_
