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
#include "patchmix/losses.h"

#include <atomic>
#include <cmath>

#include "patchmix/error.h"

namespace patchmix {

namespace {

std::atomic<std::uint64_t> g_patch_loss_calls{0};

void check_patch_shape(const ModelOutputs& out, std::span<const ClassId> labels) {
  if (labels.size() != out.patch_count || out.patch_logits.size() != out.patch_count * out.class_count) {
    throw ConfigError("patch labels (" + std::to_string(labels.size()) +
                      ") do not match patch outputs (" + std::to_string(out.patch_count) + ")");
  }
}

}  // namespace

double log_sum_exp(std::span<const double> logits) {
  double mx = -INFINITY;
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericError("non-finite logit");
    mx = std::max(mx, z);
  }
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  return mx + std::log(sum);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) p[k] = std::exp(logits[k] - lse);
  return p;
}

double image_loss(std::span<const double> image_logits, std::span<const double> target) {
  if (image_logits.size() != target.size()) {
    throw ConfigError("image logits and target differ in class count");
  }
  const double lse = log_sum_exp(image_logits);
  double loss = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (target[k] != 0.0) loss += target[k] * (lse - image_logits[k]);
  }
  return loss;
}

double patch_loss(const ModelOutputs& out, std::span<const ClassId> patch_labels) {
  g_patch_loss_calls.fetch_add(1, std::memory_order_relaxed);
  check_patch_shape(out, patch_labels);
  double loss = 0.0;
  for (std::size_t n = 0; n < out.patch_count; ++n) {
    if (patch_labels[n] >= out.class_count) {
      throw ConfigError("patch label " + std::to_string(patch_labels[n]) + " >= class count " +
                        std::to_string(out.class_count));
    }
    const auto row = out.patch_row(n);
    loss += log_sum_exp(row) - row[patch_labels[n]];
  }
  return loss;
}

double total_loss(double image_term, double patch_term, std::size_t grid_size) {
  const double cells = static_cast<double>(grid_size * grid_size);
  return (image_term + patch_term / cells) / 2.0;
}

double combined_loss(LossMode mode, double image_term, double patch_term, std::size_t grid_size) {
  switch (mode) {
    case LossMode::kBoth:
      return total_loss(image_term, patch_term, grid_size);
    case LossMode::kImageOnly:
      return image_term;
    case LossMode::kPatchOnly:
      return patch_term / static_cast<double>(grid_size * grid_size);
  }
  return image_term;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

double patch_accuracy(const ModelOutputs& out, std::span<const ClassId> patch_labels) {
  check_patch_shape(out, patch_labels);
  if (out.patch_count == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t n = 0; n < out.patch_count; ++n) {
    if (argmax(out.patch_row(n)) == patch_labels[n]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(out.patch_count);
}

std::uint64_t patch_loss_evaluations() { return g_patch_loss_calls.load(); }

}  // namespace patchmix
