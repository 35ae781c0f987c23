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
#ifndef PATCHMIX_LOSSES_H_
#define PATCHMIX_LOSSES_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "patchmix/dataset.h"

namespace patchmix {

struct ModelOutputs {
  std::size_t patch_count = 0;  // P^2
  std::size_t class_count = 0;  // C
  std::vector<double> patch_logits;  // patch_count x class_count, row-major patch order
  std::vector<double> image_logits;  // class_count

  std::span<const double> patch_row(std::size_t n) const {
    return std::span<const double>(patch_logits).subspan(n * class_count, class_count);
  }
};

enum class LossMode { kBoth, kImageOnly, kPatchOnly };

// Max-subtracted softmax. Throws NumericError on non-finite logits.
std::vector<double> softmax(std::span<const double> logits);
// log(sum(exp(logits))), stable.
double log_sum_exp(std::span<const double> logits);

// L_O: cross-entropy of softmax(logits) against a soft target.
double image_loss(std::span<const double> image_logits, std::span<const double> target);

// L_P: sum over patches of the one-hot cross-entropy.
double patch_loss(const ModelOutputs& out, std::span<const ClassId> patch_labels);

// L_T = (L_O + L_P / P^2) / 2.
double total_loss(double image_term, double patch_term, std::size_t grid_size);

// Loss for a training mode. With one term disabled the other is used as is
// (L_O, or L_P / P^2).
double combined_loss(LossMode mode, double image_term, double patch_term, std::size_t grid_size);

// Fraction of patches whose argmax (lowest index on ties) equals the label.
double patch_accuracy(const ModelOutputs& out, std::span<const ClassId> patch_labels);

std::size_t argmax(std::span<const double> values);

// Number of patch_loss evaluations since process start (all threads).
std::uint64_t patch_loss_evaluations();

}  // namespace patchmix

#endif  // PATCHMIX_LOSSES_H_
