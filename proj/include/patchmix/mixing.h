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
#ifndef PATCHMIX_MIXING_H_
#define PATCHMIX_MIXING_H_

#include <cstddef>
#include <optional>
#include <vector>

#include "patchmix/dataset.h"
#include "patchmix/masks.h"
#include "patchmix/rng.h"

namespace patchmix {

struct MixedSample {
  ImageTensor image;
  LabelVector image_label;  // lambda * onehot(y_i) + (1 - lambda) * onehot(y_j)
  // One label per grid cell, row-major. Absent for Mixup and CutMix.
  std::optional<std::vector<ClassId>> patch_labels;
  double lambda = 1.0;
};

// Pixels under bit 1 come from x_i, under bit 0 from x_j.
MixedSample patchmix(const ImageTensor& x_i, ClassId y_i, const ImageTensor& x_j, ClassId y_j,
                     const PatchMask& mask, std::size_t class_count);

MixedSample mixup(const ImageTensor& x_i, ClassId y_i, const ImageTensor& x_j, ClassId y_j,
                  double lambda, std::size_t class_count);

// Copies a region_w x region_h rectangle of x_j into x_i. The rectangle
// center is Gaussian around the image center with std of a quarter of each
// dimension, clamped so the rectangle stays inside the image.
MixedSample cutmix(const ImageTensor& x_i, ClassId y_i, const ImageTensor& x_j, ClassId y_j,
                   SeededRng& rng, std::size_t region_w, std::size_t region_h,
                   std::size_t class_count);

// The unmixed sample: image x, one-hot label, every patch labelled y.
MixedSample unmixed(const ImageTensor& x, ClassId y, std::size_t grid_size,
                    std::size_t class_count);

}  // namespace patchmix

#endif  // PATCHMIX_MIXING_H_
