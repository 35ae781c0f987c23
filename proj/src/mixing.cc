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
#include "patchmix/mixing.h"

#include <algorithm>
#include <cmath>

#include "patchmix/error.h"

namespace patchmix {

namespace {

void require_same_shape(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) {
    throw ConfigError("cannot mix images of shapes " + std::to_string(a.width) + "x" +
                      std::to_string(a.height) + "x" + std::to_string(a.channels) + " and " +
                      std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                      std::to_string(b.channels));
  }
}

LabelVector soft_label(ClassId y_i, ClassId y_j, double lambda, std::size_t class_count) {
  LabelVector label = one_hot(y_i, class_count);
  if (y_j >= class_count) {
    throw ConfigError("label " + std::to_string(y_j) + " out of range for " +
                      std::to_string(class_count) + " classes");
  }
  label[y_i] = lambda;
  label[y_j] += 1.0 - lambda;
  return label;
}

}  // namespace

MixedSample patchmix(const ImageTensor& x_i, ClassId y_i, const ImageTensor& x_j, ClassId y_j,
                     const PatchMask& mask, std::size_t class_count) {
  require_same_shape(x_i, x_j);
  const PixelMask pixels = expand_to_pixel_mask(mask, x_i.width, x_i.height);
  MixedSample out;
  out.image = x_j;
  for (std::size_t s = 0; s < x_i.height; ++s) {
    for (std::size_t t = 0; t < x_i.width; ++t) {
      if (!pixels.at(s, t)) continue;
      for (std::size_t ch = 0; ch < x_i.channels; ++ch) out.image.at(s, t, ch) = x_i.at(s, t, ch);
    }
  }
  out.lambda = mixing_ratio(mask);
  out.image_label = soft_label(y_i, y_j, out.lambda, class_count);
  std::vector<ClassId> labels(mask.cell_count());
  for (std::size_t n = 0; n < labels.size(); ++n) labels[n] = mask[n] ? y_i : y_j;
  out.patch_labels = std::move(labels);
  return out;
}

MixedSample mixup(const ImageTensor& x_i, ClassId y_i, const ImageTensor& x_j, ClassId y_j,
                  double lambda, std::size_t class_count) {
  require_same_shape(x_i, x_j);
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("mixup lambda must be in [0,1], got " + std::to_string(lambda));
  }
  MixedSample out;
  out.image = x_i;
  for (std::size_t k = 0; k < out.image.data.size(); ++k) {
    const double v = lambda * x_i.data[k] + (1.0 - lambda) * x_j.data[k];
    out.image.data[k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  out.lambda = lambda;
  out.image_label = soft_label(y_i, y_j, lambda, class_count);
  return out;
}

MixedSample cutmix(const ImageTensor& x_i, ClassId y_i, const ImageTensor& x_j, ClassId y_j,
                   SeededRng& rng, std::size_t region_w, std::size_t region_h,
                   std::size_t class_count) {
  require_same_shape(x_i, x_j);
  const std::size_t w = x_i.width;
  const std::size_t h = x_i.height;
  if (region_w > w || region_h > h) {
    throw ConfigError("cutmix region " + std::to_string(region_w) + "x" +
                      std::to_string(region_h) + " exceeds image " + std::to_string(w) + "x" +
                      std::to_string(h));
  }
  const double cx = rng.normal(w / 2.0, w / 4.0);
  const double cy = rng.normal(h / 2.0, h / 4.0);
  const auto place = [](double center, std::size_t extent, std::size_t limit) {
    const double start = std::round(center - extent / 2.0);
    return static_cast<std::size_t>(
        std::clamp(start, 0.0, static_cast<double>(limit - extent)));
  };
  const std::size_t x0 = place(cx, region_w, w);
  const std::size_t y0 = place(cy, region_h, h);
  MixedSample out;
  out.image = x_i;
  for (std::size_t s = y0; s < y0 + region_h; ++s) {
    for (std::size_t t = x0; t < x0 + region_w; ++t) {
      for (std::size_t ch = 0; ch < x_i.channels; ++ch) out.image.at(s, t, ch) = x_j.at(s, t, ch);
    }
  }
  out.lambda = 1.0 - static_cast<double>(region_w * region_h) / static_cast<double>(w * h);
  out.image_label = soft_label(y_i, y_j, out.lambda, class_count);
  return out;
}

MixedSample unmixed(const ImageTensor& x, ClassId y, std::size_t grid_size,
                    std::size_t class_count) {
  MixedSample out;
  out.image = x;
  out.image_label = one_hot(y, class_count);
  out.patch_labels = std::vector<ClassId>(grid_size * grid_size, y);
  out.lambda = 1.0;
  return out;
}

}  // namespace patchmix
