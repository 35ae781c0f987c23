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
#ifndef PATCHMIX_DATASET_H_
#define PATCHMIX_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace patchmix {

using ClassId = std::uint32_t;

// Image with values in [0,1], stored row-major as (row, column, channel).
struct ImageTensor {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<float> data;

  ImageTensor() = default;
  ImageTensor(std::size_t w, std::size_t h, std::size_t c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(w * h * c, fill) {}

  std::size_t index(std::size_t row, std::size_t col, std::size_t ch) const {
    return (row * width + col) * channels + ch;
  }
  float at(std::size_t row, std::size_t col, std::size_t ch) const {
    return data[index(row, col, ch)];
  }
  float& at(std::size_t row, std::size_t col, std::size_t ch) {
    return data[index(row, col, ch)];
  }
  bool same_shape(const ImageTensor& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  // Shape matches data length and every value is finite and in [0,1].
  bool valid() const;

  bool operator==(const ImageTensor&) const = default;
};

// Class distribution over C classes.
using LabelVector = std::vector<double>;

LabelVector one_hot(ClassId label, std::size_t class_count);
// Entries non-negative and summing to 1 within 1e-9.
bool is_distribution(std::span<const double> probs);

enum class Split { kTrain, kValidation };

struct Dataset {
  std::vector<ImageTensor> images;
  std::vector<ClassId> labels;
  std::size_t class_count = 0;
  Split split = Split::kTrain;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  // Throws ConfigError if the invariants (equal lengths, labels in range,
  // uniform image shape) do not hold.
  void validate() const;
  // Indices of the samples of each class, in dataset order.
  std::vector<std::vector<std::size_t>> indices_by_class() const;
  // Copy holding the samples at `indices` in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset&) const = default;
};

// CIFAR-10 binary records: 1 label byte + 3072 channel-planar pixel bytes.
inline constexpr std::size_t kCifarRecordBytes = 3073;

Dataset load_cifar_binary(const std::filesystem::path& path);

// Seeded texture classes; every patch of an image carries its class signal.
Dataset synth_shapes(std::size_t class_count, std::size_t image_size,
                     std::size_t samples_per_class, std::uint64_t seed);

// Three Gaussian clusters with linearly separable means, stored as 1x2x1
// images (width 2, one feature per column).
Dataset toy_2d_three_class(std::size_t samples_per_class, std::uint64_t seed);

// Cluster means used by toy_2d_three_class, as (feature0, feature1).
std::vector<std::pair<double, double>> toy_2d_means();

// Stratified split: from each class, round(fraction * n_c) samples (at least
// one when fraction > 0) go to the validation side.
std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double val_fraction,
                                             std::uint64_t seed);

// Binary dataset checkpoint ("PMXD").
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
// Loads either a PMXD checkpoint or a CIFAR binary file, by magic bytes.
Dataset load_any_dataset(const std::filesystem::path& path);

}  // namespace patchmix

#endif  // PATCHMIX_DATASET_H_
