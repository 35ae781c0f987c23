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
#ifndef PATCHMIX_REFMODEL_H_
#define PATCHMIX_REFMODEL_H_

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "patchmix/dataset.h"
#include "patchmix/losses.h"
#include "patchmix/mixing.h"
#include "patchmix/rng.h"

namespace patchmix {

// Parameter blocks of the reference model, in checkpoint order.
struct ModelParams {
  std::vector<double> w_embed;  // patch_pixel_count x hidden, row-major
  std::vector<double> b_embed;  // hidden
  std::vector<double> w_patch;  // hidden x classes
  std::vector<double> b_patch;  // classes
  std::vector<double> w_img;    // hidden x classes
  std::vector<double> b_img;    // classes

  static constexpr std::size_t kBlockCount = 6;
  static constexpr std::array<std::string_view, kBlockCount> kBlockNames = {
      "w_embed", "b_embed", "w_patch", "b_patch", "w_img", "b_img"};
  // Weight decay applies to these blocks only.
  static constexpr std::array<bool, kBlockCount> kIsWeight = {true, false, true,
                                                              false, true, false};

  std::array<std::span<double>, kBlockCount> blocks();
  std::array<std::span<const double>, kBlockCount> blocks() const;
  // Same shapes, all zeros.
  ModelParams zeros_like() const;
  bool all_finite() const;

  bool operator==(const ModelParams&) const = default;
};

// Shared per-patch encoder with a per-patch head and a global head over the
// mean patch feature:
//   f_n = relu(W_embed^T x_n + b_embed)
//   patch_logits[n] = W_patch^T f_n + b_patch
//   image_logits = W_img^T mean_n(f_n) + b_img
class ReferenceModel {
 public:
  ReferenceModel() = default;
  // All parameters zero.
  ReferenceModel(std::size_t grid_size, std::size_t classes, std::size_t hidden,
                 std::size_t patch_pixel_count);

  // Weights ~ N(0, 2 / fan_in), biases zero.
  static ReferenceModel initialized(std::size_t grid_size, std::size_t classes,
                                    std::size_t hidden, std::size_t patch_pixel_count,
                                    SeededRng& rng);
  // Sizes the encoder for images of the given shape.
  static ReferenceModel for_images(const ImageTensor& like, std::size_t grid_size,
                                   std::size_t classes, std::size_t hidden, SeededRng& rng);

  std::size_t grid_size() const { return grid_size_; }
  std::size_t class_count() const { return classes_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t patch_pixel_count() const { return patch_pixel_count_; }

  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  ModelOutputs forward(const ImageTensor& image) const;
  // Same as forward, on a double-precision pixel buffer laid out like
  // ImageTensor::data.
  ModelOutputs forward_pixels(std::span<const double> pixels, std::size_t width,
                              std::size_t height, std::size_t channels) const;

  // Throws ConfigError if the image cannot be fed to this model.
  void check_input(std::size_t width, std::size_t height, std::size_t channels) const;

  bool operator==(const ReferenceModel&) const = default;

 private:
  std::size_t grid_size_ = 0;
  std::size_t classes_ = 0;
  std::size_t hidden_ = 0;
  std::size_t patch_pixel_count_ = 0;
  ModelParams params_;
};

struct BatchGradient {
  ModelParams params;                       // d(mean loss)/d(parameters)
  std::vector<std::vector<double>> inputs;  // d(mean loss)/d(pixels), per sample
  double mean_loss = 0.0;
  double mean_image_loss = 0.0;
  double mean_patch_loss = 0.0;  // zero when the mode has no patch term
};

// Analytic gradients of the mean-over-batch loss. Throws NumericError when a
// loss is non-finite, and ConfigError when the mode needs patch labels that a
// sample lacks.
BatchGradient backward(const ReferenceModel& model, std::span<const MixedSample> batch,
                       LossMode mode);

// Loss of a single sample for the given mode (no gradients).
double sample_loss(const ReferenceModel& model, const MixedSample& sample, LossMode mode);
// Same, on a double-precision image buffer.
double sample_loss_pixels(const ReferenceModel& model, std::span<const double> pixels,
                          const MixedSample& sample, LossMode mode);

double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr0, double eta_min);

struct SgdState {
  ModelParams velocity;
};

// Nesterov SGD with decoupled-from-bias L2 weight decay:
//   g' = g + wd * w (weights only);  v <- m v + g';  w <- w - lr (g' + m v)
void sgd_nesterov_step(ReferenceModel& model, const ModelParams& grad, SgdState& state,
                       double lr, double momentum, double weight_decay);

// Binary model checkpoint ("PMXM").
void save_model(const ReferenceModel& model, const std::filesystem::path& path);
ReferenceModel load_model(const std::filesystem::path& path);

}  // namespace patchmix

#endif  // PATCHMIX_REFMODEL_H_
