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
#include "patchmix/refmodel.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "patchmix/error.h"

namespace patchmix {

namespace {

constexpr std::array<char, 4> kModelMagic = {'P', 'M', 'X', 'M'};
constexpr std::uint32_t kModelVersion = 1;

// Pixel index (into ImageTensor::data) of every patch element, patch-major.
std::vector<std::size_t> patch_layout(std::size_t width, std::size_t height,
                                      std::size_t channels, std::size_t grid) {
  const std::size_t ph = height / grid;
  const std::size_t pw = width / grid;
  std::vector<std::size_t> idx;
  idx.reserve(width * height * channels);
  for (std::size_t pr = 0; pr < grid; ++pr) {
    for (std::size_t pc = 0; pc < grid; ++pc) {
      for (std::size_t r = pr * ph; r < (pr + 1) * ph; ++r) {
        for (std::size_t c = pc * pw; c < (pc + 1) * pw; ++c) {
          for (std::size_t ch = 0; ch < channels; ++ch) {
            idx.push_back((r * width + c) * channels + ch);
          }
        }
      }
    }
  }
  return idx;
}

// Activations kept for the backward pass.
struct Trace {
  std::vector<std::size_t> layout;
  std::vector<double> x;       // patches x patch_pixel_count
  std::vector<double> pre;     // patches x hidden
  std::vector<double> feat;    // patches x hidden
  std::vector<double> pooled;  // hidden
  ModelOutputs out;
};

Trace run_forward(const ReferenceModel& m, std::span<const double> pixels, std::size_t width,
                  std::size_t height, std::size_t channels) {
  m.check_input(width, height, channels);
  if (pixels.size() != width * height * channels) {
    throw ConfigError("pixel buffer length does not match image shape");
  }
  const std::size_t patches = m.grid_size() * m.grid_size();
  const std::size_t ppc = m.patch_pixel_count();
  const std::size_t hid = m.hidden();
  const std::size_t cls = m.class_count();
  const ModelParams& p = m.params();

  Trace t;
  t.layout = patch_layout(width, height, channels, m.grid_size());
  t.x.resize(patches * ppc);
  for (std::size_t i = 0; i < t.layout.size(); ++i) t.x[i] = pixels[t.layout[i]];

  t.pre.assign(patches * hid, 0.0);
  t.feat.assign(patches * hid, 0.0);
  t.pooled.assign(hid, 0.0);
  t.out.patch_count = patches;
  t.out.class_count = cls;
  t.out.patch_logits.assign(patches * cls, 0.0);
  t.out.image_logits.assign(cls, 0.0);

  for (std::size_t n = 0; n < patches; ++n) {
    double* pre = &t.pre[n * hid];
    std::copy(p.b_embed.begin(), p.b_embed.end(), pre);
    const double* xn = &t.x[n * ppc];
    for (std::size_t k = 0; k < ppc; ++k) {
      const double xv = xn[k];
      const double* w = &p.w_embed[k * hid];
      for (std::size_t d = 0; d < hid; ++d) pre[d] += xv * w[d];
    }
    double* feat = &t.feat[n * hid];
    for (std::size_t d = 0; d < hid; ++d) {
      feat[d] = pre[d] > 0.0 ? pre[d] : 0.0;
      t.pooled[d] += feat[d];
    }
    double* logits = &t.out.patch_logits[n * cls];
    std::copy(p.b_patch.begin(), p.b_patch.end(), logits);
    for (std::size_t d = 0; d < hid; ++d) {
      const double* w = &p.w_patch[d * cls];
      for (std::size_t c = 0; c < cls; ++c) logits[c] += feat[d] * w[c];
    }
  }
  for (double& v : t.pooled) v /= static_cast<double>(patches);
  std::copy(p.b_img.begin(), p.b_img.end(), t.out.image_logits.begin());
  for (std::size_t d = 0; d < hid; ++d) {
    const double* w = &p.w_img[d * cls];
    for (std::size_t c = 0; c < cls; ++c) t.out.image_logits[c] += t.pooled[d] * w[c];
  }
  return t;
}

struct TermWeights {
  double image;
  double patch;
};

TermWeights term_weights(LossMode mode, std::size_t patches) {
  const double per_patch = 1.0 / static_cast<double>(patches);
  switch (mode) {
    case LossMode::kBoth:
      return {0.5, 0.5 * per_patch};
    case LossMode::kImageOnly:
      return {1.0, 0.0};
    case LossMode::kPatchOnly:
      return {0.0, per_patch};
  }
  return {1.0, 0.0};
}

const std::vector<ClassId>& require_patch_labels(const MixedSample& s, std::size_t index) {
  if (!s.patch_labels) {
    throw ConfigError("sample " + std::to_string(index) +
                      " has no patch labels but the loss mode needs them");
  }
  return *s.patch_labels;
}

std::vector<double> to_double(const ImageTensor& img) {
  return {img.data.begin(), img.data.end()};
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint64_t get_le(std::istream& in, int bytes, const std::filesystem::path& path) {
  unsigned char b[8] = {};
  if (!in.read(reinterpret_cast<char*>(b), bytes)) {
    throw FormatError(path.string() + ": model checkpoint truncated");
  }
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

std::array<std::span<double>, ModelParams::kBlockCount> ModelParams::blocks() {
  return {w_embed, b_embed, w_patch, b_patch, w_img, b_img};
}

std::array<std::span<const double>, ModelParams::kBlockCount> ModelParams::blocks() const {
  return {w_embed, b_embed, w_patch, b_patch, w_img, b_img};
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  z.w_embed.assign(w_embed.size(), 0.0);
  z.b_embed.assign(b_embed.size(), 0.0);
  z.w_patch.assign(w_patch.size(), 0.0);
  z.b_patch.assign(b_patch.size(), 0.0);
  z.w_img.assign(w_img.size(), 0.0);
  z.b_img.assign(b_img.size(), 0.0);
  return z;
}

bool ModelParams::all_finite() const {
  for (auto block : blocks()) {
    for (double v : block) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

ReferenceModel::ReferenceModel(std::size_t grid_size, std::size_t classes, std::size_t hidden,
                               std::size_t patch_pixel_count)
    : grid_size_(grid_size),
      classes_(classes),
      hidden_(hidden),
      patch_pixel_count_(patch_pixel_count) {
  if (grid_size == 0 || classes == 0 || hidden == 0 || patch_pixel_count == 0) {
    throw ConfigError("model dimensions must all be positive");
  }
  params_.w_embed.assign(patch_pixel_count * hidden, 0.0);
  params_.b_embed.assign(hidden, 0.0);
  params_.w_patch.assign(hidden * classes, 0.0);
  params_.b_patch.assign(classes, 0.0);
  params_.w_img.assign(hidden * classes, 0.0);
  params_.b_img.assign(classes, 0.0);
}

ReferenceModel ReferenceModel::initialized(std::size_t grid_size, std::size_t classes,
                                           std::size_t hidden, std::size_t patch_pixel_count,
                                           SeededRng& rng) {
  ReferenceModel m(grid_size, classes, hidden, patch_pixel_count);
  const double embed_std = std::sqrt(2.0 / static_cast<double>(patch_pixel_count));
  const double head_std = std::sqrt(2.0 / static_cast<double>(hidden));
  for (double& w : m.params_.w_embed) w = rng.normal(0.0, embed_std);
  for (double& w : m.params_.w_patch) w = rng.normal(0.0, head_std);
  for (double& w : m.params_.w_img) w = rng.normal(0.0, head_std);
  return m;
}

ReferenceModel ReferenceModel::for_images(const ImageTensor& like, std::size_t grid_size,
                                          std::size_t classes, std::size_t hidden,
                                          SeededRng& rng) {
  if (grid_size == 0 || like.width % grid_size != 0 || like.height % grid_size != 0) {
    throw ConfigError("image " + std::to_string(like.width) + "x" + std::to_string(like.height) +
                      " is not divisible by P=" + std::to_string(grid_size));
  }
  const std::size_t ppc = (like.width / grid_size) * (like.height / grid_size) * like.channels;
  return initialized(grid_size, classes, hidden, ppc, rng);
}

void ReferenceModel::check_input(std::size_t width, std::size_t height,
                                 std::size_t channels) const {
  if (grid_size_ == 0 || width % grid_size_ != 0 || height % grid_size_ != 0) {
    throw ConfigError("image " + std::to_string(width) + "x" + std::to_string(height) +
                      " is not divisible by P=" + std::to_string(grid_size_));
  }
  const std::size_t ppc = (width / grid_size_) * (height / grid_size_) * channels;
  if (ppc != patch_pixel_count_) {
    throw ConfigError("image patches hold " + std::to_string(ppc) + " values but the model expects " +
                      std::to_string(patch_pixel_count_));
  }
}

ModelOutputs ReferenceModel::forward(const ImageTensor& image) const {
  const auto px = to_double(image);
  return run_forward(*this, px, image.width, image.height, image.channels).out;
}

ModelOutputs ReferenceModel::forward_pixels(std::span<const double> pixels, std::size_t width,
                                            std::size_t height, std::size_t channels) const {
  return run_forward(*this, pixels, width, height, channels).out;
}

double sample_loss_pixels(const ReferenceModel& model, std::span<const double> pixels,
                          const MixedSample& sample, LossMode mode) {
  const ImageTensor& img = sample.image;
  const ModelOutputs out = model.forward_pixels(pixels, img.width, img.height, img.channels);
  const TermWeights w = term_weights(mode, out.patch_count);
  double loss = 0.0;
  if (w.image != 0.0) loss += w.image * image_loss(out.image_logits, sample.image_label);
  if (w.patch != 0.0) loss += w.patch * patch_loss(out, require_patch_labels(sample, 0));
  return loss;
}

double sample_loss(const ReferenceModel& model, const MixedSample& sample, LossMode mode) {
  return sample_loss_pixels(model, to_double(sample.image), sample, mode);
}

BatchGradient backward(const ReferenceModel& model, std::span<const MixedSample> batch,
                       LossMode mode) {
  BatchGradient g;
  g.params = model.params().zeros_like();
  g.inputs.resize(batch.size());
  if (batch.empty()) return g;

  const ModelParams& p = model.params();
  const std::size_t patches = model.grid_size() * model.grid_size();
  const std::size_t ppc = model.patch_pixel_count();
  const std::size_t hid = model.hidden();
  const std::size_t cls = model.class_count();
  const TermWeights w = term_weights(mode, patches);
  const double scale = 1.0 / static_cast<double>(batch.size());

  std::vector<double> dz_img(cls), dz_patch(cls), dpool(hid), dpre(hid);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const MixedSample& s = batch[i];
    const auto px = to_double(s.image);
    const Trace t = run_forward(model, px, s.image.width, s.image.height, s.image.channels);
    if (s.image_label.size() != cls) {
      throw ConfigError("sample " + std::to_string(i) + " label has " +
                        std::to_string(s.image_label.size()) + " classes, model has " +
                        std::to_string(cls));
    }

    double l_img = 0.0;
    double l_patch = 0.0;
    if (w.image != 0.0) l_img = image_loss(t.out.image_logits, s.image_label);
    const std::vector<ClassId>* labels = nullptr;
    if (w.patch != 0.0) {
      labels = &require_patch_labels(s, i);
      l_patch = patch_loss(t.out, *labels);
    }
    const double loss = w.image * l_img + w.patch * l_patch;
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "non-finite loss at batch sample " << i << " (L_O=" << l_img << ", L_P=" << l_patch
          << ")";
      throw NumericError(msg.str());
    }
    g.mean_loss += scale * loss;
    g.mean_image_loss += scale * l_img;
    g.mean_patch_loss += scale * l_patch;

    // Image head.
    std::fill(dz_img.begin(), dz_img.end(), 0.0);
    if (w.image != 0.0) {
      const auto prob = softmax(t.out.image_logits);
      for (std::size_t c = 0; c < cls; ++c) dz_img[c] = scale * w.image * (prob[c] - s.image_label[c]);
    }
    for (std::size_t d = 0; d < hid; ++d) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cls; ++c) {
        g.params.w_img[d * cls + c] += t.pooled[d] * dz_img[c];
        acc += p.w_img[d * cls + c] * dz_img[c];
      }
      dpool[d] = acc / static_cast<double>(patches);
    }
    for (std::size_t c = 0; c < cls; ++c) g.params.b_img[c] += dz_img[c];

    std::vector<double>& dx = g.inputs[i];
    dx.assign(px.size(), 0.0);
    for (std::size_t n = 0; n < patches; ++n) {
      std::fill(dz_patch.begin(), dz_patch.end(), 0.0);
      if (labels != nullptr) {
        const auto prob = softmax(t.out.patch_row(n));
        for (std::size_t c = 0; c < cls; ++c) dz_patch[c] = scale * w.patch * prob[c];
        dz_patch[(*labels)[n]] -= scale * w.patch;
      }
      const double* feat = &t.feat[n * hid];
      const double* pre = &t.pre[n * hid];
      for (std::size_t d = 0; d < hid; ++d) {
        double acc = dpool[d];
        for (std::size_t c = 0; c < cls; ++c) {
          g.params.w_patch[d * cls + c] += feat[d] * dz_patch[c];
          acc += p.w_patch[d * cls + c] * dz_patch[c];
        }
        dpre[d] = pre[d] > 0.0 ? acc : 0.0;
      }
      for (std::size_t c = 0; c < cls; ++c) g.params.b_patch[c] += dz_patch[c];
      const double* xn = &t.x[n * ppc];
      for (std::size_t k = 0; k < ppc; ++k) {
        double* gw = &g.params.w_embed[k * hid];
        const double* wk = &p.w_embed[k * hid];
        double acc = 0.0;
        for (std::size_t d = 0; d < hid; ++d) {
          gw[d] += xn[k] * dpre[d];
          acc += wk[d] * dpre[d];
        }
        dx[t.layout[n * ppc + k]] = acc;
      }
      for (std::size_t d = 0; d < hid; ++d) g.params.b_embed[d] += dpre[d];
    }
  }
  return g;
}

double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr0, double eta_min) {
  if (total_epochs == 0) return lr0;
  const double frac = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return eta_min + (lr0 - eta_min) * (1.0 + std::cos(std::numbers::pi * frac)) / 2.0;
}

void sgd_nesterov_step(ReferenceModel& model, const ModelParams& grad, SgdState& state,
                       double lr, double momentum, double weight_decay) {
  ModelParams& p = model.params();
  if (state.velocity.w_embed.size() != p.w_embed.size() ||
      state.velocity.w_img.size() != p.w_img.size()) {
    state.velocity = p.zeros_like();
  }
  auto params = p.blocks();
  const auto grads = grad.blocks();
  auto vel = state.velocity.blocks();
  for (std::size_t b = 0; b < ModelParams::kBlockCount; ++b) {
    if (grads[b].size() != params[b].size()) {
      throw ConfigError("gradient block " + std::string(ModelParams::kBlockNames[b]) +
                        " has the wrong size");
    }
    const double wd = ModelParams::kIsWeight[b] ? weight_decay : 0.0;
    for (std::size_t k = 0; k < params[b].size(); ++k) {
      const double g = grads[b][k] + wd * params[b][k];
      vel[b][k] = momentum * vel[b][k] + g;
      params[b][k] -= lr * (g + momentum * vel[b][k]);
    }
  }
}

void save_model(const ReferenceModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kModelMagic.data(), 4);
  put_u32(out, kModelVersion);
  put_u32(out, static_cast<std::uint32_t>(model.grid_size()));
  put_u32(out, static_cast<std::uint32_t>(model.class_count()));
  put_u32(out, static_cast<std::uint32_t>(model.hidden()));
  put_u32(out, static_cast<std::uint32_t>(model.patch_pixel_count()));
  for (auto block : model.params().blocks()) {
    for (double v : block) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(v));
      unsigned char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
      out.write(reinterpret_cast<const char*>(b), 8);
    }
  }
  if (!out) throw ConfigError("write failed for " + path.string());
}

ReferenceModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kModelMagic) {
    throw FormatError(path.string() + ": not a model checkpoint");
  }
  if (get_le(in, 4, path) != kModelVersion) {
    throw FormatError(path.string() + ": unsupported model checkpoint version");
  }
  const std::size_t grid = get_le(in, 4, path);
  const std::size_t classes = get_le(in, 4, path);
  const std::size_t hidden = get_le(in, 4, path);
  const std::size_t ppc = get_le(in, 4, path);
  ReferenceModel m;
  try {
    m = ReferenceModel(grid, classes, hidden, ppc);
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  for (auto block : m.params().blocks()) {
    for (double& v : block) {
      const std::uint64_t bits = get_le(in, 8, path);
      std::memcpy(&v, &bits, sizeof(v));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes after parameters");
  }
  return m;
}

}  // namespace patchmix
