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
#include "patchmix/dataset.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "patchmix/error.h"
#include "patchmix/rng.h"

namespace patchmix {

namespace {

constexpr std::array<char, 4> kDatasetMagic = {'P', 'M', 'X', 'D'};
constexpr std::uint32_t kDatasetVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_le(std::istream& in, int bytes, const char* what) {
  unsigned char b[8] = {};
  if (!in.read(reinterpret_cast<char*>(b), bytes)) {
    throw FormatError(std::string("dataset checkpoint truncated reading ") + what);
  }
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Saturated color for hue in [0,1).
std::array<double, 3> hue_to_rgb(double hue) {
  std::array<double, 3> rgb{};
  for (int ch = 0; ch < 3; ++ch) {
    const double x = std::fmod(hue + 1.0 - ch / 3.0, 1.0);
    rgb[ch] = std::clamp(std::abs(x * 6.0 - 3.0) - 1.0, 0.0, 1.0);
  }
  return rgb;
}

}  // namespace

bool ImageTensor::valid() const {
  if (data.size() != width * height * channels) return false;
  return std::all_of(data.begin(), data.end(), [](float v) {
    return std::isfinite(v) && v >= 0.0f && v <= 1.0f;
  });
}

LabelVector one_hot(ClassId label, std::size_t class_count) {
  if (label >= class_count) {
    throw ConfigError("label " + std::to_string(label) + " out of range for " +
                      std::to_string(class_count) + " classes");
  }
  LabelVector v(class_count, 0.0);
  v[label] = 1.0;
  return v;
}

bool is_distribution(std::span<const double> probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= 1e-9;
}

void Dataset::validate() const {
  if (images.size() != labels.size()) {
    throw ConfigError("dataset has " + std::to_string(images.size()) + " images but " +
                      std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_count) {
      throw ConfigError("sample " + std::to_string(i) + " has label " +
                        std::to_string(labels[i]) + " >= class_count " +
                        std::to_string(class_count));
    }
    if (!images[i].same_shape(images.front())) {
      throw ConfigError("sample " + std::to_string(i) + " differs in shape from sample 0");
    }
  }
}

std::vector<std::vector<std::size_t>> Dataset::indices_by_class() const {
  std::vector<std::vector<std::size_t>> out(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.class_count = class_count;
  out.split = split;
  out.images.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.images.push_back(images.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

Dataset load_cifar_binary(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_all(path);
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of " + std::to_string(kCifarRecordBytes));
  }
  constexpr std::size_t kSide = 32;
  constexpr std::size_t kPlane = kSide * kSide;
  Dataset ds;
  ds.class_count = 10;
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  ds.images.reserve(n);
  ds.labels.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw FormatError(path.string() + ": record " + std::to_string(r) + " has label byte " +
                        std::to_string(rec[0]));
    }
    ImageTensor img(kSide, kSide, 3);
    const unsigned char* px = rec + 1;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t i = 0; i < kPlane; ++i) {
        img.at(i / kSide, i % kSide, ch) = static_cast<float>(px[ch * kPlane + i] / 255.0);
      }
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(rec[0]);
  }
  return ds;
}

Dataset synth_shapes(std::size_t class_count, std::size_t image_size,
                     std::size_t samples_per_class, std::uint64_t seed) {
  if (image_size < 16 || image_size % 4 != 0) {
    throw ConfigError("synth_shapes: image_size must be >= 16 and divisible by 4, got " +
                      std::to_string(image_size));
  }
  if (class_count < 2 || class_count > 16) {
    throw ConfigError("synth_shapes: class_count must be in [2, 16], got " +
                      std::to_string(class_count));
  }
  // Weak per-class tint and texture under strong noise: single patches are
  // often ambiguous while whole images remain separable.
  constexpr double kTint = 0.12;
  constexpr double kWave = 0.1;
  constexpr double kNoise = 0.25;
  Dataset ds;
  ds.class_count = class_count;
  ds.images.reserve(class_count * samples_per_class);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t k = 0; k < class_count; ++k) {
    const auto color = hue_to_rgb(static_cast<double>(k) / class_count);
    // Orientation and spatial frequency add a second, color-independent cue.
    const double theta = std::numbers::pi * static_cast<double>(k % 4) / 4.0;
    const double freq = 1.0 + static_cast<double>(k / 4) * 0.5;
    for (std::size_t s = 0; s < samples_per_class; ++s) {
      SeededRng rng(seed, {stream_tag("synth_shapes"), k, s});
      const double phase = rng.uniform() * two_pi;
      const double gain = 0.75 + 0.5 * rng.uniform();
      ImageTensor img(image_size, image_size, 3);
      for (std::size_t r = 0; r < image_size; ++r) {
        for (std::size_t c = 0; c < image_size; ++c) {
          const double u = (r * std::cos(theta) + c * std::sin(theta)) / 4.0;
          const double wave = std::sin(two_pi * freq * u + phase);
          for (std::size_t ch = 0; ch < 3; ++ch) {
            const double tint = kTint * gain * (color[ch] - 0.5);
            const double v = 0.5 + tint + kWave * wave + rng.normal(0.0, kNoise);
            img.at(r, c, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
          }
        }
      }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(static_cast<ClassId>(k));
    }
  }
  return ds;
}

std::vector<std::pair<double, double>> toy_2d_means() {
  return {{0.2, 0.25}, {0.8, 0.25}, {0.5, 0.8}};
}

Dataset toy_2d_three_class(std::size_t samples_per_class, std::uint64_t seed) {
  if (samples_per_class < 1) throw ConfigError("toy_2d_three_class: samples_per_class must be >= 1");
  constexpr double kStd = 0.06;
  const auto means = toy_2d_means();
  Dataset ds;
  ds.class_count = 3;
  for (std::size_t k = 0; k < 3; ++k) {
    SeededRng rng(seed, {stream_tag("toy_2d"), k});
    for (std::size_t s = 0; s < samples_per_class; ++s) {
      ImageTensor img(2, 1, 1);
      img.data[0] = static_cast<float>(std::clamp(rng.normal(means[k].first, kStd), 0.0, 1.0));
      img.data[1] = static_cast<float>(std::clamp(rng.normal(means[k].second, kStd), 0.0, 1.0));
      ds.images.push_back(std::move(img));
      ds.labels.push_back(static_cast<ClassId>(k));
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double val_fraction,
                                             std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction <= 1.0)) {
    throw ConfigError("val_fraction must be in [0,1]");
  }
  std::vector<std::size_t> train_idx, val_idx;
  const auto by_class = ds.indices_by_class();
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    const auto& members = by_class[k];
    SeededRng rng(seed, {stream_tag("split"), k});
    const auto perm = rng.permutation(members.size());
    std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * members.size()));
    if (n_val == 0 && val_fraction > 0.0 && !members.empty()) n_val = 1;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      (i < n_val ? val_idx : train_idx).push_back(members[perm[i]]);
    }
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  Dataset train = ds.subset(train_idx);
  Dataset val = ds.subset(val_idx);
  train.split = Split::kTrain;
  val.split = Split::kValidation;
  return {std::move(train), std::move(val)};
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  ds.validate();
  if (ds.class_count > 256) throw ConfigError("dataset checkpoint stores labels as bytes");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  const ImageTensor shape = ds.empty() ? ImageTensor() : ds.images.front();
  out.write(kDatasetMagic.data(), 4);
  put_u32(out, kDatasetVersion);
  put_u32(out, static_cast<std::uint32_t>(shape.width));
  put_u32(out, static_cast<std::uint32_t>(shape.height));
  put_u32(out, static_cast<std::uint32_t>(shape.channels));
  put_u32(out, static_cast<std::uint32_t>(ds.class_count));
  put_u64(out, ds.size());
  for (ClassId l : ds.labels) out.put(static_cast<char>(l));
  for (const auto& img : ds.images) {
    for (float v : img.data) {
      std::uint32_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(v));
      put_u32(out, bits);
    }
  }
  if (!out) throw ConfigError("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kDatasetMagic) {
    throw FormatError(path.string() + ": not a dataset checkpoint");
  }
  const auto version = get_le(in, 4, "version");
  if (version != kDatasetVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  }
  const std::size_t w = get_le(in, 4, "width");
  const std::size_t h = get_le(in, 4, "height");
  const std::size_t c = get_le(in, 4, "channels");
  Dataset ds;
  ds.class_count = get_le(in, 4, "class_count");
  const std::size_t n = get_le(in, 8, "sample count");
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<ClassId>(get_le(in, 1, "labels"));
  ds.images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ImageTensor img(w, h, c);
    for (float& v : img.data) {
      const auto bits = static_cast<std::uint32_t>(get_le(in, 4, "pixels"));
      std::memcpy(&v, &bits, sizeof(v));
    }
    ds.images.push_back(std::move(img));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes after pixel data");
  }
  try {
    ds.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return ds;
}

Dataset load_any_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (in.gcount() == 4 && magic == kDatasetMagic) return load_dataset(path);
  return load_cifar_binary(path);
}

}  // namespace patchmix
