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
#include "patchmix/masks.h"

#include <cmath>
#include <sstream>

#include "patchmix/error.h"

namespace patchmix {

PatchMask::PatchMask(std::size_t grid_size, std::uint8_t fill)
    : grid_size_(grid_size), bits_(grid_size * grid_size, fill ? 1 : 0) {}

PatchMask::PatchMask(std::size_t grid_size, std::vector<std::uint8_t> bits)
    : grid_size_(grid_size), bits_(std::move(bits)) {
  if (bits_.size() != grid_size_ * grid_size_) {
    throw ConfigError("mask with P=" + std::to_string(grid_size_) + " needs " +
                      std::to_string(grid_size_ * grid_size_) + " bits, got " +
                      std::to_string(bits_.size()));
  }
  for (auto b : bits_) {
    if (b > 1) throw ConfigError("mask bits must be 0 or 1");
  }
}

std::size_t PatchMask::popcount() const {
  std::size_t n = 0;
  for (auto b : bits_) n += b;
  return n;
}

PatchMask PatchMask::complement() const {
  PatchMask out = *this;
  for (auto& b : out.bits_) b ^= 1;
  return out;
}

PatchMask PatchMask::transposed() const {
  PatchMask out(grid_size_);
  for (std::size_t r = 0; r < grid_size_; ++r) {
    for (std::size_t c = 0; c < grid_size_; ++c) out.set(c, r, at(r, c));
  }
  return out;
}

PatchMask sample_random_mask(std::size_t grid_size, double alpha, SeededRng& rng) {
  if (grid_size < 1) throw ConfigError("grid size must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("Beta shape alpha must be > 0");
  PatchMask m(grid_size);
  for (std::size_t n = 0; n < m.cell_count(); ++n) {
    m.set(n, std::round(rng.beta(alpha, alpha)) >= 1.0);
  }
  return m;
}

PixelMask expand_to_pixel_mask(const PatchMask& mask, std::size_t width, std::size_t height) {
  const std::size_t p = mask.grid_size();
  if (p == 0 || width % p != 0 || height % p != 0) {
    throw ConfigError("image " + std::to_string(width) + "x" + std::to_string(height) +
                      " is not divisible into a " + std::to_string(p) + "x" +
                      std::to_string(p) + " grid");
  }
  PixelMask out{width, height, std::vector<std::uint8_t>(width * height)};
  for (std::size_t s = 0; s < height; ++s) {
    for (std::size_t t = 0; t < width; ++t) {
      out.bits[s * width + t] = mask.at(s * p / height, t * p / width);
    }
  }
  return out;
}

PatchMask reduce_to_patch_mask(const PixelMask& pixels, std::size_t grid_size) {
  if (grid_size == 0 || pixels.width % grid_size != 0 || pixels.height % grid_size != 0) {
    throw ConfigError("pixel mask is not divisible into the requested grid");
  }
  const std::size_t rh = pixels.height / grid_size;
  const std::size_t rw = pixels.width / grid_size;
  PatchMask m(grid_size);
  for (std::size_t r = 0; r < grid_size; ++r) {
    for (std::size_t c = 0; c < grid_size; ++c) {
      std::size_t ones = 0;
      for (std::size_t s = r * rh; s < (r + 1) * rh; ++s) {
        for (std::size_t t = c * rw; t < (c + 1) * rw; ++t) ones += pixels.at(s, t);
      }
      m.set(r, c, 2 * ones > rh * rw);
    }
  }
  return m;
}

double mixing_ratio(const PatchMask& mask) {
  if (mask.cell_count() == 0) return 0.0;
  return static_cast<double>(mask.popcount()) / static_cast<double>(mask.cell_count());
}

std::string serialize_mask_rows(const PatchMask& mask) {
  std::string out;
  const std::size_t p = mask.grid_size();
  out.reserve(p * (p + 1));
  for (std::size_t r = 0; r < p; ++r) {
    if (r > 0) out.push_back('\n');
    for (std::size_t c = 0; c < p; ++c) out.push_back(mask.at(r, c) ? '1' : '0');
  }
  return out;
}

std::string serialize_mask(const PatchMask& mask) {
  return "P=" + std::to_string(mask.grid_size()) + "\n" + serialize_mask_rows(mask);
}

PatchMask parse_mask_rows(const std::vector<std::string>& rows) {
  const std::size_t p = rows.size();
  if (p == 0) throw FormatError("mask has no rows");
  std::vector<std::uint8_t> bits;
  bits.reserve(p * p);
  for (std::size_t r = 0; r < p; ++r) {
    if (rows[r].size() != p) {
      throw FormatError("mask row " + std::to_string(r) + " has " +
                        std::to_string(rows[r].size()) + " characters, expected " +
                        std::to_string(p));
    }
    for (char ch : rows[r]) {
      if (ch != '0' && ch != '1') {
        throw FormatError("mask row " + std::to_string(r) + " contains '" + std::string(1, ch) +
                          "'");
      }
      bits.push_back(ch == '1' ? 1 : 0);
    }
  }
  return PatchMask(p, std::move(bits));
}

PatchMask parse_mask(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines.front().rfind("P=", 0) != 0) {
    throw FormatError("mask text must start with a P=<n> line");
  }
  std::size_t p = 0;
  try {
    std::size_t used = 0;
    p = std::stoul(lines.front().substr(2), &used);
    if (used != lines.front().size() - 2) throw FormatError("bad P line");
  } catch (const std::logic_error&) {
    throw FormatError("bad P line: " + lines.front());
  }
  if (p == 0 || lines.size() != p + 1) {
    throw FormatError("mask with P=" + std::to_string(p) + " needs " + std::to_string(p) +
                      " rows, got " + std::to_string(lines.size() - 1));
  }
  return parse_mask_rows({lines.begin() + 1, lines.end()});
}

}  // namespace patchmix
