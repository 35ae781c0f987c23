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
#ifndef PATCHMIX_MASKS_H_
#define PATCHMIX_MASKS_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "patchmix/rng.h"

namespace patchmix {

// P x P binary grid, row-major. Bit 1 selects the first image of a pair.
class PatchMask {
 public:
  PatchMask() = default;
  explicit PatchMask(std::size_t grid_size, std::uint8_t fill = 0);
  // Throws ConfigError unless bits.size() == grid_size^2 and bits are 0/1.
  PatchMask(std::size_t grid_size, std::vector<std::uint8_t> bits);

  std::size_t grid_size() const { return grid_size_; }
  std::size_t cell_count() const { return bits_.size(); }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::uint8_t at(std::size_t row, std::size_t col) const { return bits_[row * grid_size_ + col]; }
  void set(std::size_t row, std::size_t col, bool v) {
    bits_[row * grid_size_ + col] = v ? 1 : 0;
  }
  std::uint8_t operator[](std::size_t n) const { return bits_[n]; }
  void set(std::size_t n, bool v) { bits_[n] = v ? 1 : 0; }

  std::size_t popcount() const;
  PatchMask complement() const;
  PatchMask transposed() const;

  bool operator==(const PatchMask&) const = default;

 private:
  std::size_t grid_size_ = 0;
  std::vector<std::uint8_t> bits_;
};

// W x H binary mask constant over each (W/P) x (H/P) region.
struct PixelMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;  // row-major (row, column)

  std::uint8_t at(std::size_t row, std::size_t col) const { return bits[row * width + col]; }
};

// Each cell is round(Beta(alpha, alpha)).
PatchMask sample_random_mask(std::size_t grid_size, double alpha, SeededRng& rng);

// Throws ConfigError unless width and height are divisible by P.
PixelMask expand_to_pixel_mask(const PatchMask& mask, std::size_t width, std::size_t height);

// Majority vote per region; inverse of expand_to_pixel_mask.
PatchMask reduce_to_patch_mask(const PixelMask& pixels, std::size_t grid_size);

// popcount / P^2.
double mixing_ratio(const PatchMask& mask);

// "P=<n>" followed by P lines of P characters from {0,1}.
std::string serialize_mask(const PatchMask& mask);
PatchMask parse_mask(std::string_view text);

// Only the P rows of bits, newline-separated (no "P=" line, no trailing newline).
std::string serialize_mask_rows(const PatchMask& mask);
PatchMask parse_mask_rows(const std::vector<std::string>& rows);

}  // namespace patchmix

#endif  // PATCHMIX_MASKS_H_
