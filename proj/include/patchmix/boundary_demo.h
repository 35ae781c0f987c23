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
#ifndef PATCHMIX_BOUNDARY_DEMO_H_
#define PATCHMIX_BOUNDARY_DEMO_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "patchmix/dataset.h"
#include "patchmix/refmodel.h"

namespace patchmix {

enum class DemoMethod { kNone, kMixup, kCutmix, kPatchmix, kGuided };

DemoMethod parse_demo_method(const std::string& text);
std::string to_string(DemoMethod m);

struct BoundaryDemoConfig {
  DemoMethod method = DemoMethod::kNone;
  std::uint64_t seed = 0;
  std::size_t samples_per_class = 100;
  std::size_t epochs = 100;
  std::size_t batch_size = 30;
  std::size_t hidden = 32;
  std::size_t resolution = 200;
};

// Predictions over a resolution x resolution grid spanning the data's
// bounding box. Cell (r, c) sits at x = x_min + c * dx, y = y_min + r * dy.
struct BoundaryGrid {
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  std::size_t resolution = 0;
  std::vector<ClassId> predictions;  // row-major over (y index, x index)

  double x_at(std::size_t c) const;
  double y_at(std::size_t r) const;
};

// A toy point (f0, f1) as a 2x2 two-channel image whose columns hold the
// two features, so a P=2 mask selects features column-wise.
ImageTensor embed_toy_point(double f0, double f1);
Dataset embed_toy_dataset(const Dataset& toy);

struct BoundaryDemoResult {
  Dataset train;  // the embedded toy training set
  ReferenceModel model;
  BoundaryGrid grid;
};

BoundaryDemoResult run_boundary_demo(const BoundaryDemoConfig& cfg);

// Header "x,y,predicted_class", then one row per grid cell.
void write_boundary_csv(const BoundaryGrid& grid, const std::filesystem::path& path);

}  // namespace patchmix

#endif  // PATCHMIX_BOUNDARY_DEMO_H_
