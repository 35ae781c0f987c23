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
#include "patchmix/boundary_demo.h"

#include <algorithm>
#include <fstream>

#include "patchmix/error.h"
#include "patchmix/mixing.h"
#include "patchmix/training.h"
#include "patchmix/workflow.h"

namespace patchmix {

namespace {

constexpr std::size_t kDemoGrid = 2;

TrainConfig demo_train_config(const BoundaryDemoConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.epochs;
  t.batch_size = cfg.batch_size;
  t.grid_size = kDemoGrid;
  t.hidden = cfg.hidden;
  t.seed = cfg.seed;
  return t;
}

// Unmixed, Mixup or CutMix batches over in-batch random partners.
TrainResult train_pairwise(const Dataset& train, const TrainConfig& t, DemoMethod method) {
  const std::size_t n = train.size();
  const std::size_t batches = (n + t.batch_size - 1) / t.batch_size;
  std::vector<std::size_t> order;
  std::size_t order_epoch = static_cast<std::size_t>(-1);
  const BatchSource source = [&](std::size_t epoch, std::size_t b) {
    if (epoch != order_epoch) {
      SeededRng shuffle(t.seed, {stream_tag("demo"), stream_tag("shuffle"), epoch});
      order = shuffle.permutation(n);
      order_epoch = epoch;
    }
    const std::size_t begin = b * t.batch_size;
    const std::size_t len = std::min(n, begin + t.batch_size) - begin;
    SeededRng rng(t.seed, {stream_tag("demo"), stream_tag("batch"), epoch, b});
    const auto partner = rng.permutation(len);
    std::vector<MixedSample> out;
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t i = order[begin + k];
      const std::size_t j = order[begin + partner[k]];
      const ImageTensor& xi = train.images[i];
      const ImageTensor& xj = train.images[j];
      switch (method) {
        case DemoMethod::kMixup:
          out.push_back(mixup(xi, train.labels[i], xj, train.labels[j], rng.beta(1.0, 1.0),
                              train.class_count));
          break;
        case DemoMethod::kCutmix:
          // One feature column replaced.
          out.push_back(cutmix(xi, train.labels[i], xj, train.labels[j], rng, 1, 2,
                               train.class_count));
          break;
        default:
          out.push_back(unmixed(xi, train.labels[i], kDemoGrid, train.class_count));
          break;
      }
    }
    return out;
  };
  return run_training(initial_model(train, t), train, t, batches, source, LossMode::kImageOnly);
}

}  // namespace

DemoMethod parse_demo_method(const std::string& text) {
  if (text == "none") return DemoMethod::kNone;
  if (text == "mixup") return DemoMethod::kMixup;
  if (text == "cutmix") return DemoMethod::kCutmix;
  if (text == "patchmix") return DemoMethod::kPatchmix;
  if (text == "guided") return DemoMethod::kGuided;
  throw ConfigError("unknown method '" + text + "' (expected none, mixup, cutmix, patchmix, guided)");
}

std::string to_string(DemoMethod m) {
  switch (m) {
    case DemoMethod::kNone:
      return "none";
    case DemoMethod::kMixup:
      return "mixup";
    case DemoMethod::kCutmix:
      return "cutmix";
    case DemoMethod::kPatchmix:
      return "patchmix";
    case DemoMethod::kGuided:
      return "guided";
  }
  return "none";
}

double BoundaryGrid::x_at(std::size_t c) const {
  return resolution > 1 ? x_min + (x_max - x_min) * c / (resolution - 1) : x_min;
}

double BoundaryGrid::y_at(std::size_t r) const {
  return resolution > 1 ? y_min + (y_max - y_min) * r / (resolution - 1) : y_min;
}

// Column c carries feature c in channel c and zero in the other channel.
// The encoder is shared across patches, so a single channel would make the
// model blind to which feature it is looking at.
ImageTensor embed_toy_point(double f0, double f1) {
  ImageTensor img(2, 2, 2);
  for (std::size_t r = 0; r < 2; ++r) {
    img.at(r, 0, 0) = static_cast<float>(f0);
    img.at(r, 1, 1) = static_cast<float>(f1);
  }
  return img;
}

Dataset embed_toy_dataset(const Dataset& toy) {
  Dataset out;
  out.class_count = toy.class_count;
  out.split = toy.split;
  out.labels = toy.labels;
  for (const auto& img : toy.images) {
    if (img.width != 2 || img.height != 1 || img.channels != 1) {
      throw ConfigError("toy samples must be 1x2x1");
    }
    out.images.push_back(embed_toy_point(img.data[0], img.data[1]));
  }
  return out;
}

BoundaryDemoResult run_boundary_demo(const BoundaryDemoConfig& cfg) {
  if (cfg.resolution == 0) throw ConfigError("grid resolution must be >= 1");
  const Dataset toy = toy_2d_three_class(cfg.samples_per_class, cfg.seed);
  BoundaryDemoResult r;
  r.train = embed_toy_dataset(toy);
  const TrainConfig t = demo_train_config(cfg);

  switch (cfg.method) {
    case DemoMethod::kNone:
    case DemoMethod::kMixup:
    case DemoMethod::kCutmix:
      r.model = train_pairwise(r.train, t, cfg.method).model;
      break;
    case DemoMethod::kPatchmix:
      r.model = train_random_patchmix(r.train, r.train, t).model;
      break;
    case DemoMethod::kGuided: {
      SearchConfig s;
      s.population_size = 30;
      s.generations = 15;
      s.pairs_per_combo = 16;
      s.val_fraction = 1.0;
      s.seed = cfg.seed;
      r.model = run_guided_pipeline(r.train, r.train, t, s, GuidedConfig{}, PipelineOptions{}).f_o;
      break;
    }
  }

  BoundaryGrid& g = r.grid;
  g.resolution = cfg.resolution;
  g.x_min = g.y_min = 1.0;
  g.x_max = g.y_max = 0.0;
  for (const auto& img : toy.images) {
    g.x_min = std::min<double>(g.x_min, img.data[0]);
    g.x_max = std::max<double>(g.x_max, img.data[0]);
    g.y_min = std::min<double>(g.y_min, img.data[1]);
    g.y_max = std::max<double>(g.y_max, img.data[1]);
  }
  g.predictions.resize(cfg.resolution * cfg.resolution);
  for (std::size_t row = 0; row < cfg.resolution; ++row) {
    for (std::size_t col = 0; col < cfg.resolution; ++col) {
      const ModelOutputs out = r.model.forward(embed_toy_point(g.x_at(col), g.y_at(row)));
      g.predictions[row * cfg.resolution + col] = static_cast<ClassId>(argmax(out.image_logits));
    }
  }
  return r;
}

void write_boundary_csv(const BoundaryGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "x,y,predicted_class\n";
  for (std::size_t row = 0; row < grid.resolution; ++row) {
    for (std::size_t col = 0; col < grid.resolution; ++col) {
      out << format_double(grid.x_at(col)) << ',' << format_double(grid.y_at(row)) << ','
          << grid.predictions[row * grid.resolution + col] << '\n';
    }
  }
}

}  // namespace patchmix
