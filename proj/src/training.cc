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
#include "patchmix/training.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "patchmix/error.h"
#include "patchmix/masks.h"
#include "patchmix/rng.h"

namespace patchmix {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr0 > 0.0)) throw ConfigError("train.lr0 must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(alpha > 0.0)) throw ConfigError("train.alpha must be > 0");
  if (grid_size == 0) throw ConfigError("train.P must be >= 1");
  if (!(eta_min >= 0.0 && eta_min <= lr0)) throw ConfigError("train.eta_min must be in [0, lr0]");
  if (!(mix_probability >= 0.0 && mix_probability <= 1.0)) {
    throw ConfigError("train.mix_probability must be in [0,1]");
  }
  if (hidden == 0) throw ConfigError("train.hidden must be >= 1");
}

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::kBoth:
      return "both";
    case LossMode::kImageOnly:
      return "image_only";
    case LossMode::kPatchOnly:
      return "patch_only";
  }
  return "both";
}

LossMode parse_loss_mode(const std::string& text) {
  if (text == "both") return LossMode::kBoth;
  if (text == "image_only") return LossMode::kImageOnly;
  if (text == "patch_only") return LossMode::kPatchOnly;
  throw ConfigError("unknown loss_mode '" + text + "' (expected both, image_only, patch_only)");
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

EvalResult evaluate(const ReferenceModel& model, const Dataset& ds) {
  EvalResult r;
  if (ds.empty()) return r;
  std::size_t correct = 0;
  double patch_sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const ModelOutputs out = model.forward(ds.images[i]);
    if (argmax(out.image_logits) == ds.labels[i]) ++correct;
    const std::vector<ClassId> labels(out.patch_count, ds.labels[i]);
    patch_sum += patch_accuracy(out, labels);
  }
  r.top1 = static_cast<double>(correct) / static_cast<double>(ds.size());
  r.patch_acc = patch_sum / static_cast<double>(ds.size());
  return r;
}

double epoch_lr(const TrainConfig& cfg, std::size_t epoch) {
  const std::size_t span = cfg.epochs > 1 ? cfg.epochs - 1 : 1;
  return cosine_lr(std::min(epoch, span), span, cfg.lr0, cfg.eta_min);
}

TrainResult run_training(ReferenceModel model, const Dataset& val, const TrainConfig& cfg,
                         std::size_t batches_per_epoch, const BatchSource& source,
                         LossMode mode) {
  cfg.validate();
  TrainResult result;
  SgdState opt;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = epoch_lr(cfg, epoch);
    double loss_sum = 0.0;
    std::size_t loss_batches = 0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::vector<MixedSample> batch = source(epoch, b);
      if (batch.empty()) continue;
      BatchGradient g;
      try {
        g = backward(model, batch, mode);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                           ": " + e.what());
      }
      sgd_nesterov_step(model, g.params, opt, lr, cfg.momentum, cfg.weight_decay);
      if (!model.params().all_finite()) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                           ": parameters became non-finite after the update");
      }
      loss_sum += g.mean_loss;
      ++loss_batches;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.train_loss = loss_batches ? loss_sum / static_cast<double>(loss_batches) : 0.0;
    const EvalResult ev = evaluate(model, val);
    m.val_top1 = ev.top1;
    m.val_patch_acc = ev.patch_acc;
    result.metrics.push_back(m);
  }
  result.model = std::move(model);
  return result;
}

ReferenceModel initial_model(const Dataset& train, const TrainConfig& cfg) {
  if (train.empty()) throw ConfigError("training set is empty");
  SeededRng rng(cfg.seed, {stream_tag("model_init")});
  return ReferenceModel::for_images(train.images.front(), cfg.grid_size, train.class_count,
                                    cfg.hidden, rng);
}

TrainResult train_random_patchmix(const Dataset& train, const Dataset& val,
                                  const TrainConfig& cfg) {
  cfg.validate();
  train.validate();
  val.validate();
  if (!val.empty() && (val.class_count != train.class_count ||
                       !val.images.front().same_shape(train.images.front()))) {
    throw ConfigError("train and validation sets differ in shape or class count");
  }
  ReferenceModel model = initial_model(train, cfg);
  const std::size_t n = train.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<std::size_t> order;
  std::size_t order_epoch = static_cast<std::size_t>(-1);

  const BatchSource source = [&](std::size_t epoch, std::size_t b) {
    if (epoch != order_epoch) {
      SeededRng shuffle(cfg.seed, {stream_tag("random_patchmix"), stream_tag("shuffle"), epoch});
      order = shuffle.permutation(n);
      order_epoch = epoch;
    }
    const std::size_t begin = b * cfg.batch_size;
    const std::size_t end = std::min(n, begin + cfg.batch_size);
    const std::size_t len = end - begin;
    SeededRng rng(cfg.seed, {stream_tag("random_patchmix"), stream_tag("batch"), epoch, b});
    const std::vector<std::size_t> partner = rng.permutation(len);
    std::vector<MixedSample> out;
    out.reserve(len);
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t a = order[begin + k];
      const std::size_t c = order[begin + partner[k]];
      const bool mix = rng.bernoulli(cfg.mix_probability);
      const PatchMask mask = mix ? sample_random_mask(cfg.grid_size, cfg.alpha, rng)
                                 : PatchMask(cfg.grid_size, 1);
      out.push_back(patchmix(train.images[a], train.labels[a], train.images[c], train.labels[c],
                             mask, train.class_count));
    }
    return out;
  };
  return run_training(std::move(model), val, cfg, batches, source, cfg.loss_mode);
}

ImageTensor fgsm_attack(const ReferenceModel& model, const ImageTensor& image, ClassId label,
                        double epsilon) {
  if (!(epsilon >= 0.0)) throw ConfigError("FGSM epsilon must be >= 0");
  ImageTensor adv = image;
  if (epsilon == 0.0) return adv;
  const MixedSample s = unmixed(image, label, model.grid_size(), model.class_count());
  const BatchGradient g = backward(model, std::span<const MixedSample>(&s, 1), LossMode::kImageOnly);
  const std::vector<double>& grad = g.inputs.front();
  for (std::size_t k = 0; k < adv.data.size(); ++k) {
    const double step = grad[k] > 0.0 ? epsilon : (grad[k] < 0.0 ? -epsilon : 0.0);
    adv.data[k] = static_cast<float>(std::clamp(image.data[k] + step, 0.0, 1.0));
  }
  return adv;
}

double adversarial_top1(const ReferenceModel& model, const Dataset& ds, double epsilon) {
  if (ds.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const ImageTensor adv = fgsm_attack(model, ds.images[i], ds.labels[i], epsilon);
    if (argmax(model.forward(adv).image_logits) == ds.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

void write_metrics_csv(const std::vector<EpochMetrics>& metrics,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "epoch,lr,train_loss,val_top1,val_patch_acc\n";
  for (const auto& m : metrics) {
    out << m.epoch << ',' << format_double(m.lr) << ',' << format_double(m.train_loss) << ','
        << format_double(m.val_top1) << ',' << format_double(m.val_patch_acc) << '\n';
  }
}

}  // namespace patchmix
