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
#include "patchmix/workflow.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "patchmix/error.h"
#include "patchmix/masks.h"

namespace patchmix {

namespace {

template <typename Fn>
auto in_phase(const char* phase, Fn&& fn) -> decltype(fn()) {
  const std::string prefix = std::string(phase) + ": ";
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const FormatError& e) {
    throw FormatError(prefix + e.what());
  } catch (const NumericError& e) {
    throw NumericError(prefix + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(prefix + e.what());
  }
}

void log_line(const PipelineOptions& opts, const std::string& line) {
  if (opts.log != nullptr) *opts.log << line << '\n';
}

}  // namespace

void GuidedConfig::validate() const {
  double sum = 0.0;
  for (double r : ratio) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("guided.ratio entries must be >= 0");
    sum += r;
  }
  if (sum <= 0.0) throw ConfigError("guided.ratio must not be all zero");
}

GuidedPlan make_guided_plan(const Individual& best, const GuidedConfig& cfg) {
  cfg.validate();
  const double sum = cfg.ratio[0] + cfg.ratio[1] + cfg.ratio[2];
  return {best, cfg.ratio[2] / sum};
}

std::vector<GuidedSample> generate_guided_set(const Individual& ind, const Dataset& train,
                                              std::size_t count, SeededRng& rng) {
  const ClassPairIndex pairs(train.class_count);
  if (ind.head.size() != pairs.pair_count()) {
    throw ConfigError("individual does not match the training set's class count");
  }
  const auto active = ind.active_slots();
  if (active.empty()) throw ConfigError("individual has no active class pairs");
  const auto by_class = train.indices_by_class();
  for (std::size_t k : active) {
    const auto [ci, cj] = pairs.pair_at(k);
    for (std::size_t c : {ci, cj}) {
      if (by_class[c].empty()) {
        throw ConfigError("class " + std::to_string(c) + " has no training samples");
      }
    }
  }
  std::vector<GuidedSample> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    GuidedSample g;
    g.slot = active[rng.below(active.size())];
    const auto [ci, cj] = pairs.pair_at(g.slot);
    g.first_index = by_class[ci][rng.below(by_class[ci].size())];
    g.second_index = by_class[cj][rng.below(by_class[cj].size())];
    g.sample = patchmix(train.images[g.first_index], static_cast<ClassId>(ci),
                        train.images[g.second_index], static_cast<ClassId>(cj),
                        ind.masks[g.slot], train.class_count);
    out.push_back(std::move(g));
  }
  return out;
}

BatchComposition compose_batch(std::size_t batch_size, const std::array<double, 3>& ratio) {
  GuidedConfig{ratio, std::nullopt}.validate();
  const double sum = ratio[0] + ratio[1] + ratio[2];
  const double b = static_cast<double>(batch_size);
  BatchComposition c;
  c.random = static_cast<std::size_t>(std::floor(b * ratio[1] / sum));
  c.guided = static_cast<std::size_t>(std::floor(b * ratio[2] / sum));
  c.original = batch_size - c.random - c.guided;
  return c;
}

RandomMixer random_patchmix_mixer(const Dataset& train, std::size_t grid_size, double alpha) {
  if (train.empty()) throw ConfigError("training set is empty");
  return [&train, grid_size, alpha](SeededRng& rng) {
    const std::size_t a = rng.below(train.size());
    const std::size_t b = rng.below(train.size());
    const PatchMask mask = sample_random_mask(grid_size, alpha, rng);
    return patchmix(train.images[a], train.labels[a], train.images[b], train.labels[b], mask,
                    train.class_count);
  };
}

GuidedBatchComposer::GuidedBatchComposer(const Dataset& train, RandomMixer random_mixer,
                                         const std::vector<GuidedSample>& guided,
                                         const std::array<double, 3>& ratio,
                                         std::size_t batch_size, std::size_t grid_size,
                                         std::uint64_t seed)
    : train_(train),
      random_mixer_(std::move(random_mixer)),
      guided_(guided),
      composition_(compose_batch(batch_size, ratio)),
      grid_size_(grid_size),
      seed_(seed) {
  if (train.empty()) throw ConfigError("training set is empty");
  if (composition_.guided > 0 && guided.empty()) {
    throw ConfigError("batch ratio asks for guided samples but the guided set is empty");
  }
  if (composition_.random > 0 && !random_mixer_) {
    throw ConfigError("batch ratio asks for random mixes but no mixer was given");
  }
  // One epoch visits every original sample once (or, without originals, as
  // many samples as the training set holds).
  const std::size_t per_batch =
      composition_.original > 0 ? composition_.original : std::max<std::size_t>(1, batch_size);
  batches_per_epoch_ = (train.size() + per_batch - 1) / per_batch;
}

void GuidedBatchComposer::reshuffle(std::size_t epoch) {
  if (epoch == epoch_) return;
  SeededRng rng(seed_, {stream_tag("composer"), stream_tag("shuffle"), epoch});
  original_order_ = rng.permutation(train_.size());
  guided_order_ = rng.permutation(guided_.size());
  epoch_ = epoch;
}

std::vector<MixedSample> GuidedBatchComposer::batch(std::size_t epoch, std::size_t index) {
  reshuffle(epoch);
  std::vector<MixedSample> out;
  out.reserve(composition_.original + composition_.random + composition_.guided);
  for (std::size_t k = 0; k < composition_.original; ++k) {
    const std::size_t pos = (index * composition_.original + k) % original_order_.size();
    const std::size_t i = original_order_[pos];
    out.push_back(unmixed(train_.images[i], train_.labels[i], grid_size_, train_.class_count));
  }
  SeededRng rng(seed_, {stream_tag("composer"), stream_tag("random"), epoch, index});
  for (std::size_t k = 0; k < composition_.random; ++k) out.push_back(random_mixer_(rng));
  for (std::size_t k = 0; k < composition_.guided; ++k) {
    const std::size_t pos = (index * composition_.guided + k) % guided_order_.size();
    out.push_back(guided_[guided_order_[pos]].sample);
  }
  return out;
}

Dataset fitness_subset(const Dataset& val, const SearchConfig& cfg) {
  return stratified_split(val, cfg.val_fraction, cfg.seed).second;
}

SearchResult search_with_model(const ReferenceModel& f_t, const Dataset& val,
                               const SearchConfig& cfg, std::size_t threads) {
  if (f_t.class_count() != val.class_count) {
    throw ConfigError("fitness model has " + std::to_string(f_t.class_count()) +
                      " classes, validation set has " + std::to_string(val.class_count));
  }
  const Dataset subset = fitness_subset(val, cfg);
  const FitnessFn fitness = [&](const Individual& ind, std::size_t generation) {
    return evaluate_fitness(ind, f_t, subset, cfg, generation);
  };
  return run_search(cfg, val.class_count, f_t.grid_size(), fitness, threads);
}

TrainResult train_guided(const Dataset& train, const Dataset& val,
                         const std::vector<GuidedSample>& guided, const TrainConfig& cfg,
                         const GuidedConfig& guided_cfg) {
  cfg.validate();
  guided_cfg.validate();
  GuidedBatchComposer composer(train, random_patchmix_mixer(train, cfg.grid_size, cfg.alpha),
                               guided, guided_cfg.ratio, cfg.batch_size, cfg.grid_size, cfg.seed);
  ReferenceModel model = initial_model(train, cfg);
  const BatchSource source = [&composer](std::size_t epoch, std::size_t b) {
    return composer.batch(epoch, b);
  };
  return run_training(std::move(model), val, cfg, composer.batches_per_epoch(), source,
                      LossMode::kImageOnly);
}

void write_guided_manifest(const std::vector<GuidedSample>& guided, std::size_t classes,
                           const std::filesystem::path& path) {
  const ClassPairIndex pairs(classes);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "index,pair,first_index,second_index,lambda\n";
  for (std::size_t n = 0; n < guided.size(); ++n) {
    const auto [i, j] = pairs.pair_at(guided[n].slot);
    out << n << ',' << i << '-' << j << ',' << guided[n].first_index << ','
        << guided[n].second_index << ',' << format_double(guided[n].sample.lambda) << '\n';
  }
}

PipelineResult run_guided_pipeline(const Dataset& train, const Dataset& val,
                                   const TrainConfig& train_cfg, const SearchConfig& search_cfg,
                                   const GuidedConfig& guided_cfg, const PipelineOptions& opts) {
  train_cfg.validate();
  search_cfg.validate(train.class_count);
  guided_cfg.validate();
  std::optional<RunPaths> paths;
  if (opts.run_dir) {
    paths = RunPaths{*opts.run_dir};
    std::filesystem::create_directories(paths->dir);
  }
  PipelineResult r;

  in_phase("phase 1 (random PatchMix)", [&] {
    if (paths && std::filesystem::exists(paths->f_t())) {
      r.f_t = load_model(paths->f_t());
      r.f_t.check_input(train.images.front().width, train.images.front().height,
                        train.images.front().channels);
      r.phase1_skipped = true;
      log_line(opts, "phase 1 skipped: reusing " + paths->f_t().string());
    } else {
      log_line(opts, "phase 1: training f_T with random PatchMix");
      TrainResult t = train_random_patchmix(train, val, train_cfg);
      r.f_t = std::move(t.model);
      r.f_t_metrics = std::move(t.metrics);
      if (paths) {
        save_model(r.f_t, paths->f_t());
        write_metrics_csv(r.f_t_metrics, paths->f_t_metrics());
      }
    }
    r.f_t_eval = evaluate(r.f_t, val);
  });

  in_phase("phase 2 (search)", [&] {
    log_line(opts, "phase 2: searching class-pair masks");
    r.search = search_with_model(r.f_t, val, search_cfg, opts.threads);
    r.plan = make_guided_plan(r.search.best, guided_cfg);
    if (paths) {
      const std::size_t n = search_cfg.active_limit(train.class_count);
      write_text_file(paths->search_history(), format_history(r.search.history, train.class_count));
      write_text_file(paths->population(), serialize_population(r.search.population,
                                                                train.class_count,
                                                                r.f_t.grid_size(), n));
      write_text_file(paths->best_individual(),
                      serialize_individual(r.search.best, train.class_count, r.f_t.grid_size(), n));
    }
  });

  std::vector<GuidedSample> guided;
  in_phase("phase 3 (guided set)", [&] {
    log_line(opts, "phase 3: generating the guided set");
    SeededRng rng(train_cfg.seed, {stream_tag("guided_set")});
    guided = generate_guided_set(r.search.best, train,
                                 guided_cfg.guided_set_size.value_or(train.size()), rng);
    if (paths) write_guided_manifest(guided, train.class_count, paths->guided_manifest());
  });

  in_phase("phase 4 (guided training)", [&] {
    log_line(opts, "phase 4: training f_O");
    TrainResult t = train_guided(train, val, guided, train_cfg, guided_cfg);
    r.f_o = std::move(t.model);
    r.f_o_metrics = std::move(t.metrics);
    r.f_o_eval = evaluate(r.f_o, val);
    if (paths) {
      save_model(r.f_o, paths->f_o());
      write_metrics_csv(r.f_o_metrics, paths->f_o_metrics());
      std::ofstream out(paths->summary());
      out << "model,val_top1,val_patch_acc\n"
          << "f_T," << format_double(r.f_t_eval.top1) << ',' << format_double(r.f_t_eval.patch_acc)
          << '\n'
          << "f_O," << format_double(r.f_o_eval.top1) << ',' << format_double(r.f_o_eval.patch_acc)
          << '\n';
    }
  });
  return r;
}

}  // namespace patchmix
