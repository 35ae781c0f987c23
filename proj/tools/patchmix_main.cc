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
// Command-line front end: the four training phases, evaluation with FGSM,
// and the toy decision-boundary demo.
//
// Exit codes: 0 success, 2 configuration or format error, 3 numeric failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "patchmix/boundary_demo.h"
#include "patchmix/config.h"
#include "patchmix/error.h"
#include "patchmix/evolution.h"
#include "patchmix/refmodel.h"
#include "patchmix/training.h"
#include "patchmix/workflow.h"

namespace fs = std::filesystem;
using namespace patchmix;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_threads) {
  cmd->add_option("--config", args.config, "Run configuration (JSON)")->required();
  cmd->add_option("--seed", args.seed, "Override the training and search seeds");
  if (with_threads) cmd->add_option("--threads", args.threads, "Parallel fitness evaluations");
}

// Loads the config, applies overrides and snapshots it into the run directory.
RunConfig prepare_run(const CommonArgs& args, RunPaths& paths) {
  RunConfig cfg = load_run_config(args.config);
  if (args.seed) override_seed(cfg, *args.seed);
  if (args.threads) {
    if (*args.threads == 0) throw ConfigError("--threads must be >= 1");
    cfg.threads = *args.threads;
  }
  paths.dir = cfg.output_dir;
  fs::create_directories(paths.dir);
  write_text_file(paths.config(), dump_run_config(cfg));
  return cfg;
}

int cmd_train_random(const CommonArgs& args) {
  RunPaths paths;
  const RunConfig cfg = prepare_run(args, paths);
  const auto [train, val] = load_datasets(cfg.dataset);
  const TrainResult r = train_random_patchmix(train, val, cfg.train);
  save_model(r.model, paths.f_t());
  write_metrics_csv(r.metrics, paths.f_t_metrics());
  const auto& last = r.metrics.back();
  std::cout << "f_T: val_top1=" << last.val_top1 << " val_patch_acc=" << last.val_patch_acc
            << " -> " << paths.f_t().string() << "\n";
  return 0;
}

// Mean Hamming distance of each active mask to a seeded hidden target.
FitnessFn toy_fitness(std::size_t classes, std::size_t grid_size, std::uint64_t seed) {
  const ClassPairIndex pairs(classes);
  std::vector<PatchMask> targets;
  SeededRng rng(seed, {stream_tag("toy_target")});
  for (std::size_t k = 0; k < pairs.pair_count(); ++k) {
    targets.push_back(sample_random_mask(grid_size, 1.0, rng));
  }
  return [targets](const Individual& ind, std::size_t) {
    double sum = 0.0;
    const auto active = ind.active_slots();
    for (std::size_t k : active) {
      for (std::size_t n = 0; n < targets[k].cell_count(); ++n) {
        sum += ind.masks[k][n] != targets[k][n];
      }
    }
    return active.empty() ? static_cast<double>(targets.front().cell_count())
                          : sum / static_cast<double>(active.size());
  };
}

int cmd_search(const CommonArgs& args, const std::string& fitness_kind) {
  RunPaths paths;
  const RunConfig cfg = prepare_run(args, paths);
  SearchResult result;
  std::size_t classes = 0;
  std::size_t grid = cfg.train.grid_size;
  if (fitness_kind == "toy") {
    classes = cfg.dataset.classes;
    result = run_search(cfg.search, classes, grid, toy_fitness(classes, grid, cfg.search.seed),
                        cfg.threads);
  } else if (fitness_kind == "model") {
    const auto [train, val] = load_datasets(cfg.dataset);
    if (!fs::exists(paths.f_t())) {
      throw ConfigError("search needs " + paths.f_t().string() + "; run train-random first");
    }
    const ReferenceModel f_t = load_model(paths.f_t());
    classes = val.class_count;
    grid = f_t.grid_size();
    result = search_with_model(f_t, val, cfg.search, cfg.threads);
  } else {
    throw ConfigError("--fitness must be model or toy");
  }
  const std::size_t n = cfg.search.active_limit(classes);
  write_text_file(paths.search_history(), format_history(result.history, classes));
  write_text_file(paths.population(), serialize_population(result.population, classes, grid, n));
  write_text_file(paths.best_individual(), serialize_individual(result.best, classes, grid, n));
  std::cout << "search: " << result.history.size() - 1 << " generations, best score "
            << format_double(*result.best.fitness) << " -> " << paths.best_individual().string()
            << "\n";
  return 0;
}

std::vector<GuidedSample> guided_set_from_run(const RunConfig& cfg, const RunPaths& paths,
                                              const Dataset& train) {
  const IndividualRecord rec = parse_individual(read_text_file(paths.best_individual()));
  if (rec.classes != train.class_count) {
    throw ConfigError("best individual has " + std::to_string(rec.classes) +
                      " classes, training set has " + std::to_string(train.class_count));
  }
  SeededRng rng(cfg.train.seed, {stream_tag("guided_set")});
  return generate_guided_set(rec.individual, train,
                             cfg.guided.guided_set_size.value_or(train.size()), rng);
}

int cmd_generate(const CommonArgs& args) {
  RunPaths paths;
  const RunConfig cfg = prepare_run(args, paths);
  const auto [train, val] = load_datasets(cfg.dataset);
  const auto guided = guided_set_from_run(cfg, paths, train);
  write_guided_manifest(guided, train.class_count, paths.guided_manifest());
  std::cout << "guided set: " << guided.size() << " samples -> "
            << paths.guided_manifest().string() << "\n";
  return 0;
}

int cmd_train_guided(const CommonArgs& args) {
  RunPaths paths;
  const RunConfig cfg = prepare_run(args, paths);
  const auto [train, val] = load_datasets(cfg.dataset);
  const auto guided = guided_set_from_run(cfg, paths, train);
  const TrainResult r = train_guided(train, val, guided, cfg.train, cfg.guided);
  save_model(r.model, paths.f_o());
  write_metrics_csv(r.metrics, paths.f_o_metrics());
  std::cout << "f_O: val_top1=" << r.metrics.back().val_top1 << " -> " << paths.f_o().string()
            << "\n";
  return 0;
}

int cmd_pipeline(const CommonArgs& args) {
  RunPaths paths;
  const RunConfig cfg = prepare_run(args, paths);
  const auto [train, val] = load_datasets(cfg.dataset);
  PipelineOptions opts;
  opts.run_dir = paths.dir;
  opts.threads = cfg.threads;
  opts.log = &std::cout;
  const PipelineResult r = run_guided_pipeline(train, val, cfg.train, cfg.search, cfg.guided, opts);
  std::cout << "f_T val_top1=" << format_double(r.f_t_eval.top1)
            << " f_O val_top1=" << format_double(r.f_o_eval.top1) << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& dataset_path,
             const std::string& attack, const std::vector<double>& epsilons) {
  const ReferenceModel model = load_model(model_path);
  const Dataset ds = load_any_dataset(dataset_path);
  if (ds.empty()) throw ConfigError("dataset " + dataset_path + " is empty");
  if (ds.class_count != model.class_count()) {
    throw ConfigError("model has " + std::to_string(model.class_count()) +
                      " classes, dataset has " + std::to_string(ds.class_count));
  }
  const ImageTensor& like = ds.images.front();
  model.check_input(like.width, like.height, like.channels);
  std::cout << "attack,epsilon,top1\n";
  std::cout << "none,0," << format_double(evaluate(model, ds).top1) << "\n";
  if (attack.empty()) return 0;
  if (attack != "fgsm") throw ConfigError("--attack must be fgsm");
  for (double eps : epsilons) {
    std::cout << "fgsm," << format_double(eps) << ","
              << format_double(adversarial_top1(model, ds, eps)) << "\n";
  }
  return 0;
}

int cmd_export_dataset(const CommonArgs& args, const std::string& train_out,
                       const std::string& val_out) {
  RunConfig cfg = load_run_config(args.config);
  const auto [train, val] = load_datasets(cfg.dataset);
  save_dataset(train, train_out);
  save_dataset(val, val_out);
  return 0;
}

int cmd_boundary_demo(const std::string& method, const std::string& out, std::uint64_t seed) {
  BoundaryDemoConfig cfg;
  cfg.method = parse_demo_method(method);
  cfg.seed = seed;
  const BoundaryDemoResult r = run_boundary_demo(cfg);
  write_boundary_csv(r.grid, out);
  std::cout << "boundary-demo " << method << ": " << r.grid.predictions.size() << " cells -> "
            << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PatchMix: grid-mask pairwise interpolation with patch supervision"};
  app.require_subcommand(1);

  CommonArgs train_args, search_args, gen_args, guided_args, pipe_args, export_args;
  add_common(app.add_subcommand("train-random", "Phase 1: train f_T with random PatchMix"),
             train_args, true);
  auto* search = app.add_subcommand("search", "Phase 2: evolutionary mask search");
  add_common(search, search_args, true);
  std::string fitness_kind = "model";
  search->add_option("--fitness", fitness_kind, "model (f_T in the run directory) or toy");
  add_common(app.add_subcommand("generate", "Phase 3: materialize the guided set"), gen_args,
             false);
  add_common(app.add_subcommand("train-guided", "Phase 4: train f_O"), guided_args, false);
  add_common(app.add_subcommand("pipeline", "All four phases"), pipe_args, true);

  auto* eval = app.add_subcommand("eval", "Clean and FGSM top-1 of a model checkpoint");
  std::string model_path, dataset_path, attack;
  std::vector<double> epsilons = {0.1, 0.2, 0.3};
  eval->add_option("--model", model_path, "Model checkpoint")->required();
  eval->add_option("--dataset", dataset_path, "Dataset checkpoint or CIFAR binary file")
      ->required();
  eval->add_option("--attack", attack, "Adversarial attack (fgsm)");
  eval->add_option("--epsilon", epsilons, "FGSM step sizes")->delimiter(',');

  auto* export_cmd = app.add_subcommand("export-dataset", "Write the configured splits as checkpoints");
  std::string train_out, val_out;
  export_cmd->add_option("--config", export_args.config, "Run configuration (JSON)")->required();
  export_cmd->add_option("--train-out", train_out)->required();
  export_cmd->add_option("--val-out", val_out)->required();

  auto* demo = app.add_subcommand("boundary-demo", "Decision boundary on the 2-D toy problem");
  std::string method, out;
  std::uint64_t demo_seed = 0;
  demo->add_option("--method", method, "none, mixup, cutmix, patchmix or guided")->required();
  demo->add_option("--out", out, "Output CSV")->required();
  demo->add_option("--seed", demo_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "train-random") return cmd_train_random(train_args);
    if (name == "search") return cmd_search(search_args, fitness_kind);
    if (name == "generate") return cmd_generate(gen_args);
    if (name == "train-guided") return cmd_train_guided(guided_args);
    if (name == "pipeline") return cmd_pipeline(pipe_args);
    if (name == "eval") return cmd_eval(model_path, dataset_path, attack, epsilons);
    if (name == "export-dataset") return cmd_export_dataset(export_args, train_out, val_out);
    if (name == "boundary-demo") return cmd_boundary_demo(method, out, demo_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
