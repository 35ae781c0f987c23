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
#include "patchmix/config.h"

#include <set>

#include "json.hpp"
#include "patchmix/error.h"

namespace patchmix {

namespace {

using nlohmann::json;

// Reads fields out of one JSON object, tracking which keys were consumed.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<long long>() >= 0)) {
          throw ConfigError("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError("key " + key_path(key) + " has the wrong type");
    }
  }

  template <typename T>
  void read_optional(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) {
      out.reset();
      return;
    }
    T v{};
    read(key, v);
    out = v;
  }

  bool has(const std::string& key) const {
    auto it = obj_.find(key);
    return it != obj_.end() && !it->is_null();
  }

  const json& child(const std::string& key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    auto it = obj_.find(key);
    return it == obj_.end() ? kEmpty : *it;
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + key_path(it.key()));
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::kSynth:
      return "synth";
    case DatasetKind::kCifar:
      return "cifar";
    case DatasetKind::kCheckpoint:
      return "checkpoint";
  }
  return "synth";
}

DatasetKind parse_kind(const std::string& s) {
  if (s == "synth") return DatasetKind::kSynth;
  if (s == "cifar") return DatasetKind::kCifar;
  if (s == "checkpoint") return DatasetKind::kCheckpoint;
  throw ConfigError("dataset.kind must be synth, cifar or checkpoint, got '" + s + "'");
}

void require_file(const std::string& path, const char* key) {
  if (path.empty()) throw ConfigError(std::string("missing key ") + key);
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError(std::string(key) + " does not name a file: " + path);
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section top(root, "");

  Section ds(top.child("dataset"), "dataset");
  std::string kind = kind_name(cfg.dataset.kind);
  ds.read("kind", kind);
  cfg.dataset.kind = parse_kind(kind);
  ds.read("classes", cfg.dataset.classes);
  ds.read("image_size", cfg.dataset.image_size);
  ds.read("samples_per_class", cfg.dataset.samples_per_class);
  ds.read("val_samples_per_class", cfg.dataset.val_samples_per_class);
  ds.read("seed", cfg.dataset.seed);
  ds.read("train_path", cfg.dataset.train_path);
  ds.read("val_path", cfg.dataset.val_path);
  ds.reject_unknown();
  if (cfg.dataset.kind != DatasetKind::kSynth) {
    if (!ds.has("train_path")) throw ConfigError("missing key dataset.train_path");
    if (!ds.has("val_path")) throw ConfigError("missing key dataset.val_path");
  }

  Section tr(top.child("train"), "train");
  TrainConfig& t = cfg.train;
  tr.read("epochs", t.epochs);
  tr.read("batch_size", t.batch_size);
  tr.read("lr0", t.lr0);
  tr.read("momentum", t.momentum);
  tr.read("weight_decay", t.weight_decay);
  tr.read("alpha", t.alpha);
  tr.read("P", t.grid_size);
  tr.read("eta_min", t.eta_min);
  std::string mode = to_string(t.loss_mode);
  tr.read("loss_mode", mode);
  t.loss_mode = parse_loss_mode(mode);
  tr.read("mix_probability", t.mix_probability);
  tr.read("hidden", t.hidden);
  tr.read("seed", t.seed);
  tr.reject_unknown();
  t.validate();

  Section se(top.child("search"), "search");
  SearchConfig& s = cfg.search;
  se.read("population_size", s.population_size);
  se.read("generations", s.generations);
  se.read("crossover_prob", s.crossover_prob);
  se.read("mutation_prob", s.mutation_prob);
  se.read("tournament_size", s.tournament_size);
  se.read_optional("N", s.max_active);
  se.read("force_same_class", s.force_same_class);
  std::string objective = to_string(s.objective);
  se.read("objective", objective);
  s.objective = parse_objective(objective);
  se.read("pairs_per_combo", s.pairs_per_combo);
  se.read("val_fraction", s.val_fraction);
  se.read("patience", s.patience);
  se.read("seed", s.seed);
  se.reject_unknown();
  // File-backed datasets are checked once their class count is known.
  if (cfg.dataset.kind == DatasetKind::kSynth) s.validate(cfg.dataset.classes);

  Section gu(top.child("guided"), "guided");
  if (gu.has("ratio")) {
    const json& r = top.child("guided").at("ratio");
    if (!r.is_array() || r.size() != 3 || !r[0].is_number() || !r[1].is_number() ||
        !r[2].is_number()) {
      throw ConfigError("key guided.ratio must be an array of three numbers");
    }
    for (std::size_t i = 0; i < 3; ++i) cfg.guided.ratio[i] = r[i].get<double>();
  }
  gu.child("ratio");
  gu.read_optional("guided_set_size", cfg.guided.guided_set_size);
  gu.reject_unknown();
  cfg.guided.validate();

  top.read("output_dir", cfg.output_dir);
  top.read("threads", cfg.threads);
  top.reject_unknown();
  if (cfg.threads == 0) throw ConfigError("threads must be >= 1");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path));
}

std::string dump_run_config(const RunConfig& cfg) {
  json root;
  json& ds = root["dataset"];
  ds["kind"] = kind_name(cfg.dataset.kind);
  ds["classes"] = cfg.dataset.classes;
  ds["image_size"] = cfg.dataset.image_size;
  ds["samples_per_class"] = cfg.dataset.samples_per_class;
  ds["val_samples_per_class"] = cfg.dataset.val_samples_per_class;
  ds["seed"] = cfg.dataset.seed;
  if (cfg.dataset.kind != DatasetKind::kSynth) {
    ds["train_path"] = cfg.dataset.train_path;
    ds["val_path"] = cfg.dataset.val_path;
  }
  const TrainConfig& t = cfg.train;
  root["train"] = {{"epochs", t.epochs},
                   {"batch_size", t.batch_size},
                   {"lr0", t.lr0},
                   {"momentum", t.momentum},
                   {"weight_decay", t.weight_decay},
                   {"alpha", t.alpha},
                   {"P", t.grid_size},
                   {"eta_min", t.eta_min},
                   {"loss_mode", to_string(t.loss_mode)},
                   {"mix_probability", t.mix_probability},
                   {"hidden", t.hidden},
                   {"seed", t.seed}};
  const SearchConfig& s = cfg.search;
  root["search"] = {{"population_size", s.population_size},
                    {"generations", s.generations},
                    {"crossover_prob", s.crossover_prob},
                    {"mutation_prob", s.mutation_prob},
                    {"tournament_size", s.tournament_size},
                    {"N", s.max_active ? json(*s.max_active) : json(nullptr)},
                    {"force_same_class", s.force_same_class},
                    {"objective", to_string(s.objective)},
                    {"pairs_per_combo", s.pairs_per_combo},
                    {"val_fraction", s.val_fraction},
                    {"patience", s.patience},
                    {"seed", s.seed}};
  root["guided"] = {{"ratio", cfg.guided.ratio},
                    {"guided_set_size", cfg.guided.guided_set_size
                                            ? json(*cfg.guided.guided_set_size)
                                            : json(nullptr)}};
  root["output_dir"] = cfg.output_dir;
  root["threads"] = cfg.threads;
  return root.dump(2) + "\n";
}

void override_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.train.seed = seed;
  cfg.search.seed = seed;
}

std::pair<Dataset, Dataset> load_datasets(const DatasetConfig& cfg) {
  std::pair<Dataset, Dataset> out;
  switch (cfg.kind) {
    case DatasetKind::kSynth:
      out.first = synth_shapes(cfg.classes, cfg.image_size, cfg.samples_per_class, cfg.seed);
      out.second = synth_shapes(cfg.classes, cfg.image_size, cfg.val_samples_per_class,
                                cfg.seed ^ stream_tag("validation"));
      break;
    case DatasetKind::kCifar:
      require_file(cfg.train_path, "dataset.train_path");
      require_file(cfg.val_path, "dataset.val_path");
      out.first = load_cifar_binary(cfg.train_path);
      out.second = load_cifar_binary(cfg.val_path);
      break;
    case DatasetKind::kCheckpoint:
      require_file(cfg.train_path, "dataset.train_path");
      require_file(cfg.val_path, "dataset.val_path");
      out.first = load_dataset(cfg.train_path);
      out.second = load_dataset(cfg.val_path);
      break;
  }
  out.first.split = Split::kTrain;
  out.second.split = Split::kValidation;
  if (out.first.empty()) throw ConfigError("training set is empty");
  return out;
}

}  // namespace patchmix
