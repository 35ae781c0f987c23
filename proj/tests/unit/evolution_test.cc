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
#include <algorithm>
#include <cmath>
#include <limits>
#include <array>
#include <stdexcept>

#include "doctest.h"
#include "oracles.h"
#include "patchmix/error.h"
#include "patchmix/evolution.h"

using namespace patchmix;

namespace {

Individual make_individual(std::size_t classes, std::size_t grid, std::vector<std::size_t> active,
                           std::uint8_t fill) {
  const ClassPairIndex pairs(classes);
  Individual ind;
  ind.head.assign(pairs.pair_count(), 0);
  for (std::size_t k : active) ind.head[k] = 1;
  ind.masks.assign(pairs.pair_count(), PatchMask(grid, fill));
  return ind;
}

SearchConfig small_config(std::size_t population, std::uint64_t seed) {
  SearchConfig cfg;
  cfg.population_size = population;
  cfg.seed = seed;
  return cfg;
}

// Validation set whose images encode their class as a constant brightness.
Dataset coded_val(std::size_t classes, std::size_t per_class, std::size_t side) {
  Dataset ds;
  ds.class_count = classes;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s) {
      ImageTensor img(side, side, 1, static_cast<float>(c + 1) / static_cast<float>(classes + 1));
      img.at(0, 0, 0) += static_cast<float>(s) * 1e-4f;  // distinct samples
      ds.images.push_back(img);
      ds.labels.push_back(static_cast<ClassId>(c));
    }
  }
  return ds;
}

ClassId decode_class(float v, std::size_t classes) {
  return static_cast<ClassId>(std::lround(v * static_cast<float>(classes + 1)) - 1);
}

ModelOutputs stub_outputs(std::size_t p, std::size_t classes) {
  ModelOutputs out;
  out.patch_count = p * p;
  out.class_count = classes;
  out.patch_logits.assign(p * p * classes, 0.0);
  out.image_logits.assign(classes, 0.0);
  return out;
}

// Reads each patch's brightness and predicts its true class.
Predictor oracle_stub(std::size_t p, std::size_t classes) {
  return [=](const ImageTensor& img) {
    ModelOutputs out = stub_outputs(p, classes);
    const std::size_t cell = img.width / p;
    for (std::size_t n = 0; n < p * p; ++n) {
      const float v = img.at((n / p) * cell + cell / 2, (n % p) * cell + cell / 2, 0);
      out.patch_logits[n * classes + decode_class(v, classes)] = 5.0;
    }
    return out;
  };
}

// Predicts class 0 for every patch.
Predictor constant_stub(std::size_t p, std::size_t classes) {
  return [=](const ImageTensor&) {
    ModelOutputs out = stub_outputs(p, classes);
    for (std::size_t n = 0; n < p * p; ++n) out.patch_logits[n * classes] = 5.0;
    return out;
  };
}

FitnessFn hamming_to(const PatchMask& target) {
  return [target](const Individual& ind, std::size_t) {
    const std::size_t k = ind.active_slots().front();
    double d = 0.0;
    for (std::size_t n = 0; n < target.cell_count(); ++n) d += ind.masks[k][n] != target[n];
    return d;
  };
}

std::size_t hamming(const PatchMask& a, const PatchMask& b) {
  std::size_t d = 0;
  for (std::size_t n = 0; n < a.cell_count(); ++n) d += a[n] != b[n];
  return d;
}

}  // namespace

TEST_CASE("class pair index is a bijection onto the upper triangle") {
  for (std::size_t c = 1; c <= 12; ++c) {
    const ClassPairIndex idx(c);
    CHECK(idx.pair_count() == c * (c + 1) / 2);
    std::size_t k = 0;
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = i; j < c; ++j, ++k) {
        CHECK(idx.index_of(i, j) == k);
        CHECK(idx.index_of(j, i) == k);
        CHECK(idx.pair_at(k) == std::make_pair(i, j));
        CHECK(idx.is_same_class(k) == (i == j));
      }
    }
  }
  CHECK(ClassPairIndex(10).pair_count() == 55);
  CHECK_THROWS_AS(ClassPairIndex(3).index_of(0, 3), ConfigError);
}

TEST_CASE("init_population") {
  SearchConfig cfg = small_config(500, 3);
  SeededRng a(3), b(3);
  const auto pop = init_population(cfg, 10, 4, a);
  CHECK(pop.size() == 500);
  for (const auto& ind : pop) {
    CHECK(ind.head.size() == 55);
    CHECK(ind.masks.size() == 55);
    CHECK(ind.active_count() == 10);
    CHECK(!ind.fitness);
  }
  const auto again = init_population(cfg, 10, 4, b);
  for (std::size_t i = 0; i < pop.size(); ++i) CHECK(pop[i].same_genome(again[i]));

  cfg.population_size = 50;
  cfg.force_same_class = true;
  cfg.max_active = 13;
  const ClassPairIndex idx(10);
  for (const auto& ind : init_population(cfg, 10, 4, a)) {
    CHECK(ind.active_count() == 13);
    for (std::size_t c = 0; c < 10; ++c) CHECK(ind.head[idx.index_of(c, c)] == 1);
  }

  cfg.max_active = 56;
  CHECK_THROWS_AS(init_population(cfg, 10, 4, a), ConfigError);
  cfg.force_same_class = true;
  cfg.max_active = 5;
  CHECK_THROWS_AS(init_population(cfg, 10, 4, a), ConfigError);
}

TEST_CASE("initial mask bits are fair") {
  SeededRng rng(4);
  const auto pop = init_population(small_config(200, 4), 3, 4, rng);
  std::size_t ones = 0, cells = 0;
  for (const auto& ind : pop)
    for (const auto& m : ind.masks) {
      ones += m.popcount();
      cells += m.cell_count();
    }
  const auto [lo, hi] = oracle::binomial_interval(cells, 0.5, 3.29);
  CHECK(static_cast<double>(ones) / cells >= lo);
  CHECK(static_cast<double>(ones) / cells <= hi);
}

TEST_CASE("repair enforces the head constraints") {
  SeededRng rng(5);
  SearchConfig cfg = small_config(1, 5);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t c = 2 + rng.below(8);
    const ClassPairIndex idx(c);
    cfg.max_active = 1 + rng.below(c);
    cfg.force_same_class = false;
    Individual ind = make_individual(c, 2, {}, 0);
    const std::size_t n = *cfg.max_active;
    const std::size_t extra = std::min<std::size_t>(3, idx.pair_count() - n);
    for (std::size_t k : rng.permutation(idx.pair_count())) {
      if (ind.active_count() == n + extra) break;
      ind.head[k] = 1;
    }
    ind.fitness = 1.0;
    repair(ind, cfg, c, rng);
    CHECK(ind.active_count() == n);
    CHECK((extra == 0 || !ind.fitness));
  }

  Individual ok = make_individual(3, 2, {0, 4}, 1);
  ok.fitness = 0.5;
  const Individual before = ok;
  repair(ok, small_config(1, 0), 3, rng);
  CHECK(ok.same_genome(before));
  CHECK(ok.fitness == 0.5);

  cfg = small_config(1, 0);
  cfg.force_same_class = true;
  cfg.max_active = 4;
  Individual f = make_individual(3, 2, {1, 2, 4}, 0);  // (0,1) (0,2) (1,1)
  repair(f, cfg, 3, rng);
  const ClassPairIndex idx(3);
  for (std::size_t c = 0; c < 3; ++c) CHECK(f.head[idx.index_of(c, c)] == 1);
  CHECK(f.active_count() == 4);
}

TEST_CASE("crossover splits mask columns") {
  SeededRng rng(6);
  const SearchConfig cfg = small_config(2, 6);
  const Individual a = make_individual(3, 4, {0, 1, 2}, 1);
  const Individual b = make_individual(3, 4, {3, 4, 5}, 0);
  const auto [c1, c2] = crossover(a, b, cfg, 3, rng);
  for (std::size_t k = 0; k < 6; ++k) {
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t col = 0; col < 4; ++col) {
        CHECK(c1.masks[k].at(r, col) == (col < 2 ? 1 : 0));
        CHECK(c2.masks[k].at(r, col) == (col < 2 ? 0 : 1));
      }
    }
  }
  CHECK(c1.active_count() <= 3);
  CHECK(c2.active_count() <= 3);
  CHECK(!c1.fitness);

  // Odd grids give the smaller share to the left.
  const auto [o1, o2] = crossover(make_individual(1, 3, {0}, 1), make_individual(1, 3, {0}, 0),
                                  cfg, 1, rng);
  CHECK(serialize_mask(o1.masks[0]) == "P=3\n100\n100\n100");
  CHECK(serialize_mask(o2.masks[0]) == "P=3\n011\n011\n011");
}

TEST_CASE("crossover of identical parents is the identity") {
  SeededRng rng(7);
  const SearchConfig cfg = small_config(10, 7);
  const auto pop = init_population(cfg, 4, 4, rng);
  for (const auto& p : pop) {
    const auto [c1, c2] = crossover(p, p, cfg, 4, rng);
    CHECK(c1.same_genome(p));
    CHECK(c2.same_genome(p));
  }
}

TEST_CASE("crossover offspring respect N") {
  SeededRng rng(8);
  SearchConfig cfg = small_config(200, 8);
  cfg.max_active = 4;
  auto pop = init_population(cfg, 6, 4, rng);
  for (std::size_t i = 0; i + 1 < pop.size(); i += 2) {
    const auto [c1, c2] = crossover(pop[i], pop[i + 1], cfg, 6, rng);
    CHECK(c1.active_count() <= 4);
    CHECK(c2.active_count() <= 4);
  }
}

TEST_CASE("mutation operators") {
  SeededRng rng(9);
  const SearchConfig cfg = small_config(50, 9);
  auto pop = init_population(cfg, 4, 4, rng);
  for (auto& ind : pop) {
    const Individual orig = ind;
    const auto inactive_same = [&](const Individual& x) {
      for (std::size_t k = 0; k < x.head.size(); ++k) {
        if (!orig.head[k] && !(x.masks[k] == orig.masks[k])) return false;
      }
      return true;
    };

    Individual x = orig;
    apply_mutation(x, MutationOp::kFlipTails, cfg, 4, rng);
    CHECK(x.head == orig.head);
    CHECK(inactive_same(x));
    for (std::size_t k : orig.active_slots()) CHECK(x.masks[k] == orig.masks[k].complement());
    apply_mutation(x, MutationOp::kFlipTails, cfg, 4, rng);
    CHECK(x.same_genome(orig));

    apply_mutation(x, MutationOp::kTranspose, cfg, 4, rng);
    CHECK(inactive_same(x));
    apply_mutation(x, MutationOp::kTranspose, cfg, 4, rng);
    CHECK(x.same_genome(orig));

    x = orig;
    apply_mutation(x, MutationOp::kFlipHeads, cfg, 4, rng);
    CHECK(x.active_count() == orig.active_count());
    CHECK(x.masks == orig.masks);

    x = orig;
    apply_mutation(x, MutationOp::kRandomTails, cfg, 4, rng);
    CHECK(x.head == orig.head);
    CHECK(inactive_same(x));

    x = orig;
    const MutationOp op = mutate(x, cfg, 4, rng);
    CHECK(static_cast<int>(op) < 4);
    CHECK(x.active_count() <= 4);
  }

  PatchMask m(4);
  m.set(0, 1, true);
  Individual t = make_individual(1, 4, {0}, 0);
  t.masks[0] = m;
  apply_mutation(t, MutationOp::kTranspose, cfg, 1, rng);
  CHECK(t.masks[0].popcount() == 1);
  CHECK(t.masks[0].at(1, 0) == 1);
}

TEST_CASE("random_tails flips about one bit in ten") {
  SeededRng rng(10);
  const SearchConfig cfg = small_config(1, 10);
  std::size_t flips = 0, cells = 0;
  for (int t = 0; t < 2000; ++t) {
    Individual x = make_individual(1, 4, {0}, 0);
    apply_mutation(x, MutationOp::kRandomTails, cfg, 1, rng);
    flips += x.masks[0].popcount();
    cells += 16;
  }
  const auto [lo, hi] = oracle::binomial_interval(cells, kRandomTailsFlipProb, 3.29);
  CHECK(static_cast<double>(flips) / cells >= lo);
  CHECK(static_cast<double>(flips) / cells <= hi);
}

TEST_CASE("mutate picks the four operators uniformly") {
  SeededRng rng(11);
  const SearchConfig cfg = small_config(1, 11);
  std::array<std::size_t, 4> counts{};
  Individual x = make_individual(3, 2, {0, 3}, 0);
  for (int t = 0; t < 8000; ++t) ++counts[static_cast<std::size_t>(mutate(x, cfg, 3, rng))];
  const auto [lo, hi] = oracle::binomial_interval(8000, 0.25, 3.29);
  for (auto c : counts) {
    CHECK(c / 8000.0 >= lo);
    CHECK(c / 8000.0 <= hi);
  }
}

TEST_CASE("tournament selection matches the with-replacement distribution") {
  std::vector<Individual> pop(10);
  for (std::size_t i = 0; i < 10; ++i) pop[i].fitness = 1.0 + static_cast<double>((i * 7) % 10);
  const std::size_t best = 0;  // fitness 1.0
  for (const std::size_t k : {std::size_t{3}, std::size_t{10}}) {
    SeededRng rng(12, {k});
    std::size_t wins = 0;
    for (int t = 0; t < 10000; ++t) wins += tournament_select(pop, k, rng) == best;
    const double expect = 1.0 - std::pow(0.9, static_cast<double>(k));
    const auto [lo, hi] = oracle::binomial_interval(10000, expect, 3.29);
    CHECK(wins / 10000.0 >= lo);
    CHECK(wins / 10000.0 <= hi);
    if (k == 10) CHECK(wins / 10000.0 >= 0.60);
  }
  SeededRng a(13), b(13);
  for (int t = 0; t < 100; ++t) CHECK(tournament_select(pop, 3, a) == tournament_select(pop, 3, b));
  SeededRng one(14);
  for (int t = 0; t < 10; ++t) CHECK(tournament_select(std::span(pop).first(1), 3, one) == 0);
  CHECK_THROWS_AS(tournament_select(std::span<const Individual>{}, 3, one), ConfigError);
}

TEST_CASE("tournament ties go to the first draw") {
  std::vector<Individual> pop(5);
  for (auto& ind : pop) ind.fitness = 2.0;
  SeededRng rng(15), shadow(15);
  for (int t = 0; t < 200; ++t) {
    const std::size_t first = shadow.below(5);
    shadow.below(5);
    shadow.below(5);
    CHECK(tournament_select(pop, 3, rng) == first);
  }
}

TEST_CASE("fitness with stub models") {
  const Dataset val = coded_val(3, 4, 8);
  SearchConfig cfg = small_config(1, 16);
  cfg.pairs_per_combo = 8;
  SeededRng rng(16);
  const auto pop = init_population(small_config(20, 16), 3, 4, rng);
  for (const auto& ind : pop) CHECK(evaluate_fitness(ind, oracle_stub(4, 3), val, cfg, 0) == 1.0);

  const ClassPairIndex idx(3);
  const std::size_t k01 = idx.index_of(0, 1);
  CHECK(evaluate_fitness(make_individual(3, 4, {k01}, 1), constant_stub(4, 3), val, cfg, 0) == 1.0);
  CHECK(evaluate_fitness(make_individual(3, 4, {k01}, 0), constant_stub(4, 3), val, cfg, 0) == 0.0);
  for (int t = 0; t < 50; ++t) {
    Individual ind = make_individual(3, 4, {k01}, 0);
    ind.masks[k01] = sample_random_mask(4, 1.0, rng);
    CHECK(evaluate_fitness(ind, constant_stub(4, 3), val, cfg, 0) == mixing_ratio(ind.masks[k01]));
  }

  Individual any = pop.front();
  CHECK(evaluate_fitness(any, oracle_stub(4, 3), val, cfg, 3) ==
        evaluate_fitness(any, oracle_stub(4, 3), val, cfg, 3));
  cfg.objective = Objective::kMaxPatchAcc;
  CHECK(evaluate_fitness(any, oracle_stub(4, 3), val, cfg, 0) == -1.0);
  cfg.objective = Objective::kMinPatchLoss;
  const auto uniform = [](const ImageTensor&) { return stub_outputs(4, 3); };
  CHECK(evaluate_fitness(any, uniform, val, cfg, 0) == doctest::Approx(16 * std::log(3.0)));
  cfg.objective = Objective::kMaxPatchLoss;
  CHECK(evaluate_fitness(any, uniform, val, cfg, 0) == doctest::Approx(-16 * std::log(3.0)));

  CHECK(evaluate_fitness(make_individual(3, 4, {}, 0), uniform, val, cfg, 0) ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("fitness draws are shared by all individuals in a generation") {
  const Dataset val = synth_shapes(3, 16, 10, 17);
  SeededRng rng(17);
  const ReferenceModel m = ReferenceModel::for_images(val.images[0], 4, 3, 8, rng);
  SearchConfig cfg = small_config(1, 17);
  cfg.pairs_per_combo = 4;
  const auto pop = init_population(small_config(5, 17), 3, 4, rng);
  for (const auto& ind : pop) {
    Individual twin = ind;
    twin.fitness = 123.0;
    CHECK(evaluate_fitness(ind, m, val, cfg, 2) == evaluate_fitness(twin, m, val, cfg, 2));
  }
}

TEST_CASE("fitness names a class missing from validation") {
  Dataset val = coded_val(3, 2, 8);
  val.images.resize(4);
  val.labels.resize(4);  // class 2 is gone
  SearchConfig cfg = small_config(1, 18);
  const ClassPairIndex idx(3);
  try {
    evaluate_fitness(make_individual(3, 4, {idx.index_of(1, 2)}, 1), oracle_stub(4, 3), val, cfg, 0);
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("class 2") != std::string::npos);
  }
}

TEST_CASE("search on a 2x2 grid recovers the enumerated optimum") {
  std::size_t hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    // Arbitrary landscape over the 16 masks, distinct values.
    SeededRng table_rng(seed, {stream_tag("table")});
    const auto order = table_rng.permutation(16);
    const auto table_fitness = [&](const std::vector<std::uint8_t>& bits) {
      std::size_t code = 0;
      for (std::size_t n = 0; n < 4; ++n) code |= std::size_t{bits[n]} << n;
      return static_cast<double>(order[code]);
    };
    const auto [opt_bits, opt_score] = oracle::brute_force_mask(2, table_fitness);
    // Twice the number of masks; with exactly 16 the population collapses
    // onto a local optimum in roughly one run in ten.
    SearchConfig cfg = small_config(32, seed);
    const SearchResult r = run_search(cfg, 1, 2, [&](const Individual& ind, std::size_t) {
      return table_fitness(ind.masks[0].bits());
    });
    hits += r.best.masks[0].bits() == opt_bits && *r.best.fitness == opt_score;
  }
  CHECK(hits >= 19);
}

TEST_CASE("search finds a hidden 4x4 target under Hamming fitness") {
  std::size_t hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SeededRng target_rng(seed, {stream_tag("target")});
    const PatchMask target = sample_random_mask(4, 1.0, target_rng);
    const auto [opt_bits, opt] = oracle::brute_force_mask(4, [&](const std::vector<std::uint8_t>& b) {
      return static_cast<double>(hamming(PatchMask(4, b), target));
    });
    REQUIRE(opt == 0.0);
    REQUIRE(PatchMask(4, opt_bits) == target);
    SearchConfig cfg = small_config(100, seed);
    const SearchResult r = run_search(cfg, 1, 4, hamming_to(target));
    CHECK(r.history.size() <= 61);
    if (r.history.back().best == 0.0) {
      ++hits;
      CHECK(r.best.masks[0] == target);
    }
    for (std::size_t g = 1; g < r.history.size(); ++g) {
      CHECK(r.history[g].best <= r.history[g - 1].best);
      CHECK(r.history[g].generation == g);
    }
  }
  MESSAGE("target found in " << hits << " of 20 runs");
  CHECK(hits >= 19);
}

TEST_CASE("search history, early stop and constraints") {
  SearchConfig cfg = small_config(30, 19);
  cfg.generations = 40;
  cfg.patience = 5;
  cfg.max_active = 2;
  const SearchResult flat = run_search(cfg, 4, 2, [](const Individual&, std::size_t) { return 1.0; });
  CHECK(flat.history.size() == 6);  // generation 0 plus five stale generations
  CHECK(flat.history.front().census.size() == 10);
  for (const auto& rec : flat.history) {
    CHECK(rec.best == 1.0);
    CHECK(rec.mean == 1.0);
    std::size_t total = 0;
    for (auto c : rec.census) total += c;
    CHECK(total <= 30 * 2);
  }
  for (const auto& ind : flat.population) CHECK(ind.active_count() <= 2);
}

TEST_CASE("search failures name the generation and individual") {
  SearchConfig cfg = small_config(8, 20);
  try {
    run_search(cfg, 2, 2, [](const Individual&, std::size_t g) -> double {
      if (g == 1) throw std::runtime_error("boom");
      return 0.5;
    });
    FAIL("expected an error");
  } catch (const std::exception& e) {
    const std::string what = e.what();
    CHECK(what.find("generation 1") != std::string::npos);
    CHECK(what.find("individual") != std::string::npos);
    CHECK(what.find("boom") != std::string::npos);
  }
}

TEST_CASE("search results do not depend on the thread count") {
  const Dataset val = synth_shapes(3, 16, 6, 21);
  SeededRng rng(21);
  const ReferenceModel m = ReferenceModel::for_images(val.images[0], 4, 3, 8, rng);
  SearchConfig cfg = small_config(24, 21);
  cfg.generations = 4;
  cfg.pairs_per_combo = 3;
  const FitnessFn fit = [&](const Individual& ind, std::size_t g) {
    return evaluate_fitness(ind, m, val, cfg, g);
  };
  const SearchResult one = run_search(cfg, 3, 4, fit, 1);
  const SearchResult four = run_search(cfg, 3, 4, fit, 4);
  CHECK(format_history(one.history, 3) == format_history(four.history, 3));
  CHECK(serialize_population(one.population, 3, 4, 3) == serialize_population(four.population, 3, 4, 3));
  CHECK(one.best.same_genome(four.best));
}

TEST_CASE("parallel_for reports the lowest failing index") {
  std::vector<int> seen(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { seen[i] = 1; });
  CHECK(std::count(seen.begin(), seen.end(), 1) == 100);
  try {
    parallel_for(50, 1, [](std::size_t i) {
      if (i >= 7) throw std::runtime_error("at " + std::to_string(i));
    });
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "at 7");
  }
}

TEST_CASE("individual and population checkpoints") {
  const ClassPairIndex idx(2);
  Individual ind = make_individual(2, 2, {idx.index_of(0, 0), idx.index_of(1, 1)}, 0);
  ind.masks[0] = PatchMask(2, std::vector<std::uint8_t>{1, 0, 0, 1});
  ind.masks[2] = PatchMask(2, std::vector<std::uint8_t>{1, 1, 0, 0});
  const std::string text = serialize_individual(ind, 2, 2, 2);
  CHECK(text == "C=2 P=2 N=2\n101\n(0,0)\n10\n01\n(1,1)\n11\n00\n");
  const IndividualRecord rec = parse_individual(text);
  CHECK(rec.classes == 2);
  CHECK(rec.grid_size == 2);
  CHECK(rec.max_active == 2);
  CHECK(rec.individual.head == ind.head);
  for (std::size_t k : ind.active_slots()) CHECK(rec.individual.masks[k] == ind.masks[k]);

  SeededRng rng(22);
  const auto pop = init_population(small_config(15, 22), 4, 4, rng);
  const std::string ptext = serialize_population(pop, 4, 4, 4);
  const auto back = parse_population(ptext);
  REQUIRE(back.size() == 15);
  for (std::size_t i = 0; i < 15; ++i) {
    CHECK(back[i].individual.head == pop[i].head);
    for (std::size_t k : pop[i].active_slots()) CHECK(back[i].individual.masks[k] == pop[i].masks[k]);
  }
  std::vector<Individual> reparsed;
  for (const auto& r : back) reparsed.push_back(r.individual);
  CHECK(serialize_population(reparsed, 4, 4, 4) == ptext);

  CHECK_THROWS_AS(parse_individual("C=2 P=2\n101\n"), FormatError);
  CHECK_THROWS_AS(parse_individual("C=2 P=2 N=2\n10\n"), FormatError);
  CHECK_THROWS_AS(parse_individual("C=2 P=2 N=2\n101\n(0,1)\n10\n01\n(1,1)\n11\n00\n"), FormatError);
  CHECK_THROWS_AS(parse_individual("C=2 P=2 N=2\n101\n(0,0)\n10\n"), FormatError);
  CHECK_THROWS_AS(parse_individual(text + "junk\n"), FormatError);
  CHECK_THROWS_AS(parse_population("count=2\n" + text), FormatError);
}

TEST_CASE("history text layout") {
  GenerationRecord r0{0, 0.75, 0.875, {1, 2}, {}};
  GenerationRecord r1{1, 0.5, 0.625, {}, {}};
  const std::vector<GenerationRecord> h{r0, r1};
  CHECK(format_history(h, 2) == "generation,best,mean,active_pairs\n0,0.75,0.875,0-1 1-1\n1,0.5,0.625,\n");
}

TEST_CASE("objective names") {
  for (auto o : {Objective::kMinPatchAcc, Objective::kMaxPatchAcc, Objective::kMinPatchLoss,
                 Objective::kMaxPatchLoss}) {
    CHECK(parse_objective(to_string(o)) == o);
  }
  CHECK(to_string(Objective::kMinPatchLoss) == "min_LP");
  CHECK_THROWS_AS(parse_objective("fastest"), ConfigError);
}
