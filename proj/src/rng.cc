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
#include "patchmix/rng.h"

#include <cmath>
#include <utility>

namespace patchmix {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_key(std::uint64_t seed, const std::vector<std::uint64_t>& key) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t k : key) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  // Length is folded in so that {a} and {a, 0} differ.
  return splitmix64(h ^ key.size());
}

}  // namespace

SeededRng::SeededRng(std::uint64_t master_seed,
                     std::initializer_list<std::uint64_t> key)
    : SeededRng(master_seed, std::vector<std::uint64_t>(key)) {}

SeededRng::SeededRng(std::uint64_t master_seed, std::vector<std::uint64_t> key)
    : master_seed_(master_seed),
      key_(std::move(key)),
      engine_(mix_key(master_seed_, key_)) {}

SeededRng SeededRng::derive(std::initializer_list<std::uint64_t> more) const {
  std::vector<std::uint64_t> k = key_;
  k.insert(k.end(), more.begin(), more.end());
  return SeededRng(master_seed_, std::move(k));
}

double SeededRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t SeededRng::below(std::size_t n) {
  // Rejection sampling keeps the result unbiased and platform-independent.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

double SeededRng::normal(double mean, double stddev) {
  // Marsaglia polar method; no cached spare so every call consumes a
  // self-contained block of the stream.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return mean + stddev * u * std::sqrt(-2.0 * std::log(s) / s);
}

double SeededRng::beta(double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(engine_);
  const double y = gb(engine_);
  if (x + y == 0.0) return 0.5;
  return x / (x + y);
}

std::vector<std::size_t> SeededRng::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[below(i)]);
  return p;
}

}  // namespace patchmix
