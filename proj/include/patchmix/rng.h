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
#ifndef PATCHMIX_RNG_H_
#define PATCHMIX_RNG_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace patchmix {

// Deterministic random stream identified by a master seed and a key path.
//
// Streams are keyed hierarchically (phase -> generation -> individual ->
// draw). Two streams built from the same (seed, key) produce identical
// values no matter which thread owns them or in what order they are
// created, so parallel consumers stay reproducible as long as each one
// derives its own stream.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t master_seed,
                     std::initializer_list<std::uint64_t> key = {});
  SeededRng(std::uint64_t master_seed, std::vector<std::uint64_t> key);

  // Child stream whose key is this stream's key extended by `more`.
  SeededRng derive(std::initializer_list<std::uint64_t> more) const;

  std::uint64_t master_seed() const { return master_seed_; }
  const std::vector<std::uint64_t>& key() const { return key_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal(double mean, double stddev);
  double beta(double a, double b);

  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t master_seed_;
  std::vector<std::uint64_t> key_;
  std::mt19937_64 engine_;
};

// Stable 64-bit tag for a short ASCII label, usable as a key component.
constexpr std::uint64_t stream_tag(const char* s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (; *s != '\0'; ++s) {
    h ^= static_cast<unsigned char>(*s);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace patchmix

#endif  // PATCHMIX_RNG_H_
