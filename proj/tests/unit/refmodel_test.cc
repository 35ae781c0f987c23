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
#include <fstream>
#include <vector>

#include "doctest.h"
#include "oracles.h"
#include "patchmix/error.h"
#include "patchmix/refmodel.h"

using namespace patchmix;

namespace {

constexpr std::size_t kP = 2, kC = 3, kD = 5, kSide = 4, kCh = 1;

// Independent forward pass written from the model definition.
struct OracleOut {
  std::vector<std::vector<double>> patch;
  std::vector<double> image;
  double min_abs_preact = 1e300;
};

OracleOut oracle_forward(const ReferenceModel& m, const std::vector<double>& px, std::size_t w,
                         std::size_t h, std::size_t ch) {
  const std::size_t p = m.grid_size(), d = m.hidden(), c = m.class_count();
  const std::size_t pw = w / p, ph = h / p;
  const ModelParams& q = m.params();
  OracleOut out;
  std::vector<double> pooled(d, 0.0);
  for (std::size_t pr = 0; pr < p; ++pr) {
    for (std::size_t pc = 0; pc < p; ++pc) {
      std::vector<double> vec;
      for (std::size_t r = 0; r < ph; ++r)
        for (std::size_t col = 0; col < pw; ++col)
          for (std::size_t k = 0; k < ch; ++k)
            vec.push_back(px[((pr * ph + r) * w + pc * pw + col) * ch + k]);
      std::vector<double> f(d);
      for (std::size_t j = 0; j < d; ++j) {
        double s = q.b_embed[j];
        for (std::size_t i = 0; i < vec.size(); ++i) s += q.w_embed[i * d + j] * vec[i];
        out.min_abs_preact = std::min(out.min_abs_preact, std::abs(s));
        f[j] = std::max(0.0, s);
        pooled[j] += f[j] / static_cast<double>(p * p);
      }
      std::vector<double> logits(c);
      for (std::size_t k = 0; k < c; ++k) {
        logits[k] = q.b_patch[k];
        for (std::size_t j = 0; j < d; ++j) logits[k] += q.w_patch[j * c + k] * f[j];
      }
      out.patch.push_back(logits);
    }
  }
  out.image.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    out.image[k] = q.b_img[k];
    for (std::size_t j = 0; j < d; ++j) out.image[k] += q.w_img[j * c + k] * pooled[j];
  }
  return out;
}

double oracle_loss(const ReferenceModel& m, const std::vector<double>& px, const MixedSample& s,
                   LossMode mode, double* min_preact = nullptr) {
  const OracleOut o = oracle_forward(m, px, s.image.width, s.image.height, s.image.channels);
  if (min_preact != nullptr) *min_preact = std::min(*min_preact, o.min_abs_preact);
  const double lo = oracle::cross_entropy(o.image, s.image_label);
  double lp = 0.0;
  for (std::size_t n = 0; n < o.patch.size(); ++n) {
    lp += oracle::cross_entropy(o.patch[n],
                                oracle::mixed_label((*s.patch_labels)[n], 0, 1.0, m.class_count()));
  }
  const double p2 = static_cast<double>(m.grid_size() * m.grid_size());
  switch (mode) {
    case LossMode::kImageOnly: return lo;
    case LossMode::kPatchOnly: return lp / p2;
    default: return (lo + lp / p2) / 2.0;
  }
}

std::vector<double> pixels_of(const ImageTensor& img) {
  return std::vector<double>(img.data.begin(), img.data.end());
}

ImageTensor random_image(SeededRng& rng) {
  ImageTensor img(kSide, kSide, kCh);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

std::vector<double> flatten(const ModelParams& p) {
  std::vector<double> v;
  for (auto b : p.blocks()) v.insert(v.end(), b.begin(), b.end());
  return v;
}

void unflatten(ModelParams& p, const std::vector<double>& v) {
  std::size_t i = 0;
  for (auto b : p.blocks()) {
    for (double& x : b) x = v[i++];
  }
}

struct Fixture {
  ReferenceModel model;
  std::vector<MixedSample> batch;
};

// Draws models and batches until no pre-activation sits near the ReLU kink,
// so central differences see a smooth function.
Fixture smooth_fixture(std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    SeededRng rng(seed, {attempt});
    Fixture fx;
    fx.model = ReferenceModel::initialized(kP, kC, kD, kSide * kSide * kCh / (kP * kP), rng);
    for (double& b : fx.model.params().b_embed) b = rng.normal(0.0, 0.3);
    for (double& b : fx.model.params().b_patch) b = rng.normal(0.0, 0.3);
    for (double& b : fx.model.params().b_img) b = rng.normal(0.0, 0.3);
    for (int s = 0; s < 3; ++s) {
      const ImageTensor a = random_image(rng);
      const ImageTensor b = random_image(rng);
      fx.batch.push_back(patchmix::patchmix(a, static_cast<ClassId>(rng.below(kC)), b,
                                  static_cast<ClassId>(rng.below(kC)),
                                  sample_random_mask(kP, 1.0, rng), kC));
    }
    double min_pre = 1e300;
    for (const auto& s : fx.batch) oracle_loss(fx.model, pixels_of(s.image), s, LossMode::kBoth, &min_pre);
    if (min_pre > 1e-2) return fx;
  }
}

}  // namespace

TEST_CASE("zero model gives zero logits and uniform softmax") {
  const ReferenceModel m(4, 10, 8, 12);
  const ModelOutputs out = m.forward(ImageTensor(8, 8, 3, 0.5f));
  CHECK(out.patch_count == 16);
  CHECK(out.class_count == 10);
  CHECK(std::all_of(out.patch_logits.begin(), out.patch_logits.end(), [](double v) { return v == 0.0; }));
  CHECK(std::all_of(out.image_logits.begin(), out.image_logits.end(), [](double v) { return v == 0.0; }));
  for (double p : softmax(out.image_logits)) CHECK(p == doctest::Approx(0.1));
}

TEST_CASE("forward matches an independent implementation") {
  SeededRng rng(11);
  const ImageTensor like(8, 8, 3);
  for (int t = 0; t < 10; ++t) {
    const ReferenceModel m = ReferenceModel::for_images(like, 4, 5, 7, rng);
    CHECK(m.patch_pixel_count() == 12);
    ImageTensor img(8, 8, 3);
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    const ModelOutputs out = m.forward(img);
    const OracleOut o = oracle_forward(m, pixels_of(img), 8, 8, 3);
    for (std::size_t n = 0; n < 16; ++n) {
      for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(out.patch_row(n)[k] - o.patch[n][k]) <= 1e-12);
    }
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(out.image_logits[k] - o.image[k]) <= 1e-12);
  }
}

TEST_CASE("swapping two input patches swaps their rows only") {
  SeededRng rng(12);
  const ReferenceModel m = ReferenceModel::for_images(ImageTensor(8, 8, 3), 4, 4, 6, rng);
  ImageTensor img(8, 8, 3);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  // Swap patch (0,1) with patch (2,3).
  ImageTensor swapped = img;
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < 3; ++k)
        std::swap(swapped.at(r, 2 + c, k), swapped.at(4 + r, 6 + c, k));
  const ModelOutputs a = m.forward(img);
  const ModelOutputs b = m.forward(swapped);
  for (std::size_t n = 0; n < 16; ++n) {
    const std::size_t src = n == 1 ? 11 : n == 11 ? 1 : n;
    for (std::size_t k = 0; k < 4; ++k) CHECK(b.patch_row(n)[k] == a.patch_row(src)[k]);
  }
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(a.image_logits[k] - b.image_logits[k]) <= 1e-12);
  CHECK(m.forward(img).patch_logits == a.patch_logits);
}

TEST_CASE("mask cell n drives patch row n") {
  // Image i carries class 1 everywhere, image j class 0. A model whose patch
  // head reads mean brightness separates them per patch.
  ReferenceModel m(4, 2, 1, 4);
  for (double& w : m.params().w_embed) w = 1.0;
  m.params().w_patch = {-10.0, 10.0};
  m.params().b_patch = {10.0, -10.0};
  const ImageTensor bright(8, 8, 1, 1.0f), dark(8, 8, 1, 0.0f);
  for (std::size_t n = 0; n < 16; ++n) {
    PatchMask mask(4);
    mask.set(n, true);
    const MixedSample s = patchmix::patchmix(bright, 1, dark, 0, mask, 2);
    const ModelOutputs out = m.forward(s.image);
    for (std::size_t k = 0; k < 16; ++k) {
      CHECK((*s.patch_labels)[k] == (k == n ? 1u : 0u));
      CHECK(argmax(out.patch_row(k)) == (*s.patch_labels)[k]);
    }
    CHECK(patch_accuracy(out, *s.patch_labels) == 1.0);
  }
}

TEST_CASE("check_input rejects incompatible images") {
  SeededRng rng(13);
  const ReferenceModel m = ReferenceModel::for_images(ImageTensor(8, 8, 3), 4, 4, 6, rng);
  CHECK_THROWS_AS(m.forward(ImageTensor(8, 8, 1)), ConfigError);
  CHECK_THROWS_AS(m.forward(ImageTensor(6, 6, 3)), ConfigError);
  CHECK_THROWS_AS(m.forward(ImageTensor(16, 16, 3)), ConfigError);
}

TEST_CASE("parameter gradients match central differences") {
  for (const LossMode mode : {LossMode::kBoth, LossMode::kImageOnly, LossMode::kPatchOnly}) {
    const Fixture fx = smooth_fixture(21 + static_cast<int>(mode));
    const BatchGradient g = backward(fx.model, fx.batch, mode);
    const auto analytic = flatten(g.params);
    auto probe = fx.model;
    const auto numeric = oracle::central_difference(
        [&](const std::vector<double>& v) {
          unflatten(probe.params(), v);
          double sum = 0.0;
          for (const auto& s : fx.batch) sum += oracle_loss(probe, pixels_of(s.image), s, mode);
          return sum / static_cast<double>(fx.batch.size());
        },
        flatten(fx.model.params()), 1e-4);
    REQUIRE(analytic.size() == numeric.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      worst = std::max(worst, oracle::relative_error(analytic[i], numeric[i], 1e-3));
    }
    CHECK(worst < 1e-4);

    double mean = 0.0;
    for (const auto& s : fx.batch) mean += oracle_loss(fx.model, pixels_of(s.image), s, mode);
    CHECK(g.mean_loss == doctest::Approx(mean / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("input gradients match central differences") {
  const Fixture fx = smooth_fixture(31);
  for (const LossMode mode : {LossMode::kBoth, LossMode::kImageOnly}) {
    const BatchGradient g = backward(fx.model, fx.batch, mode);
    REQUIRE(g.inputs.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
      const auto numeric = oracle::central_difference(
          [&](const std::vector<double>& px) {
            return oracle_loss(fx.model, px, fx.batch[s], mode) / 3.0;
          },
          pixels_of(fx.batch[s].image), 1e-4);
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        CHECK(oracle::relative_error(g.inputs[s][i], numeric[i], 1e-3) < 1e-4);
      }
    }
  }
}

TEST_CASE("duplicating the batch leaves the mean gradient unchanged") {
  const Fixture fx = smooth_fixture(41);
  auto doubled = fx.batch;
  doubled.insert(doubled.end(), fx.batch.begin(), fx.batch.end());
  const auto a = flatten(backward(fx.model, fx.batch, LossMode::kBoth).params);
  const auto b = flatten(backward(fx.model, doubled, LossMode::kBoth).params);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
}

TEST_CASE("gradient vanishes when predictions match targets") {
  ReferenceModel m(2, 3, 4, 4);
  m.params().b_img = {0.0, 40.0, 0.0};
  m.params().b_patch = {0.0, 40.0, 0.0};
  const ImageTensor img(4, 4, 1, 0.3f);
  const std::vector<MixedSample> batch{unmixed(img, 1, 2, 3), unmixed(img, 1, 2, 3)};
  double norm = 0.0;
  for (double v : flatten(backward(m, batch, LossMode::kBoth).params)) norm += v * v;
  CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("non-finite loss raises a numeric error") {
  ReferenceModel m(2, 3, 4, 4);
  m.params().b_img[0] = std::nan("");
  const std::vector<MixedSample> batch{unmixed(ImageTensor(4, 4, 1, 0.5f), 0, 2, 3)};
  CHECK_THROWS_AS(backward(m, batch, LossMode::kBoth), NumericError);
}

TEST_CASE("cosine schedule endpoints") {
  CHECK(cosine_lr(0, 60, 0.1, 0.0) == 0.1);
  CHECK(cosine_lr(60, 60, 0.1, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(cosine_lr(60, 60, 0.1, 0.001) - 0.001) < 1e-15);
  CHECK(cosine_lr(30, 60, 0.1, 0.02) == doctest::Approx(0.06));
  double prev = 1.0;
  for (std::size_t e = 0; e <= 60; ++e) {
    const double lr = cosine_lr(e, 60, 0.1, 0.0);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("nesterov SGD") {
  SeededRng rng(51);
  const ReferenceModel base = ReferenceModel::initialized(2, 3, 4, 4, rng);
  ModelParams g = base.params().zeros_like();
  for (auto b : g.blocks())
    for (double& x : b) x = rng.normal(0.0, 1.0);

  SUBCASE("momentum 0 and no decay is plain SGD") {
    ReferenceModel m = base;
    SgdState st;
    sgd_nesterov_step(m, g, st, 0.1, 0.0, 0.0);
    const auto w0 = flatten(base.params()), w1 = flatten(m.params()), gv = flatten(g);
    for (std::size_t i = 0; i < w0.size(); ++i) CHECK(w1[i] == doctest::Approx(w0[i] - 0.1 * gv[i]));
  }
  SUBCASE("zero gradient and velocity is a fixed point") {
    ReferenceModel m = base;
    SgdState st;
    sgd_nesterov_step(m, base.params().zeros_like(), st, 0.1, 0.9, 0.0);
    CHECK(m == base);
  }
  SUBCASE("velocity after two constant steps is 1.9 g") {
    ReferenceModel m = base;
    SgdState st;
    sgd_nesterov_step(m, g, st, 0.01, 0.9, 0.0);
    sgd_nesterov_step(m, g, st, 0.01, 0.9, 0.0);
    const auto v = flatten(st.velocity), gv = flatten(g);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == doctest::Approx(1.9 * gv[i]).epsilon(1e-12));
    // w2 = w0 - lr*(g + 0.9 g) - lr*(g + 0.9*1.9 g)
    const auto w0 = flatten(base.params()), w2 = flatten(m.params());
    for (std::size_t i = 0; i < w0.size(); ++i) {
      CHECK(w2[i] == doctest::Approx(w0[i] - 0.01 * (1.9 + 2.71) * gv[i]).epsilon(1e-12));
    }
  }
  SUBCASE("weight decay touches weights only") {
    ReferenceModel m = base;
    for (auto b : m.params().blocks())
      for (double& x : b) x = 1.0;
    const ReferenceModel before = m;
    SgdState st;
    sgd_nesterov_step(m, base.params().zeros_like(), st, 1.0, 0.0, 0.1);
    const auto after = m.params().blocks();
    for (std::size_t b = 0; b < ModelParams::kBlockCount; ++b) {
      const double expect = ModelParams::kIsWeight[b] ? 0.9 : 1.0;
      for (double x : after[b]) CHECK(x == doctest::Approx(expect));
    }
  }
}

TEST_CASE("model checkpoint round trip") {
  const auto dir = oracle::temp_dir("refmodel_ckpt");
  SeededRng rng(61);
  const ReferenceModel m = ReferenceModel::for_images(ImageTensor(16, 16, 3), 4, 3, 8, rng);
  save_model(m, dir / "m.pmxm");
  const ReferenceModel back = load_model(dir / "m.pmxm");
  CHECK(back == m);
  CHECK(std::filesystem::file_size(dir / "m.pmxm") == 24 + 8 * flatten(m.params()).size());

  std::ifstream in(dir / "m.pmxm", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "PMXM");

  std::filesystem::resize_file(dir / "m.pmxm", 40);
  CHECK_THROWS_AS(load_model(dir / "m.pmxm"), FormatError);
  {
    std::ofstream bad(dir / "bad.pmxm", std::ios::binary);
    bad << "NOPE0000000000000000000000000";
  }
  CHECK_THROWS_AS(load_model(dir / "bad.pmxm"), FormatError);
}
