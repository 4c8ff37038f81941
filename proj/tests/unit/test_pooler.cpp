// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "test_util.hpp"
#include "uflow/error.hpp"
#include "uflow/pooler.hpp"
#include "uflow/simd.hpp"

using namespace uflow;
using uflow::testing::random_batch;
using uflow::testing::random_params;

namespace {

// Closed-form sum for the default config, evaluated independently of the
// implementation's own bookkeeping.
constexpr std::size_t kDefaultParamCount = (1024 * 256 + 256)      // input projection
                                           + 6 * 256               // positional
                                           + 256                   // query
                                           + 2 * 256               // ln_in
                                           + 4 * (256 * 256 + 256) // q, k, v, o
                                           + 2 * 256               // ln_attn
                                           + (256 * 1024 + 1024)   // mlp1
                                           + (1024 * 256 + 256)    // mlp2
                                           + (256 * 1536 + 1536);  // output
static_assert(kDefaultParamCount == 1'448'704);

double max_abs_diff(const Matrix<float>& a, const Matrix<float>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(double(a.data[i]) - b.data[i]));
  return worst;
}

PoolerParams<float> slice_max_len(const PoolerParams<float>& p, std::size_t max_len) {
  PoolerParams<float> s = p;
  s.config.max_len = max_len;
  s.pos = Matrix<float>(max_len, p.config.d_model);
  for (std::size_t j = 0; j < max_len; ++j)
    for (std::size_t c = 0; c < p.config.d_model; ++c) s.pos(j, c) = p.pos(j, c);
  return s;
}

}  // namespace

TEST_SUITE("init_params") {
  TEST_CASE("parameter count") {
    PoolerConfig cfg;
    CHECK(cfg.parameter_count() == kDefaultParamCount);
    const auto p = init_params(cfg, 1);
    CHECK(p.parameter_count() == kDefaultParamCount);
    std::size_t total = 0;
    for (const auto& t : p.tensors()) {
      std::size_t n = 1;
      for (auto d : t.dims) n *= d;
      CHECK(n == t.values.size());
      total += n;
    }
    CHECK(total == kDefaultParamCount);
  }

  TEST_CASE("same seed twice is bitwise identical, other seeds differ") {
    PoolerConfig cfg;
    const auto a = init_params(cfg, 123);
    const auto b = init_params(cfg, 123);
    CHECK(a == b);
    CHECK_FALSE(a == init_params(cfg, 124));
  }

  TEST_CASE("declared distributions") {
    const auto p = init_params(PoolerConfig{}, 7);
    for (float g : p.ln_in_g) CHECK(g == 1.0f);
    for (float g : p.ln_attn_g) CHECK(g == 1.0f);
    for (const auto* b : {&p.in_b, &p.q_b, &p.k_b, &p.v_b, &p.o_b, &p.mlp1_b, &p.mlp2_b, &p.out_b, &p.ln_in_b,
                          &p.ln_attn_b})
      for (float v : *b) CHECK(v == 0.0f);
    // Weights are truncated at two standard deviations.
    double s2 = 0;
    for (const auto* w : {&p.in_w, &p.q_w, &p.k_w, &p.v_w, &p.o_w, &p.mlp1_w, &p.mlp2_w, &p.out_w}) {
      for (float v : w->data) REQUIRE(std::abs(v) <= 0.04f);
    }
    for (float v : p.out_w.data) s2 += double(v) * v;
    const double sd = std::sqrt(s2 / double(p.out_w.size()));
    // Truncation at 2 sigma shrinks the std to about 0.88 of nominal.
    CHECK(sd == doctest::Approx(0.02 * 0.8796).epsilon(0.02));
    double pos2 = 0;
    for (float v : p.pos.data) pos2 += double(v) * v;
    CHECK(std::sqrt(pos2 / double(p.pos.size())) == doctest::Approx(0.02).epsilon(0.1));
  }

  TEST_CASE("config validation") {
    PoolerConfig cfg;
    cfg.n_heads = 3;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = PoolerConfig{};
    cfg.max_len = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
  }
}

TEST_SUITE("forward") {
  TEST_CASE("output shape is B x 1536 and finite") {
    const auto p = init_params(PoolerConfig{}, 3);
    for (std::vector<std::size_t> lens : {std::vector<std::size_t>{1}, {6, 3}, {2, 4, 5, 1, 6}}) {
      const auto batch = random_batch<float>(lens, 6, 1024, lens.size());
      const auto out = forward(p, batch);
      CHECK(out.rows == lens.size());
      CHECK(out.cols == 1536);
      for (float v : out.data) REQUIRE(std::isfinite(v));
    }
  }

  TEST_CASE("pure function of its inputs") {
    const auto p = init_params(PoolerConfig{}, 3);
    const auto batch = random_batch<float>({3, 5}, 6, 1024, 9);
    CHECK(forward(p, batch) == forward(p, batch));
  }

  TEST_CASE("row results do not depend on batch companions") {
    const auto p = init_params(PoolerConfig{}, 4);
    const auto batch = random_batch<float>({3, 6, 4}, 6, 1024, 10);
    const auto all = forward(p, batch);
    for (std::size_t b = 0; b < 3; ++b) {
      auto one = SequenceBatch<float>::with_shape(1, 6, 1024);
      std::vector<float> frames;
      for (std::size_t j = 0; j < batch.lengths[b]; ++j) {
        auto f = batch.frame(b, j);
        frames.insert(frames.end(), f.begin(), f.end());
      }
      one.set_sequence(0, frames, batch.lengths[b]);
      const auto single = forward(p, one);
      for (std::size_t c = 0; c < 1536; ++c) REQUIRE(single(0, c) == all(b, c));
    }
  }

  TEST_CASE("length-0 row is an error") {
    const auto p = init_params(PoolerConfig{}, 3);
    auto batch = random_batch<float>({2, 3}, 6, 1024, 1);
    batch.lengths[1] = 0;
    std::fill(batch.mask.begin() + 6, batch.mask.end(), 0);
    CHECK_THROWS_AS(forward(p, batch), Error);
    CHECK_THROWS_AS(attention_weights(p, batch), Error);
    auto empty = SequenceBatch<float>::with_shape(1, 6, 1024);
    CHECK_THROWS_AS(forward(p, empty), Error);
  }

  TEST_CASE("sequences longer than max_len are rejected") {
    auto batch = SequenceBatch<float>::with_shape(1, 6, 1024);
    std::vector<float> frames(7 * 1024, 0.5f);
    CHECK_THROWS_AS(batch.set_sequence(0, frames, 7), Error);
    auto ep = uflow::testing::random_episode("long", 7, 1);
    std::vector<Episode> eps{ep};
    CHECK_THROWS_AS(make_batch(std::span<const Episode>(eps), 6), Error);
  }

  TEST_CASE("mask inconsistent with lengths is rejected") {
    const auto p = init_params(PoolerConfig{}, 3);
    auto batch = random_batch<float>({2}, 6, 1024, 1);
    batch.mask[4] = 1;
    CHECK_THROWS_AS(forward(p, batch), Error);
  }

  TEST_CASE("double replica agrees with float") {
    const auto p = init_params(PoolerConfig{}, 11);
    const auto pd = cast_params<double>(p);
    const auto batch = random_batch<float>({4, 1, 6}, 6, 1024, 12);
    auto bd = SequenceBatch<double>::with_shape(3, 6, 1024);
    bd.features.assign(batch.features.begin(), batch.features.end());
    bd.mask = batch.mask;
    bd.lengths = batch.lengths;
    const auto of = forward(p, batch);
    const auto od = forward(pd, bd);
    double scale = 0, worst = 0;
    for (std::size_t i = 0; i < of.size(); ++i) {
      scale = std::max(scale, std::abs(od.data[i]));
      worst = std::max(worst, std::abs(of.data[i] - od.data[i]));
    }
    CHECK(worst <= 1e-4 * scale);
  }

  TEST_CASE("scalar and avx2 kernels give equivalent outputs") {
    if (!simd::avx2_kernels()) return;
    const auto before = simd::active().isa;
    const auto p = init_params(PoolerConfig{}, 21);
    const auto batch = random_batch<float>({3, 6, 5, 1}, 6, 1024, 22);
    simd::force(simd::Isa::scalar);
    const auto a = forward(p, batch);
    simd::force(simd::Isa::avx2);
    const auto b = forward(p, batch);
    simd::force(before);
    double scale = 0;
    for (float v : a.data) scale = std::max(scale, double(std::abs(v)));
    CHECK(max_abs_diff(a, b) <= 1e-5 * scale);
  }
}

TEST_SUITE("masking") {
  TEST_CASE("length-1 sequences put weight exactly 1 on the single frame") {
    const auto p = random_params<float>(PoolerConfig{}, 5, 0.1);
    const auto batch = random_batch<float>({1, 1, 1}, 6, 1024, 6);
    const auto w = attention_weights(p, batch);
    REQUIRE(w.size() == 3 * 4 * 6);
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t h = 0; h < 4; ++h)
        for (std::size_t j = 0; j < 6; ++j) CHECK(w[(b * 4 + h) * 6 + j] == (j == 0 ? 1.0f : 0.0f));
  }

  TEST_CASE("rows sum to one and padded weights are exactly zero") {
    const auto p = random_params<float>(PoolerConfig{}, 8, 0.1);
    const std::vector<std::size_t> lens = {2, 3, 4, 5, 6, 1};
    const auto batch = random_batch<float>(lens, 6, 1024, 9);
    const auto w = attention_weights(p, batch);
    for (std::size_t b = 0; b < lens.size(); ++b)
      for (std::size_t h = 0; h < 4; ++h) {
        double sum = 0;
        for (std::size_t j = 0; j < 6; ++j) {
          const float v = w[(b * 4 + h) * 6 + j];
          if (j >= lens[b]) CHECK(v == 0.0f);
          else CHECK(v > 0.0f);
          sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
      }
  }

  TEST_CASE("3 frames padded to 6 equal the same frames under max_len 3 params") {
    const auto p6 = random_params<float>(PoolerConfig{}, 12, 0.05);
    const auto p3 = slice_max_len(p6, 3);
    const auto b6 = random_batch<float>({3}, 6, 1024, 13);
    const auto b3 = random_batch<float>({3}, 3, 1024, 13);
    REQUIRE(std::equal(b3.features.begin(), b3.features.end(), b6.features.begin()));
    const auto o6 = forward(p6, b6);
    const auto o3 = forward(p3, b3);
    CHECK(max_abs_diff(o6, o3) <= 1e-6);
  }

  TEST_CASE("padding amount does not change the output") {
    const auto p = init_params(PoolerConfig{}, 14);
    for (std::size_t k = 1; k <= 6; ++k) {
      const auto ref = forward(p, random_batch<float>({k}, k, 1024, 100 + k));
      for (std::size_t pad = k + 1; pad <= 6; ++pad) {
        CAPTURE(k);
        CAPTURE(pad);
        CHECK(max_abs_diff(ref, forward(p, random_batch<float>({k}, pad, 1024, 100 + k))) <= 1e-6);
      }
    }
  }

  TEST_CASE("garbage in padded slots is ignored") {
    const auto p = init_params(PoolerConfig{}, 15);
    auto batch = random_batch<float>({2, 4}, 6, 1024, 16);
    const auto ref = forward(p, batch);
    for (std::size_t j = 2; j < 6; ++j)
      for (float& v : batch.frame(0, j)) v = 1e3f;
    CHECK(forward(p, batch) == ref);
  }
}

TEST_SUITE("properties") {
  TEST_CASE("swapping two frames changes the output for 10 of 10 seeds") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto p = init_params(PoolerConfig{}, seed);
      auto batch = random_batch<float>({3}, 6, 1024, 1000 + seed);
      const auto a = forward(p, batch);
      auto f0 = batch.frame(0, 0), f1 = batch.frame(0, 1);
      std::swap_ranges(f0.begin(), f0.end(), f1.begin());
      const auto b = forward(p, batch);
      double d2 = 0;
      for (std::size_t i = 0; i < a.size(); ++i) d2 += std::pow(double(a.data[i]) - b.data[i], 2);
      CAPTURE(seed);
      CHECK(std::sqrt(d2) > 1e-6);
    }
  }

  TEST_CASE("identical frames at two positions get unequal weights") {
    const auto p = init_params(PoolerConfig{}, 31);
    auto batch = SequenceBatch<float>::with_shape(1, 6, 1024);
    auto one = random_batch<float>({1}, 1, 1024, 32);
    std::vector<float> frames(one.features.begin(), one.features.end());
    frames.insert(frames.end(), one.features.begin(), one.features.end());
    batch.set_sequence(0, frames, 2);
    const auto w = attention_weights(p, batch);
    bool any_unequal = false;
    for (std::size_t h = 0; h < 4; ++h) {
      CHECK(w[h * 6] + w[h * 6 + 1] == doctest::Approx(1.0).epsilon(1e-6));
      any_unequal |= std::abs(w[h * 6] - 0.5f) > 1e-6f;
    }
    CHECK(any_unequal);
  }

  TEST_CASE("input layer norm removes a global feature scale") {
    // pos and input bias forced to zero; features scaled up so that the
    // variance dwarfs ln_eps.
    auto p = init_params(PoolerConfig{}, 41);
    p.pos.fill(0.0f);
    std::fill(p.in_b.begin(), p.in_b.end(), 0.0f);
    auto batch = random_batch<float>({6, 3}, 6, 1024, 42);
    for (float& v : batch.features) v *= 5.0f;
    auto doubled = batch;
    for (float& v : doubled.features) v *= 2.0f;
    ForwardCache<float> c1, c2;
    forward(p, batch, &c1);
    forward(p, doubled, &c2);
    REQUIRE(c1.x.size() == c2.x.size());
    double worst = 0;
    for (std::size_t i = 0; i < c1.x.size(); ++i) worst = std::max(worst, std::abs(double(c1.x.data[i]) - c2.x.data[i]));
    CHECK(worst <= 1e-5);
  }
}
