// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gradcheck.hpp"
#include "test_util.hpp"
#include "uflow/adam.hpp"
#include "uflow/error.hpp"
#include "uflow/loss.hpp"
#include "uflow/training.hpp"

using namespace uflow;
using namespace uflow::testing;

namespace {

Matrix<double> identity_rows(std::size_t n, std::size_t d) {
  Matrix<double> m(n, d);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Dataset small_synth(std::size_t episodes = 80, std::uint64_t seed = 42) {
  SynthConfig cfg;
  cfg.n_archetypes = 4;
  cfg.n_episodes = episodes;
  cfg.seed = seed;
  return synth_dataset(cfg);
}

TrainConfig small_train(std::size_t epochs = 3) {
  TrainConfig t;
  t.batch_size = 16;
  t.epochs = epochs;
  t.lr = 1e-3;
  return t;
}

}  // namespace

TEST_SUITE("contrastive_loss") {
  TEST_CASE("n=1 gives exactly zero") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      auto v = random_matrix<double>(1, 7, s), t = random_matrix<double>(1, 7, s + 50);
      CHECK(contrastive_loss(v, t, 0.07) == 0.0);
      CHECK(contrastive_loss_grad(v, t, 0.07).loss == 0.0);
    }
  }

  TEST_CASE("2x2 identity at tau 1") {
    const double want = 0.31326168751822286;  // log(1 + e^-1), computed independently
    CHECK(std::abs(contrastive_loss(identity_rows(2, 2), identity_rows(2, 2), 1.0) - want) <= 1e-12);
    Matrix<float> f(2, 2);
    f(0, 0) = f(1, 1) = 1.0f;
    CHECK(std::abs(contrastive_loss(f, f, 1.0) - want) <= 1e-6);
  }

  TEST_CASE("uniform similarities give ln n") {
    for (std::size_t n : {2u, 4u, 8u}) {
      // Identical rows on both sides make every entry of V T^T the same.
      const auto r = random_matrix<double>(1, 16, n);
      Matrix<double> v(n, 16), t(n, 16);
      for (std::size_t i = 0; i < n; ++i) {
        std::copy(r.data.begin(), r.data.end(), v.row(i).begin());
        t(i, 3) = 1.0;
      }
      CHECK(std::abs(contrastive_loss(v, t, 0.07) - std::log(double(n))) <= 1e-9);
    }
  }

  TEST_CASE("symmetric in its arguments, exactly") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const std::size_t n = 1 + s % 7;
      auto v = random_matrix<double>(n, 12, s), t = random_matrix<double>(n, 12, 1000 + s);
      CHECK(contrastive_loss(v, t, 0.07) == contrastive_loss(t, v, 0.07));
      auto vf = random_matrix<float>(n, 12, s), tf = random_matrix<float>(n, 12, 1000 + s);
      CHECK(contrastive_loss(vf, tf, 0.5) == contrastive_loss(tf, vf, 0.5));
    }
  }

  TEST_CASE("positive row scaling of V leaves the loss unchanged") {
    Rng rng(3);
    for (std::uint64_t s = 0; s < 10; ++s) {
      auto v = random_matrix<float>(6, 32, s), t = random_matrix<float>(6, 32, s + 9);
      const double base = contrastive_loss(v, t, 0.07);
      for (std::size_t i = 0; i < v.rows; ++i) {
        const float k = static_cast<float>(0.01 + 50 * rng.uniform());
        for (float& x : v.row(i)) x *= k;
      }
      CHECK(std::abs(contrastive_loss(v, t, 0.07) - base) <= 1e-6);
    }
  }

  TEST_CASE("non-negative and decreasing as tau shrinks on orthonormal pairs") {
    const auto e = identity_rows(4, 8);
    const double l1 = contrastive_loss(e, e, 1.0), l01 = contrastive_loss(e, e, 0.1),
                 l007 = contrastive_loss(e, e, 0.07);
    CHECK(l1 > l01);
    CHECK(l01 > l007);
    CHECK(l007 >= 0.0);
    CHECK(l007 < 1e-5);
    for (std::uint64_t s = 0; s < 10; ++s)
      CHECK(contrastive_loss(random_matrix<double>(5, 9, s), random_matrix<double>(5, 9, s + 1), 0.07) >= 0.0);
  }

  TEST_CASE("errors") {
    auto v = random_matrix<double>(3, 4, 1), t = random_matrix<double>(3, 4, 2);
    CHECK_THROWS_AS(contrastive_loss(v, t, 0.0), Error);
    CHECK_THROWS_AS(contrastive_loss(v, t, -1.0), Error);
    auto bad = v;
    bad(1, 2) = std::nan("");
    CHECK_THROWS_AS(contrastive_loss(bad, t, 0.07), Error);
    bad = v;
    bad(0, 0) = INFINITY;
    CHECK_THROWS_AS(contrastive_loss(v, bad, 0.07), Error);
    Matrix<double> zero(3, 4);
    CHECK_THROWS_AS(contrastive_loss(zero, t, 0.07), Error);
    try {
      contrastive_loss(v, t, 0.0);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::numeric);
    }
  }

  TEST_CASE("loss gradient matches central differences") {
    auto v = random_matrix<double>(5, 7, 10), t = random_matrix<double>(5, 7, 11);
    const auto lg = contrastive_loss_grad(v, t, 0.07);
    CHECK(lg.loss == contrastive_loss(v, t, 0.07));
    const double h = 1e-6;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto up = v, down = v;
      up.data[i] += h;
      down.data[i] -= h;
      const double num = (contrastive_loss(up, t, 0.07) - contrastive_loss(down, t, 0.07)) / (2 * h);
      CHECK(std::abs(num - lg.grad_v.data[i]) <= 1e-6 * std::max(1.0, std::abs(num)));
    }
  }
}

TEST_SUITE("pooler gradients") {
  TEST_CASE("every tensor matches central differences at h=1e-3") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto g = tiny_grad_problem(seed);
      for (const auto& t : check_pooler_gradients(g.params, g.batch, g.text, 1.0)) {
        CAPTURE(seed);
        CAPTURE(t.name);
        CHECK(t.max_rel_error < 1e-3);
      }
    }
  }

  TEST_CASE("training temperature with a finer step") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto g = tiny_grad_problem(seed);
      // Rounding in the difference quotient reaches 1e-10 at this step, so
      // the absolute floor moves up to 1e-5.
      for (const auto& t : check_pooler_gradients(g.params, g.batch, g.text, 0.07, 1e-5, 1e-2, 1e-5)) {
        CAPTURE(seed);
        CAPTURE(t.name);
        CHECK(t.max_rel_error < 1e-4);
      }
    }
  }

  TEST_CASE("float gradients agree with the double replica") {
    const auto g = tiny_grad_problem(3);
    const auto pf = cast_params<float>(g.params);
    auto bf = SequenceBatch<float>::with_shape(3, g.batch.max_len, g.batch.d_vis);
    bf.features.assign(g.batch.features.begin(), g.batch.features.end());
    bf.mask = g.batch.mask;
    bf.lengths = g.batch.lengths;
    Matrix<float> tf(g.text.rows, g.text.cols);
    tf.data.assign(g.text.data.begin(), g.text.data.end());

    ForwardCache<double> cd;
    const auto gd = backward(g.params, cd, contrastive_loss_grad(forward(g.params, g.batch, &cd), g.text, 0.07).grad_v);
    ForwardCache<float> cf;
    const auto gf = backward(pf, cf, contrastive_loss_grad(forward(pf, bf, &cf), tf, 0.07).grad_v);
    const auto td = gd.tensors();
    const auto tfl = gf.tensors();
    for (std::size_t t = 0; t < td.size(); ++t) {
      double scale = 0, worst = 0;
      for (std::size_t i = 0; i < td[t].values.size(); ++i) {
        scale = std::max(scale, std::abs(td[t].values[i]));
        worst = std::max(worst, std::abs(td[t].values[i] - double(tfl[t].values[i])));
      }
      CAPTURE(td[t].name);
      CHECK(worst <= 1e-3 * scale + 1e-6);
    }
  }

  TEST_CASE("zero output projection gives a zero gradient for the second MLP layer") {
    auto g = tiny_grad_problem(5);
    g.params.out_w.fill(0.0);
    // A non-zero output bias keeps the pooled rows normalizable.
    for (std::size_t i = 0; i < g.params.out_b.size(); ++i) g.params.out_b[i] = 0.1 * double(i + 1);
    ForwardCache<double> cache;
    const auto v = forward(g.params, g.batch, &cache);
    const auto grads = backward(g.params, cache, contrastive_loss_grad(v, g.text, 0.07).grad_v);
    for (double x : grads.mlp2_w.data) CHECK(x == 0.0);
    for (double x : grads.mlp2_b) CHECK(x == 0.0);
    for (double x : grads.in_w.data) CHECK(x == 0.0);
  }

  TEST_CASE("padded features have no influence on loss or gradient") {
    auto g = tiny_grad_problem(7);
    ForwardCache<double> c1;
    const auto v1 = forward(g.params, g.batch, &c1);
    const auto l1 = contrastive_loss_grad(v1, g.text, 0.07);
    const auto g1 = backward(g.params, c1, l1.grad_v);
    auto perturbed = g.batch;
    for (std::size_t b = 0; b < perturbed.size(); ++b)
      for (std::size_t j = perturbed.lengths[b]; j < perturbed.max_len; ++j)
        for (double& x : perturbed.frame(b, j)) x = 123.0 + double(j);
    ForwardCache<double> c2;
    const auto v2 = forward(g.params, perturbed, &c2);
    const auto l2 = contrastive_loss_grad(v2, g.text, 0.07);
    CHECK(l1.loss == l2.loss);
    CHECK(backward(g.params, c2, l2.grad_v) == g1);
  }
}

TEST_SUITE("adam") {
  TEST_CASE("first step follows the closed form") {
    PoolerConfig cfg = tiny_config();
    auto params = init_params(cfg, 1);
    const auto before = params;
    auto grads = PoolerParams<float>::zeros(cfg);
    Rng rng(2);
    for (auto& t : grads.tensors())
      for (float& g : t.values) g = static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform() * 8 - 6));
    auto state = AdamState::zeros(cfg);
    AdamConfig ac{1e-3, 0.9, 0.999, 1e-8};
    adam_step(params, grads, state, ac);
    CHECK(state.step == 1);
    const auto pt = params.tensors();
    const auto bt = before.tensors();
    const auto gt = grads.tensors();
    for (std::size_t t = 0; t < pt.size(); ++t)
      for (std::size_t i = 0; i < pt[t].values.size(); ++i) {
        const double g = gt[t].values[i];
        // m_hat = g and v_hat = g^2 after one step.
        const double want = double(bt[t].values[i]) - ac.lr * g / (std::abs(g) + ac.eps);
        CHECK(std::abs(double(pt[t].values[i]) - want) <= 1e-7 * std::max(1.0, std::abs(want)));
        if (std::abs(g) > 1e-4)
          CHECK(std::abs((double(pt[t].values[i]) - bt[t].values[i]) + ac.lr * (g > 0 ? 1 : -1)) <= 1e-6);
      }
  }

  TEST_CASE("zero gradient is a fixed point apart from the step counter") {
    PoolerConfig cfg = tiny_config();
    auto params = init_params(cfg, 1);
    auto state = AdamState::zeros(cfg);
    auto grads = PoolerParams<float>::zeros(cfg);
    for (auto& t : grads.tensors()) std::fill(t.values.begin(), t.values.end(), 0.25f);
    adam_step(params, grads, state, AdamConfig{});  // non-zero moments first
    const auto p1 = params;
    const auto s1 = state;
    adam_step(params, PoolerParams<float>::zeros(cfg), state, AdamConfig{0.0});
    CHECK(params == p1);
    // With lr 0 nothing moves even though moments decay.
    CHECK(state.step == 2);
    auto p2 = p1;
    auto s2 = AdamState::zeros(cfg);
    adam_step(p2, PoolerParams<float>::zeros(cfg), s2, AdamConfig{});
    CHECK(p2 == p1);
    CHECK(s2.m == AdamState::zeros(cfg).m);
    CHECK(s2.v == AdamState::zeros(cfg).v);
    CHECK(s2.step == 1);
    (void)s1;
  }

  TEST_CASE("shape mismatch is rejected") {
    auto params = init_params(tiny_config(), 1);
    auto other = tiny_config();
    other.d_model = 8;
    auto state = AdamState::zeros(tiny_config());
    CHECK_THROWS_AS(adam_step(params, PoolerParams<float>::zeros(other), state, AdamConfig{}), Error);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip is lossless") {
    TempDir tmp;
    Checkpoint c{small_train(), init_params(PoolerConfig{}, 9)};
    c.params.out_w.data[0] = -0.0f;
    write_checkpoint(c, tmp / "m.ckpt");
    const auto back = read_checkpoint(tmp / "m.ckpt");
    CHECK(back == c);
    CHECK(std::signbit(back.params.out_w.data[0]));
    CHECK(encode_checkpoint(back) == encode_checkpoint(c));
    CHECK(checkpoint_id(back) == checkpoint_id(c));
    CHECK(checkpoint_id(c).size() == 16);
    const auto bytes = slurp(tmp / "m.ckpt");
    CHECK(bytes.substr(0, 4) == "UFPC");
  }

  TEST_CASE("corruption is a format error") {
    Checkpoint c{small_train(), init_params(tiny_config(), 9)};
    const auto good = encode_checkpoint(c);
    auto code = [](std::vector<std::uint8_t> bytes) {
      try {
        decode_checkpoint(bytes);
      } catch (const Error& e) {
        return e.code();
      }
      return Errc::usage;
    };
    auto bad = good;
    bad[1] = 'X';
    CHECK(code(bad) == Errc::format);
    bad = good;
    bad[4] = 9;  // version
    CHECK(code(bad) == Errc::format);
    bad = good;
    bad.resize(bad.size() - 3);
    CHECK(code(bad) == Errc::format);
    bad = good;
    bad.push_back(0);
    CHECK(code(bad) == Errc::format);
  }
}

TEST_SUITE("train") {
  TEST_CASE("identical runs give identical checkpoints and losses") {
    const auto data = small_synth();
    const auto a = train(data, PoolerConfig{}, small_train());
    const auto b = train(data, PoolerConfig{}, small_train());
    CHECK(encode_checkpoint(a.final_checkpoint) == encode_checkpoint(b.final_checkpoint));
    REQUIRE(a.report.epochs.size() == 3);
    for (std::size_t e = 0; e < 3; ++e) {
      CHECK(a.report.epochs[e].train_loss == b.report.epochs[e].train_loss);
      CHECK(a.report.epochs[e].val_loss == b.report.epochs[e].val_loss);
    }
    auto other = small_train();
    other.seed = 124;
    CHECK_FALSE(train(data, PoolerConfig{}, other).final_checkpoint.params == a.final_checkpoint.params);
  }

  TEST_CASE("lr 0 keeps the initial parameters and a constant validation loss") {
    const auto data = small_synth();
    auto cfg = small_train(4);
    cfg.lr = 0.0;
    const auto r = train(data, PoolerConfig{}, cfg);
    CHECK(r.final_checkpoint.params == init_params(PoolerConfig{}, cfg.seed));
    for (const auto& e : r.report.epochs) CHECK(std::abs(e.val_loss - r.report.epochs[0].val_loss) <= 1e-6);
    CHECK(std::abs(r.report.initial_val_loss - r.report.epochs[0].val_loss) <= 1e-6);
  }

  TEST_CASE("learning lowers the validation loss and tracks the best epoch") {
    const auto data = small_synth(200);
    auto cfg = small_train(6);
    const auto r = train(data, PoolerConfig{}, cfg);
    CHECK(r.report.epochs.back().val_loss < r.report.epochs.front().val_loss);
    double best = INFINITY;
    for (const auto& e : r.report.epochs) best = std::min(best, e.val_loss);
    const auto [tr, va] = train_val_split(data, cfg);
    CHECK(dataset_loss(r.best_checkpoint.params, va, cfg.batch_size, cfg.temperature) == best);
  }

  TEST_CASE("checkpoint files and epoch callback") {
    TempDir tmp;
    TrainOptions opt;
    opt.checkpoint_path = tmp / "m.ckpt";
    std::vector<std::size_t> seen;
    opt.on_epoch = [&](const EpochRecord& r) { seen.push_back(r.epoch); };
    const auto r = train(small_synth(), PoolerConfig{}, small_train(2), opt);
    CHECK(seen == std::vector<std::size_t>{1, 2});
    CHECK(read_checkpoint(tmp / "m.ckpt") == r.final_checkpoint);
    CHECK(read_checkpoint(tmp / "m.ckpt.best") == r.best_checkpoint);
    const auto line = to_json_line(r.report.epochs[0]);
    CHECK(line.find("\"epoch\":1") != std::string::npos);
    CHECK(line.find("train_loss") != std::string::npos);
    CHECK(line.find("val_loss") != std::string::npos);
    CHECK(line.find("seconds") != std::string::npos);
  }

  TEST_CASE("filtering and split follow the dataset") {
    auto data = small_synth(40);
    data.episodes.push_back(random_episode("too-long", 7, 1));
    data.episodes.push_back(random_episode("too-short", 2, 2));
    const auto [tr, va] = train_val_split(data, small_train());
    CHECK(tr.size() + va.size() == 40);
    CHECK(tr.size() == 36);
  }

  TEST_CASE("invalid setups") {
    auto cfg = small_train();
    cfg.temperature = 0;
    CHECK_THROWS_AS(train(small_synth(), PoolerConfig{}, cfg), Error);
    cfg = small_train();
    cfg.batch_size = 1;
    CHECK_THROWS_AS(train(small_synth(), PoolerConfig{}, cfg), Error);
    Dataset tiny;
    tiny.episodes.push_back(random_episode("a", 3, 1));
    tiny.episodes.push_back(random_episode("b", 3, 2));
    CHECK_THROWS_AS(train(tiny, PoolerConfig{}, small_train()), Error);  // one train episode
    CHECK_THROWS_AS(train(small_synth(), tiny_config(), small_train()), Error);
  }
}
