#include <cmath>
#include <stdexcept>

#include "doctest.h"

#include "ddn/model.hpp"
#include "ddn/rng.hpp"
#include "oracles.hpp"

using namespace ddn;

namespace {

DdnConfig tiny_config() {
  DdnConfig cfg;
  cfg.features = {{1, 2}, {4, 3}};
  cfg.history_len = 3;
  cfg.head_hidden = 4;
  cfg.attn_hidden = 5;
  cfg.pooling = Pooling::Attention;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  DdnConfig cfg = tiny_config();
  CHECK(cfg.embed_total() == 5);
  CHECK_NOTHROW(cfg.validate());
  cfg.history_len = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.features.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("params enumeration is stable and complete") {
  DdnConfig cfg = tiny_config();
  DdnParams p = DdnParams::zeros_like(cfg);
  auto views = p.tensors();
  REQUIRE(views.size() == 12);  // 2 embeddings x 2 + 8 attention/head tensors
  CHECK(views[0].name == "embed_w0");
  CHECK(views.back().name == "head_out_b");
  std::size_t total = 0;
  for (const auto& v : views) total += v.size;
  CHECK(total == p.scalar_count());
  CHECK_NOTHROW(p.check_shapes(cfg));
  p.head_hidden_b.push_back(0.0);
  CHECK_THROWS_AS(p.check_shapes(cfg), std::invalid_argument);
}

TEST_CASE("embedding concatenates per-feature affine maps") {
  DdnConfig cfg = tiny_config();
  Rng rng(7);
  DdnParams p = oracle::random_params(cfg, rng);
  MovingFrame f = oracle::random_frame(cfg, rng);

  Vec e = embed_cycle(f.reference, cfg, p);
  REQUIRE(e.size() == cfg.embed_total());
  Vec expected = oracle::embed_cycle(f.reference, cfg, p);
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(e[i] == doctest::Approx(expected[i]).epsilon(1e-14));
  }

  CHECK_THROWS_AS(embed_feature(Vec{1, 2}, 0, cfg, p), std::invalid_argument);
  CHECK_THROWS_AS(embed_feature(Vec{1}, 9, cfg, p), std::invalid_argument);
}

TEST_CASE("forward matches straight-line recomposition on random configs") {
  Rng rng(1234);
  for (int round = 0; round < 30; ++round) {
    DdnConfig cfg = oracle::random_small_config(rng);
    if (round % 3 == 0) cfg.pooling = Pooling::Mean;
    if (round % 5 == 0) cfg.head_activation = HeadActivation::Relu;
    DdnParams p = oracle::random_params(cfg, rng);
    MovingFrame f = oracle::random_frame(cfg, rng);
    const double got = forward(f, cfg, p);
    const double want = oracle::forward(f, cfg, p);
    CHECK(std::abs(got - want) <= 1e-10);
  }
}

TEST_CASE("attention weights sum to one and match oracle") {
  Rng rng(5678);
  for (int round = 0; round < 50; ++round) {
    DdnConfig cfg = oracle::random_small_config(rng);
    DdnParams p = oracle::random_params(cfg, rng);
    MovingFrame f = oracle::random_frame(cfg, rng);
    AttentionTrace trace;
    forward(f, cfg, p, &trace);
    REQUIRE(trace.weights.size() == cfg.history_len);
    double sum = 0.0;
    for (double a : trace.weights) {
      CHECK(a >= 0.0);
      sum += a;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    Vec alpha;
    oracle::forward(f, cfg, p, nullptr, &alpha);
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      CHECK(trace.weights[i] == doctest::Approx(alpha[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero attention hidden weights reduce attention to mean pooling") {
  Rng rng(91);
  DdnConfig cfg = tiny_config();
  DdnParams p = oracle::random_params(cfg, rng);
  p.attn_hidden_w.a.assign(p.attn_hidden_w.a.size(), 0.0);
  MovingFrame f = oracle::random_frame(cfg, rng);
  EncodedFrame enc = encode_frame(f, cfg, p);

  Vec attn = pool(enc, Pooling::Attention, cfg, p);
  Vec mean = pool(enc, Pooling::Mean, cfg, p);
  REQUIRE(attn.size() == mean.size());
  for (std::size_t i = 0; i < attn.size(); ++i) {
    CHECK(std::abs(attn[i] - mean[i]) <= 1e-12);
  }
}

TEST_CASE("positive scaling of the score layer preserves the attention argmax") {
  Rng rng(92);
  for (int round = 0; round < 20; ++round) {
    DdnConfig cfg = oracle::random_small_config(rng);
    cfg.history_len = 2 + rng.below(3);
    DdnParams p = oracle::random_params(cfg, rng);
    MovingFrame f = oracle::random_frame(cfg, rng);

    AttentionTrace before;
    forward(f, cfg, p, &before);
    auto argmax = [](const Vec& v) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
      }
      return best;
    };
    std::size_t best_before = argmax(before.weights);

    const double lambda = rng.uniform(0.1, 5.0);
    for (double& w : p.attn_score_w.a) w *= lambda;
    AttentionTrace after;
    forward(f, cfg, p, &after);
    CHECK(argmax(after.weights) == best_before);
  }
}

TEST_CASE("mean pooling averages history embeddings") {
  DdnConfig cfg = tiny_config();
  cfg.pooling = Pooling::Mean;
  Rng rng(93);
  DdnParams p = oracle::random_params(cfg, rng);
  MovingFrame f = oracle::random_frame(cfg, rng);
  EncodedFrame enc = encode_frame(f, cfg, p);
  Vec pooled = pool(enc, Pooling::Mean, cfg, p);
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    double mean = 0.0;
    for (const Vec& e : enc.history) mean += e[k];
    mean /= static_cast<double>(enc.history.size());
    CHECK(pooled[k] == doctest::Approx(mean).epsilon(1e-14));
  }
}

TEST_CASE("batch loss is the mean squared error over frames") {
  Rng rng(94);
  DdnConfig cfg = tiny_config();
  DdnParams p = oracle::random_params(cfg, rng);
  std::vector<MovingFrame> frames;
  for (int i = 0; i < 7; ++i) frames.push_back(oracle::random_frame(cfg, rng));

  double manual = 0.0;
  for (const MovingFrame& f : frames) {
    double d = forward(f, cfg, p) - f.target;
    manual += d * d;
  }
  manual /= static_cast<double>(frames.size());
  CHECK(batch_loss(frames, cfg, p) == doctest::Approx(manual).epsilon(1e-14));
  CHECK_THROWS_AS(batch_loss(std::vector<MovingFrame>{}, cfg, p), std::invalid_argument);
}

TEST_CASE("encoded-frame batch loss agrees with raw-frame batch loss") {
  Rng rng(95);
  DdnConfig cfg = tiny_config();
  DdnParams p = oracle::random_params(cfg, rng);
  std::vector<MovingFrame> frames;
  std::vector<EncodedFrame> encoded;
  for (int i = 0; i < 5; ++i) {
    frames.push_back(oracle::random_frame(cfg, rng));
    encoded.push_back(encode_frame(frames.back(), cfg, p));
  }
  CHECK(batch_loss(encoded, cfg, p) == doctest::Approx(batch_loss(frames, cfg, p)).epsilon(1e-14));
}

TEST_CASE("gradients match finite differences on small random models") {
  Rng rng(4242);
  for (int round = 0; round < 8; ++round) {
    DdnConfig cfg = oracle::random_small_config(rng);
    if (round % 2 == 0) cfg.pooling = Pooling::Mean;
    DdnParams p = oracle::random_params(cfg, rng);
    std::vector<MovingFrame> frames;
    for (int i = 0; i < 3; ++i) frames.push_back(oracle::random_frame(cfg, rng));
    oracle::GradCheck gc = oracle::gradcheck(frames, cfg, p, 1e-5, 1e-5);
    CHECK(gc.checked > 0);
    CHECK(gc.max_rel_err < 1e-4);
  }
}

TEST_CASE("relu head flag changes the forward value when the hidden layer goes negative") {
  DdnConfig cfg = tiny_config();
  Rng rng(96);
  DdnParams p = oracle::random_params(cfg, rng);
  p.head_hidden_b.assign(p.head_hidden_b.size(), -100.0);  // force negative pre-activations
  MovingFrame f = oracle::random_frame(cfg, rng);

  cfg.head_activation = HeadActivation::None;
  const double affine_out = forward(f, cfg, p);
  cfg.head_activation = HeadActivation::Relu;
  const double relu_out = forward(f, cfg, p);
  CHECK(relu_out == p.head_out_b[0]);  // everything clamped to zero
  CHECK(affine_out != relu_out);
}

TEST_CASE("batch gradient is identical for any thread count") {
  Rng rng(97);
  DdnConfig cfg = tiny_config();
  DdnParams p = oracle::random_params(cfg, rng);
  std::vector<MovingFrame> frames;
  for (int i = 0; i < 9; ++i) frames.push_back(oracle::random_frame(cfg, rng));

  DdnParams g1 = DdnParams::zeros_like(cfg);
  DdnParams g4 = DdnParams::zeros_like(cfg);
  double l1 = batch_loss_backward(frames, cfg, p, g1, 1);
  double l4 = batch_loss_backward(frames, cfg, p, g4, 4);
  CHECK(l1 == l4);
  auto v1 = g1.tensors();
  auto v4 = g4.tensors();
  for (std::size_t t = 0; t < v1.size(); ++t) {
    for (std::size_t i = 0; i < v1[t].size; ++i) {
      CHECK(v1[t].data[i] == v4[t].data[i]);
    }
  }
}

TEST_CASE("index-selected batch gradient equals the gradient of the copied subset") {
  Rng rng(98);
  DdnConfig cfg = tiny_config();
  DdnParams p = oracle::random_params(cfg, rng);
  std::vector<MovingFrame> frames;
  for (int i = 0; i < 6; ++i) frames.push_back(oracle::random_frame(cfg, rng));
  std::vector<std::size_t> pick = {4, 1, 3};
  std::vector<MovingFrame> subset = {frames[4], frames[1], frames[3]};

  DdnParams g_idx = DdnParams::zeros_like(cfg);
  DdnParams g_copy = DdnParams::zeros_like(cfg);
  double l_idx = batch_loss_backward(frames, pick, cfg, p, g_idx);
  double l_copy = batch_loss_backward(subset, cfg, p, g_copy);
  CHECK(l_idx == l_copy);
  auto vi = g_idx.tensors();
  auto vc = g_copy.tensors();
  for (std::size_t t = 0; t < vi.size(); ++t) {
    for (std::size_t i = 0; i < vi[t].size; ++i) CHECK(vi[t].data[i] == vc[t].data[i]);
  }
  CHECK_THROWS_AS(batch_loss_backward(frames, {99}, cfg, p, g_idx), std::invalid_argument);
}

TEST_CASE("forward rejects malformed frames") {
  DdnConfig cfg = tiny_config();
  Rng rng(99);
  DdnParams p = oracle::random_params(cfg, rng);
  MovingFrame f = oracle::random_frame(cfg, rng);
  f.history.pop_back();
  CHECK_THROWS_AS(forward(f, cfg, p), std::invalid_argument);

  EncodedFrame enc;
  enc.reference = Vec(cfg.embed_total(), 0.0);
  enc.history.assign(cfg.history_len, Vec(cfg.embed_total() + 1, 0.0));
  CHECK_THROWS_AS(forward(enc, cfg, p), std::invalid_argument);
}
