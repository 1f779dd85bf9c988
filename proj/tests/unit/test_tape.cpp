// Copyright 2026 The ERU Authors
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

// Finite-difference checks of every differentiable tape op in double precision.

#include <gtest/gtest.h>

#include <functional>
#include <vector>

#include "eru/error.hpp"
#include "eru/grad_check.hpp"
#include "eru/layers.hpp"
#include "eru/random.hpp"
#include "eru/tape.hpp"

namespace eru::nn {
namespace {

using Build = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

// Projects the op output onto a fixed random direction so every output element contributes.
double check_op(const std::vector<Shape>& shapes, const Build& build, std::uint64_t seed = 1) {
  ParamStore<double> store;
  Rng rng(seed);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    store.add("x" + std::to_string(i), random_normal<double>(shapes[i], 1.0, rng));
  }
  const LossFn loss = [&](const ParamStore<double>& params, Gradients<double>* grads) {
    Tape<double> tape(grads, grads != nullptr);
    std::vector<Var> in;
    for (std::size_t i = 0; i < params.size(); ++i) in.push_back(tape.param(params, i));
    const Var out = build(tape, in);
    Rng dir(99);
    const Var w = tape.constant(random_normal<double>(tape.value(out).shape(), 1.0, dir));
    const Var l = tape.sum(tape.mul(out, w));
    const double v = tape.item(l);
    if (grads) tape.backward(l);
    return v;
  };
  return grad_check(loss, store, 1e-6).max_rel_error;
}

constexpr double kTol = 1e-6;

TEST(TapeGrad, Matmul) {
  EXPECT_LT(check_op({{3, 4}, {4, 2}}, [](auto& t, const auto& x) { return t.matmul(x[0], x[1]); }), kTol);
  EXPECT_LT(check_op({{3, 4}, {5, 4}}, [](auto& t, const auto& x) { return t.matmul_nt(x[0], x[1]); }), kTol);
}

TEST(TapeGrad, Elementwise) {
  EXPECT_LT(check_op({{3, 4}, {3, 4}}, [](auto& t, const auto& x) { return t.add(x[0], x[1]); }), kTol);
  EXPECT_LT(check_op({{3, 4}, {1, 4}}, [](auto& t, const auto& x) { return t.add_row(x[0], x[1]); }), kTol);
  EXPECT_LT(check_op({{3, 4}, {3, 4}}, [](auto& t, const auto& x) { return t.mul(x[0], x[1]); }), kTol);
  EXPECT_LT(check_op({{3, 4}}, [](auto& t, const auto& x) { return t.scale(x[0], -0.7); }), kTol);
  EXPECT_LT(check_op({{3, 5}}, [](auto& t, const auto& x) { return t.gelu(x[0]); }), kTol);
}

TEST(TapeGrad, Linear) {
  EXPECT_LT(check_op({{3, 4}, {4, 6}, {1, 6}},
                     [](auto& t, const auto& x) { return t.linear(x[0], x[1], x[2]); }),
            kTol);
}

TEST(TapeGrad, Structural) {
  EXPECT_LT(check_op({{2, 3}, {4, 3}},
                     [](auto& t, const auto& x) { return t.concat_rows(std::vector<Var>{x[0], x[1]}); }),
            kTol);
  EXPECT_LT(check_op({{2, 3}, {2, 5}},
                     [](auto& t, const auto& x) { return t.concat_cols(std::vector<Var>{x[1], x[0]}); }),
            kTol);
  EXPECT_LT(check_op({{3, 6}}, [](auto& t, const auto& x) { return t.slice_cols(x[0], 1, 4); }), kTol);
  EXPECT_LT(check_op({{4, 3}}, [](auto& t, const auto& x) { return t.gather_rows(x[0], {3, 0, 3, 1}); }), kTol);
  EXPECT_LT(check_op({{4, 3}}, [](auto& t, const auto& x) { return t.reshape(x[0], 2, 6); }), kTol);
  EXPECT_LT(check_op({{4, 3}}, [](auto& t, const auto& x) { return t.row_sum(x[0]); }), kTol);
}

TEST(TapeGrad, Normalization) {
  EXPECT_LT(check_op({{3, 5}}, [](auto& t, const auto& x) { return t.row_softmax(x[0]); }), kTol);
  EXPECT_LT(check_op({{3, 6}, {1, 6}, {1, 6}},
                     [](auto& t, const auto& x) { return t.layer_norm(x[0], x[1], x[2]); }),
            1e-5);
  EXPECT_LT(check_op({{3, 4}}, [](auto& t, const auto& x) { return t.l2_normalize_rows(x[0]); }), kTol);
  EXPECT_LT(check_op({{3, 4}, {2, 4}}, [](auto& t, const auto& x) { return t.cosine_similarity(x[0], x[1]); }),
            kTol);
}

TEST(TapeGrad, Reductions) {
  EXPECT_LT(check_op({{3, 4}}, [](auto& t, const auto& x) { return t.mean(x[0]); }), kTol);
  EXPECT_LT(check_op({{3, 4}}, [](auto& t, const auto& x) { return t.sum(x[0]); }), kTol);
  EXPECT_LT(check_op({{3, 5}}, [](auto& t, const auto& x) { return t.cross_entropy(x[0], {0, 4, 2}); }), kTol);
  EXPECT_LT(check_op({{3, 5}},
                     [](auto& t, const auto& x) { return t.cross_entropy(x[0], {1, 1, 3}, Reduction::kSum); }),
            kTol);
}

TEST(TapeGrad, Convolution) {
  ConvGeometry g{2, 5, 6, 3, 3, 2, 1};
  EXPECT_LT(check_op({{2, 2 * 5 * 6}, {3, 2 * 9}, {1, 3}},
                     [g](auto& t, const auto& x) { return t.conv2d(x[0], x[1], x[2], g); }),
            kTol);
  EXPECT_LT(check_op({{2, 12}}, [](auto& t, const auto& x) { return t.channel_mean(x[0], 3); }), kTol);
}

TEST(TapeGrad, AttentionWithBiasAndBlocks) {
  AttentionSpec spec{2, 0.5, {{0, 3}, {3, 5}}};
  EXPECT_LT(check_op({{5, 4}, {5, 4}, {5, 4}, {10, 5}},
                     [spec](auto& t, const auto& x) { return t.attention(x[0], x[1], x[2], spec, x[3]); }),
            kTol);
}

TEST(TapeGrad, BucketBias) {
  const std::vector<std::uint16_t> bx{0, 1, 2, 1, 0, 3, 2, 3, 0};
  const std::vector<std::uint16_t> by{0, 2, 2, 2, 0, 1, 2, 1, 0};
  EXPECT_LT(check_op({{2, 4}, {2, 4}},
                     [&](auto& t, const auto& x) { return t.bucket_bias(x[0], x[1], bx, by, 3); }),
            kTol);
}

TEST(TapeGrad, EncoderLayer) {
  ParamStore<double> store;
  Rng rng(3);
  const auto layer = EncoderLayer::create(store, "enc", 8, 2, 16, rng);
  for (auto& p : store) p.value = random_normal<double>(p.value.shape(), 0.4, rng);
  const std::size_t x_index = store.add("input", random_normal<double>({4, 8}, 1.0, rng));
  const LossFn loss = [&](const ParamStore<double>& params, Gradients<double>* grads) {
    Tape<double> tape(grads, grads != nullptr);
    const Var x = tape.param(params, x_index);
    const Var out = layer(tape, params, x, {{0, 4}});
    Rng dir(5);
    const Var w = tape.constant(random_normal<double>({4, 8}, 1.0, dir));
    const Var l = tape.sum(tape.mul(out, w));
    const double v = tape.item(l);
    if (grads) tape.backward(l);
    return v;
  };
  EXPECT_LT(grad_check(loss, store, 1e-6).max_rel_error, 1e-4);
}

TEST(Tape, ShapeMismatchIsShapeError) {
  Tape<double> tape;
  const Var a = tape.constant(Tensor<double>::matrix(2, 3, 1.0));
  const Var b = tape.constant(Tensor<double>::matrix(2, 3, 1.0));
  try {
    tape.matmul(a, b);
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(Tape, CrossEntropyStableForExtremeLogits) {
  Tape<double> tape;
  Tensor<double> logits({1, 3}, std::vector<double>{1000.0, -1000.0, 0.0});
  const Var l = tape.cross_entropy(tape.constant(logits), {1});
  EXPECT_NEAR(tape.item(l), 2000.0, 1e-9);
}

TEST(Tape, AttentionRowsSumToOne) {
  Rng rng(11);
  Tape<double> tape;
  const Var q = tape.constant(random_normal<double>({6, 4}, 3.0, rng));
  const Var k = tape.constant(random_normal<double>({6, 4}, 3.0, rng));
  const Var v = tape.constant(random_normal<double>({6, 4}, 1.0, rng));
  const Var out = tape.attention(q, k, v, AttentionSpec{2, 0.5, {}});
  for (std::size_t h = 0; h < 2; ++h) {
    const auto w = tape.attention_weights(out, h, 0);
    for (std::size_t r = 0; r < 6; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 6; ++c) s += w(r, c);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Optimizer, GlobMatchAndRateResolution) {
  EXPECT_TRUE(glob_match("head.*", "head.mlm.weight"));
  EXPECT_FALSE(glob_match("head.*", "text.layer0.wq"));
  EXPECT_TRUE(glob_match("*", "anything"));
  ParamStore<float> store;
  store.add("head.a", Tensor<float>::matrix(1, 1));
  store.add("text.b", Tensor<float>::matrix(1, 1));
  const std::vector<LearningRateRule> rules{{"head.*", 1e-3}, {"*", 5e-5}};
  const auto rates = resolve_rates(store, rules);
  EXPECT_DOUBLE_EQ(rates[0], 1e-3);
  EXPECT_DOUBLE_EQ(rates[1], 5e-5);
}

TEST(Optimizer, AdamWFirstStepMovesByLearningRate) {
  ParamStore<double> store;
  store.add("w", Tensor<double>({1, 2}, std::vector<double>{1.0, -2.0}));
  Gradients<double> g(1);
  g.slot(0, {1, 2}) = Tensor<double>({1, 2}, std::vector<double>{0.5, -3.0});
  store.zero_grad();
  store.accumulate(g);
  const std::vector<LearningRateRule> rules{{"*", 0.1}};
  adamw_step(store, rules, AdamWOptions{0.9, 0.999, 1e-8, 0.0});
  // The bias-corrected first step is lr * sign(g) up to eps.
  EXPECT_NEAR(store[0].value[0], 0.9, 1e-6);
  EXPECT_NEAR(store[0].value[1], -1.9, 1e-6);
}

TEST(Optimizer, ClipScalesToMaxNorm) {
  ParamStore<double> store;
  store.add("w", Tensor<double>({1, 2}));
  Gradients<double> g(1);
  g.slot(0, {1, 2}) = Tensor<double>({1, 2}, std::vector<double>{3.0, 4.0});
  store.zero_grad();
  store.accumulate(g);
  EXPECT_DOUBLE_EQ(clip_grad_norm(store, 1.0), 5.0);
  EXPECT_NEAR(store.grad_norm(), 1.0, 1e-12);
}

}  // namespace
}  // namespace eru::nn
