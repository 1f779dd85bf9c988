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

#pragma once

#include <cstddef>
#include <string>

#include "eru/param_store.hpp"
#include "eru/random.hpp"
#include "eru/tape.hpp"

namespace eru::nn {

// Components hold parameter indices into a ParamStore, so one component
// layout serves both float and double stores built in the same order.

struct Linear {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;

  template <typename T>
  static Linear create(ParamStore<T>& store, const std::string& name, std::size_t in,
                       std::size_t out, Rng& rng);
  template <typename T>
  Var operator()(Tape<T>& tape, const ParamStore<T>& store, Var x) const;
};

struct LayerNorm {
  std::size_t gain = 0;
  std::size_t bias = 0;

  template <typename T>
  static LayerNorm create(ParamStore<T>& store, const std::string& name, std::size_t width);
  template <typename T>
  Var operator()(Tape<T>& tape, const ParamStore<T>& store, Var x) const;
};

// Linear -> GELU -> Linear.
struct Mlp {
  Linear hidden;
  Linear output;

  template <typename T>
  static Mlp create(ParamStore<T>& store, const std::string& name, std::size_t in,
                    std::size_t width, std::size_t out, Rng& rng);
  template <typename T>
  Var operator()(Tape<T>& tape, const ParamStore<T>& store, Var x) const;
};

// Post-norm transformer block: multi-head attention (optionally biased),
// output projection, residual + layer norm, GELU feed-forward, residual +
// layer norm. The key projection has no bias: it would only add a per-row
// constant to the logits, which softmax ignores.
struct EncoderLayer {
  std::size_t wq = 0, bq = 0, wk = 0, wv = 0, bv = 0;
  Linear out;
  LayerNorm norm1;
  Mlp ffn;
  LayerNorm norm2;
  std::size_t width = 0;
  std::size_t heads = 1;

  template <typename T>
  static EncoderLayer create(ParamStore<T>& store, const std::string& name, std::size_t width,
                             std::size_t heads, std::size_t ffn_width, Rng& rng);

  // When `attention_out` is non-null it receives the attention node so callers
  // can inspect the softmax weights.
  template <typename T>
  Var operator()(Tape<T>& tape, const ParamStore<T>& store, Var x,
                 std::vector<std::pair<std::size_t, std::size_t>> blocks, Var bias = {},
                 Var* attention_out = nullptr) const;
};

// Normal(0, std) initialization.
template <typename T>
Tensor<T> random_normal(Shape shape, double std, Rng& rng);

}  // namespace eru::nn
