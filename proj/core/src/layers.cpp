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

#include "eru/layers.hpp"

#include <cmath>

namespace eru::nn {

template <typename T>
Tensor<T> random_normal(Shape shape, double std, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (T& v : t.values()) v = static_cast<T>(rng.normal() * std);
  return t;
}

template <typename T>
Linear Linear::create(ParamStore<T>& store, const std::string& name, std::size_t in,
                      std::size_t out, Rng& rng) {
  Linear l;
  l.in = in;
  l.out = out;
  const double std = std::sqrt(2.0 / static_cast<double>(in + out));
  l.weight = store.add(name + ".weight", random_normal<T>({in, out}, std, rng));
  l.bias = store.add(name + ".bias", Tensor<T>({1, out}));
  return l;
}

template <typename T>
Var Linear::operator()(Tape<T>& tape, const ParamStore<T>& store, Var x) const {
  return tape.linear(x, tape.param(store, weight), tape.param(store, bias));
}

template <typename T>
LayerNorm LayerNorm::create(ParamStore<T>& store, const std::string& name, std::size_t width) {
  LayerNorm n;
  n.gain = store.add(name + ".gain", Tensor<T>({1, width}, T{1}));
  n.bias = store.add(name + ".bias", Tensor<T>({1, width}));
  return n;
}

template <typename T>
Var LayerNorm::operator()(Tape<T>& tape, const ParamStore<T>& store, Var x) const {
  return tape.layer_norm(x, tape.param(store, gain), tape.param(store, bias));
}

template <typename T>
Mlp Mlp::create(ParamStore<T>& store, const std::string& name, std::size_t in, std::size_t width,
                std::size_t out, Rng& rng) {
  Mlp m;
  m.hidden = Linear::create(store, name + ".hidden", in, width, rng);
  m.output = Linear::create(store, name + ".output", width, out, rng);
  return m;
}

template <typename T>
Var Mlp::operator()(Tape<T>& tape, const ParamStore<T>& store, Var x) const {
  return output(tape, store, tape.gelu(hidden(tape, store, x)));
}

template <typename T>
EncoderLayer EncoderLayer::create(ParamStore<T>& store, const std::string& name, std::size_t width,
                                  std::size_t heads, std::size_t ffn_width, Rng& rng) {
  EncoderLayer e;
  e.width = width;
  e.heads = heads;
  const double std = std::sqrt(1.0 / static_cast<double>(width));
  e.wq = store.add(name + ".attn.wq", random_normal<T>({width, width}, std, rng));
  e.bq = store.add(name + ".attn.bq", Tensor<T>({1, width}));
  e.wk = store.add(name + ".attn.wk", random_normal<T>({width, width}, std, rng));
  e.wv = store.add(name + ".attn.wv", random_normal<T>({width, width}, std, rng));
  e.bv = store.add(name + ".attn.bv", Tensor<T>({1, width}));
  e.out = Linear::create(store, name + ".attn.out", width, width, rng);
  e.norm1 = LayerNorm::create(store, name + ".norm1", width);
  e.ffn = Mlp::create(store, name + ".ffn", width, ffn_width, width, rng);
  e.norm2 = LayerNorm::create(store, name + ".norm2", width);
  return e;
}

template <typename T>
Var EncoderLayer::operator()(Tape<T>& tape, const ParamStore<T>& store, Var x,
                             std::vector<std::pair<std::size_t, std::size_t>> blocks, Var bias,
                             Var* attention_out) const {
  Var q = tape.linear(x, tape.param(store, wq), tape.param(store, bq));
  Var k = tape.matmul(x, tape.param(store, wk));
  Var v = tape.linear(x, tape.param(store, wv), tape.param(store, bv));
  AttentionSpec spec;
  spec.heads = heads;
  spec.scale = 1.0 / std::sqrt(static_cast<double>(width / heads));
  spec.blocks = std::move(blocks);
  Var attn = tape.attention(q, k, v, spec, bias);
  if (attention_out) *attention_out = attn;
  Var h = norm1(tape, store, tape.add(x, out(tape, store, attn)));
  return norm2(tape, store, tape.add(h, ffn(tape, store, h)));
}

#define ERU_INSTANTIATE_LAYERS(T)                                                                  \
  template Tensor<T> random_normal<T>(Shape, double, Rng&);                                        \
  template Linear Linear::create<T>(ParamStore<T>&, const std::string&, std::size_t, std::size_t, \
                                    Rng&);                                                         \
  template Var Linear::operator()<T>(Tape<T>&, const ParamStore<T>&, Var) const;                  \
  template LayerNorm LayerNorm::create<T>(ParamStore<T>&, const std::string&, std::size_t);       \
  template Var LayerNorm::operator()<T>(Tape<T>&, const ParamStore<T>&, Var) const;               \
  template Mlp Mlp::create<T>(ParamStore<T>&, const std::string&, std::size_t, std::size_t,       \
                              std::size_t, Rng&);                                                  \
  template Var Mlp::operator()<T>(Tape<T>&, const ParamStore<T>&, Var) const;                     \
  template EncoderLayer EncoderLayer::create<T>(ParamStore<T>&, const std::string&, std::size_t,  \
                                                std::size_t, std::size_t, Rng&);                   \
  template Var EncoderLayer::operator()<T>(Tape<T>&, const ParamStore<T>&, Var,                   \
                                           std::vector<std::pair<std::size_t, std::size_t>>, Var, \
                                           Var*) const;

ERU_INSTANTIATE_LAYERS(float)
ERU_INSTANTIATE_LAYERS(double)

}  // namespace eru::nn
