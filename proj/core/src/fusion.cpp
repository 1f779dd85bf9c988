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

#include "eru/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "eru/error.hpp"

namespace eru {

DistanceBuckets::DistanceBuckets(std::size_t count) {
  if (count < 2 || count > 65535) fail(ErrorKind::kConfig, "relative bias needs 2..65535 buckets");
  edges_.push_back(0.0);
  const double steps = static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) {
    edges_.push_back(std::pow(kNormalizedExtent, static_cast<double>(k) / steps));
  }
  edges_.back() = kNormalizedExtent;
}

std::size_t DistanceBuckets::bucket(double distance) const {
  if (distance < edges_[1]) return 0;
  // First edge strictly greater than distance, minus one.
  auto it = std::upper_bound(edges_.begin(), edges_.end(), distance);
  const auto idx = static_cast<std::size_t>(std::distance(edges_.begin(), it)) - 1;
  return std::min(idx, count() - 1);
}

RelativeBiasLayout relative_bias_layout(const std::vector<BBox>& boxes, const DistanceBuckets& buckets) {
  const std::size_t s = boxes.size();
  const std::size_t n = 2 * s;
  RelativeBiasLayout layout;
  layout.nodes = n;
  layout.x_bucket.resize(n * n);
  layout.y_bucket.resize(n * n);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      const auto bx = static_cast<std::uint16_t>(buckets.bucket(std::abs(boxes[i].x0 - boxes[j].x0)));
      const auto by = static_cast<std::uint16_t>(buckets.bucket(std::abs(boxes[i].y0 - boxes[j].y0)));
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) {
          const std::size_t m = 2 * i + a, k = 2 * j + b;
          layout.x_bucket[m * n + k] = bx;
          layout.y_bucket[m * n + k] = by;
        }
      }
    }
  }
  return layout;
}

template <typename T>
FusionTransformer FusionTransformer::create(nn::ParamStore<T>& store, const ModelConfig& config, Rng& rng) {
  FusionTransformer f;
  f.heads = config.heads;
  f.buckets = DistanceBuckets(config.rel_buckets);
  f.rel_x = store.add("fusion.rel_x", nn::random_normal<T>({config.heads, config.rel_buckets}, config.init_std, rng));
  f.rel_y = store.add("fusion.rel_y", nn::random_normal<T>({config.heads, config.rel_buckets}, config.init_std, rng));
  for (std::size_t l = 0; l < config.fusion_layers; ++l) {
    f.layers.push_back(nn::EncoderLayer::create(store, "fusion.layer" + std::to_string(l), config.d_model,
                                                config.heads, config.ffn_mult * config.d_model, rng));
  }
  return f;
}

template <typename T>
nn::Var FusionTransformer::relative_bias(nn::Tape<T>& tape, const nn::ParamStore<T>& store,
                                         const std::vector<BBox>& boxes) const {
  auto layout = relative_bias_layout(boxes, buckets);
  return tape.bucket_bias(tape.param(store, rel_x), tape.param(store, rel_y), std::move(layout.x_bucket),
                          std::move(layout.y_bucket), layout.nodes);
}

template <typename T>
nn::Var FusionTransformer::encode(nn::Tape<T>& tape, const nn::ParamStore<T>& store, nn::Var x0,
                                  const std::vector<BBox>& boxes, std::vector<nn::Var>* attention) const {
  const std::size_t n = tape.value(x0).rows();
  if (n != 2 * boxes.size()) {
    fail(ErrorKind::kShape, "fusion: " + std::to_string(n) + " nodes for " + std::to_string(boxes.size()) +
                                " segments");
  }
  nn::Var bias = relative_bias(tape, store, boxes);
  nn::Var x = x0;
  for (const auto& layer : layers) {
    nn::Var attn;
    x = layer(tape, store, x, {{0, n}}, bias, &attn);
    if (attention) attention->push_back(attn);
  }
  return x;
}

#define ERU_INSTANTIATE_FUSION(T)                                                                     \
  template FusionTransformer FusionTransformer::create<T>(nn::ParamStore<T>&, const ModelConfig&, Rng&); \
  template nn::Var FusionTransformer::relative_bias<T>(nn::Tape<T>&, const nn::ParamStore<T>&,         \
                                                       const std::vector<BBox>&) const;               \
  template nn::Var FusionTransformer::encode<T>(nn::Tape<T>&, const nn::ParamStore<T>&, nn::Var,       \
                                                const std::vector<BBox>&, std::vector<nn::Var>*) const;

ERU_INSTANTIATE_FUSION(float)
ERU_INSTANTIATE_FUSION(double)

}  // namespace eru
