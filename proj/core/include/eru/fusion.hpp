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
#include <cstdint>
#include <vector>

#include "eru/doc_model.hpp"
#include "eru/layers.hpp"
#include "eru/model_config.hpp"

namespace eru {

// Log-spaced distance buckets over [0, 1000]: bucket 0 is [0, 1), the
// remaining count - 1 buckets split [1, 1000] geometrically, and distances
// beyond 1000 land in the last bucket.
class DistanceBuckets {
 public:
  explicit DistanceBuckets(std::size_t count = 16);

  std::size_t count() const noexcept { return edges_.size() - 1; }
  // count + 1 strictly increasing edges from 0 to 1000.
  const std::vector<double>& edges() const noexcept { return edges_; }
  std::size_t bucket(double distance) const;

 private:
  std::vector<double> edges_;
};

// Node-pair bucket indices derived from the owning segments' upper-left
// corners; all four node pairs of a segment pair share one entry.
struct RelativeBiasLayout {
  std::size_t nodes = 0;
  std::vector<std::uint16_t> x_bucket;  // nodes * nodes, row-major
  std::vector<std::uint16_t> y_bucket;
};

RelativeBiasLayout relative_bias_layout(const std::vector<BBox>& boxes, const DistanceBuckets& buckets);

// Stack of biased attention blocks over the 2|S| interleaved nodes.
// Per-head x/y lookup tables are shared by every layer.
struct FusionTransformer {
  std::size_t rel_x = 0;  // [heads x buckets]
  std::size_t rel_y = 0;
  std::vector<nn::EncoderLayer> layers;
  std::size_t heads = 1;
  DistanceBuckets buckets;

  template <typename T>
  static FusionTransformer create(nn::ParamStore<T>& store, const ModelConfig& config, Rng& rng);

  // [heads * 2S x 2S] additive logit bias.
  template <typename T>
  nn::Var relative_bias(nn::Tape<T>& tape, const nn::ParamStore<T>& store,
                        const std::vector<BBox>& boxes) const;

  // Contextual node states aligned with x0. `attention`, when non-null,
  // collects each layer's attention node.
  template <typename T>
  nn::Var encode(nn::Tape<T>& tape, const nn::ParamStore<T>& store, nn::Var x0,
                 const std::vector<BBox>& boxes, std::vector<nn::Var>* attention = nullptr) const;
};

}  // namespace eru
