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

#include <cstdint>
#include <vector>

#include "eru/doc_model.hpp"
#include "eru/embedding.hpp"
#include "eru/fusion.hpp"
#include "eru/model_config.hpp"
#include "eru/param_store.hpp"
#include "eru/vocab.hpp"

namespace eru {

inline constexpr std::size_t kDirections = 4;

struct TaskHeads {
  nn::Linear mlm;     // d -> |V|
  nn::Mlp vpa;        // [v_i : v_j] -> 4 directions
  std::size_t mask_text = 0;    // MSP replacement vectors, [1 x d]
  std::size_t mask_visual = 0;
  nn::Linear field;   // d -> segment field classes
  nn::Linear block;   // d -> block classes
  nn::Mlp pair;       // [t_m : t_n] -> same block?
};

struct ModelLayout {
  MultiModalEmbedding embedding;
  FusionTransformer fusion;
  TaskHeads heads;
};

// Learning-rate rules for the standard parameter naming: encoders, fusion,
// and mask vectors take encoder_rate; every head.* parameter takes head_rate.
std::vector<nn::LearningRateRule> default_rate_rules(double encoder_rate, double head_rate);

// All learned state of the resume model plus the vocabulary and schema it
// was built for.
template <typename T>
class Model {
 public:
  Model(ModelConfig config, Vocab vocab, LabelSchema schema, std::uint64_t seed);
  // Adopts existing values; names and shapes must match the layout.
  Model(ModelConfig config, Vocab vocab, LabelSchema schema, nn::ParamStore<T> params);

  const ModelConfig& config() const noexcept { return config_; }
  const Vocab& vocab() const noexcept { return vocab_; }
  const LabelSchema& schema() const noexcept { return schema_; }
  const ModelLayout& layout() const noexcept { return layout_; }
  nn::ParamStore<T>& params() noexcept { return params_; }
  const nn::ParamStore<T>& params() const noexcept { return params_; }

  template <typename U>
  Model<U> cast() const {
    return Model<U>(config_, vocab_, schema_, params_.template cast<U>());
  }

 private:
  ModelConfig config_;
  Vocab vocab_;
  LabelSchema schema_;
  nn::ParamStore<T> params_;
  ModelLayout layout_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace eru
