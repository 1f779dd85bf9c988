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

#include "eru/model.hpp"

#include "eru/error.hpp"

namespace eru {

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::kConfig, "model: " + what);
  };
  need(d_model > 0 && heads > 0, "d_model and heads must be positive");
  need(d_model % heads == 0, "d_model must be divisible by heads");
  need(ffn_mult > 0, "ffn_mult must be positive");
  need(rel_buckets >= 2, "rel_buckets must be at least 2");
  need(crop_height > 0 && crop_width > 0, "crop dimensions must be positive");
  need(max_pages > 0, "max_pages must be positive");
  need(max_seg_tokens >= 2, "max_seg_tokens must leave room for [CLS] and [SEP]");
  need(max_segments >= 1, "max_segments must be positive");
  need(crop_enlarge >= 0.0, "crop_enlarge must be non-negative");
  need(init_std > 0.0, "init_std must be positive");
  for (auto c : conv_channels) need(c > 0, "conv channel widths must be positive");
}

std::vector<nn::LearningRateRule> default_rate_rules(double encoder_rate, double head_rate) {
  return {
      {"head.*", head_rate},   {"text.*", encoder_rate},   {"visual.*", encoder_rate},
      {"pos2d.*", encoder_rate}, {"pos1d.*", encoder_rate}, {"fusion.*", encoder_rate},
      {"mask.*", encoder_rate},
  };
}

namespace {

template <typename T>
ModelLayout build_layout(nn::ParamStore<T>& store, const ModelConfig& config, std::size_t vocab_size,
                         const LabelSchema& schema, Rng& rng) {
  config.validate();
  ModelLayout layout;
  layout.embedding = MultiModalEmbedding::create(store, config, vocab_size, rng);
  layout.fusion = FusionTransformer::create(store, config, rng);
  const std::size_t d = config.d_model;
  auto& h = layout.heads;
  h.mask_text = store.add("mask.text", nn::random_normal<T>({1, d}, config.init_std, rng));
  h.mask_visual = store.add("mask.visual", nn::random_normal<T>({1, d}, config.init_std, rng));
  h.mlm = nn::Linear::create(store, "head.mlm", d, vocab_size, rng);
  h.vpa = nn::Mlp::create(store, "head.vpa", 2 * d, d, kDirections, rng);
  h.field = nn::Linear::create(store, "head.field", d, schema.field_count(), rng);
  h.block = nn::Linear::create(store, "head.block", d, schema.block_count(), rng);
  h.pair = nn::Mlp::create(store, "head.pair", 2 * d, d, 2, rng);
  return layout;
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig config, Vocab vocab, LabelSchema schema, std::uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)), schema_(std::move(schema)) {
  Rng rng(seed);
  layout_ = build_layout(params_, config_, vocab_.size(), schema_, rng);
}

template <typename T>
Model<T>::Model(ModelConfig config, Vocab vocab, LabelSchema schema, nn::ParamStore<T> params)
    : config_(std::move(config)), vocab_(std::move(vocab)), schema_(std::move(schema)) {
  Rng rng(0);
  layout_ = build_layout(params_, config_, vocab_.size(), schema_, rng);
  if (params.size() != params_.size()) {
    fail(ErrorKind::kValidation, "model: expected " + std::to_string(params_.size()) + " tensors, got " +
                                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& want = params_[i];
    const auto idx = params.find(want.name);
    if (!idx) fail(ErrorKind::kValidation, "model: missing tensor " + want.name);
    const auto& got = params[*idx];
    if (got.value.shape() != want.value.shape()) {
      fail(ErrorKind::kValidation, "model: tensor " + want.name + " has shape " +
                                       nn::shape_string(got.value.shape()) + ", expected " +
                                       nn::shape_string(want.value.shape()));
    }
    params_[i].value = got.value;
  }
  params_.set_step(params.step());
}

template class Model<float>;
template class Model<double>;

}  // namespace eru
