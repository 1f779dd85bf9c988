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
#include "eru/vocab.hpp"

namespace eru {

// Grows each side by `proportion` of the box's own extent, clipped to [0,1000].
BBox enlarge_box(const BBox& box, double proportion);

// Model-ready view of one normalized, reading-ordered document.
struct DocInputs {
  std::vector<std::vector<std::size_t>> tokens;  // per segment, [CLS] ... [SEP]
  std::vector<BBox> boxes;
  std::vector<std::size_t> pages;
  std::vector<std::size_t> ranks;
  // segments x (crop_height * crop_width) gray levels k/255, zero where absent.
  std::vector<std::uint8_t> crops;
  std::size_t crop_height = 0;
  std::size_t crop_width = 0;

  std::size_t segments() const noexcept { return boxes.size(); }
};

DocInputs make_inputs(const ResumeDoc& doc, const Vocab& vocab, const ModelConfig& config);

struct TextEncoding {
  nn::Var tokens;  // packed [total tokens x d]
  nn::Var cls;     // [segments x d]
  std::vector<std::size_t> offsets;  // segment i owns rows [offsets[i], offsets[i+1])
};

// Per-segment transformer over learned token + intra-segment position
// embeddings; the [CLS] row is the segment's text representation.
struct TextEncoder {
  std::size_t token_embedding = 0;
  std::size_t position_embedding = 0;
  nn::LayerNorm norm;
  std::vector<nn::EncoderLayer> layers;
  std::size_t vocab_size = 0;
  std::size_t max_len = 0;

  template <typename T>
  static TextEncoder create(nn::ParamStore<T>& store, const ModelConfig& config,
                            std::size_t vocab_size, Rng& rng);
  template <typename T>
  TextEncoding operator()(nn::Tape<T>& tape, const nn::ParamStore<T>& store,
                          const std::vector<std::vector<std::size_t>>& tokens) const;
};

// Stride-2 convolutions, global average pool, projection to d_model.
struct VisualEncoder {
  std::vector<std::size_t> conv_weights;
  std::vector<std::size_t> conv_biases;
  std::vector<nn::ConvGeometry> geometry;
  nn::Linear projection;
  std::size_t height = 0;
  std::size_t width = 0;

  template <typename T>
  static VisualEncoder create(nn::ParamStore<T>& store, const ModelConfig& config, Rng& rng);
  // crops: segments x (height * width).
  template <typename T>
  nn::Var operator()(nn::Tape<T>& tape, const nn::ParamStore<T>& store,
                     const std::vector<std::uint8_t>& crops, std::size_t segments) const;
};

// p = Pos2D(x0, y0, x1, y1, width, height, page) + Pos1D(rank / |S|).
struct PositionEncoder {
  nn::Mlp pos2d;
  nn::Mlp pos1d;
  std::size_t max_pages = 1;

  template <typename T>
  static PositionEncoder create(nn::ParamStore<T>& store, const ModelConfig& config, Rng& rng);
  template <typename T>
  nn::Var operator()(nn::Tape<T>& tape, const nn::ParamStore<T>& store,
                     const std::vector<BBox>& boxes, const std::vector<std::size_t>& pages,
                     const std::vector<std::size_t>& ranks) const;
};

struct MultiModalEmbedding {
  TextEncoder text;
  VisualEncoder visual;
  PositionEncoder position;

  template <typename T>
  static MultiModalEmbedding create(nn::ParamStore<T>& store, const ModelConfig& config,
                                    std::size_t vocab_size, Rng& rng);
};

// Node k = 2i is segment i's text node, k = 2i + 1 its visual node.
constexpr std::size_t text_node(std::size_t segment) { return 2 * segment; }
constexpr std::size_t visual_node(std::size_t segment) { return 2 * segment + 1; }
constexpr std::size_t node_segment(std::size_t node) { return node / 2; }

struct NodeSequence {
  nn::Var x0;      // [2S x d], modality embedding + absolute bias, interleaved
  nn::Var text;    // [S x d]
  nn::Var visual;  // [S x d]
  nn::Var bias;    // [S x d]
  TextEncoding text_encoding;
  std::vector<BBox> boxes;
  std::size_t segments = 0;
};

// Segment-level replacement of text and/or visual nodes by mask vectors.
struct NodeMask {
  std::vector<bool> text;
  std::vector<bool> visual;
  nn::Var text_vector;    // [1 x d]
  nn::Var visual_vector;  // [1 x d]
};

// Interleaves text/visual rows (substituting masked ones) and adds the
// segment's absolute bias to both of its nodes.
template <typename T>
nn::Var assemble_nodes(nn::Tape<T>& tape, nn::Var text, nn::Var visual, nn::Var bias,
                       std::size_t segments, const NodeMask* mask = nullptr);

// `tokens`, when given, replaces inputs.tokens (MLM corruption).
template <typename T>
NodeSequence build_nodes(nn::Tape<T>& tape, const nn::ParamStore<T>& store,
                         const MultiModalEmbedding& embedding, const DocInputs& inputs,
                         const std::vector<std::vector<std::size_t>>* tokens = nullptr);

}  // namespace eru
