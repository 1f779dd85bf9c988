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

#include "eru/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "eru/error.hpp"

namespace eru {

BBox enlarge_box(const BBox& box, double proportion) {
  const double dx = box.width() * proportion;
  const double dy = box.height() * proportion;
  return {std::clamp(box.x0 - dx, 0.0, kNormalizedExtent), std::clamp(box.y0 - dy, 0.0, kNormalizedExtent),
          std::clamp(box.x1 + dx, 0.0, kNormalizedExtent), std::clamp(box.y1 + dy, 0.0, kNormalizedExtent)};
}

DocInputs make_inputs(const ResumeDoc& source, const Vocab& vocab, const ModelConfig& config) {
  ResumeDoc doc = normalize_boxes(source);
  if (std::any_of(doc.segments.begin(), doc.segments.end(), [](const Segment& s) { return !s.rank; })) {
    doc = assign_reading_order(std::move(doc));
  }
  if (doc.segments.size() > config.max_segments) {
    fail(ErrorKind::kValidation, "document " + doc.id + " exceeds " +
                                     std::to_string(config.max_segments) + " segments");
  }
  DocInputs in;
  in.crop_height = config.crop_height;
  in.crop_width = config.crop_width;
  const std::size_t pixels = config.crop_height * config.crop_width;
  in.crops.assign(doc.segments.size() * pixels, 0);
  for (std::size_t i = 0; i < doc.segments.size(); ++i) {
    const auto& s = doc.segments[i];
    in.tokens.push_back(vocab.encode(s.text, config.max_seg_tokens));
    in.boxes.push_back(s.bbox);
    in.pages.push_back(s.page);
    in.ranks.push_back(*s.rank);
    if (s.crop) {
      if (s.crop->height != config.crop_height || s.crop->width != config.crop_width) {
        fail(ErrorKind::kShape, "segment " + std::to_string(s.id) + ": crop is " +
                                    std::to_string(s.crop->height) + "x" + std::to_string(s.crop->width) +
                                    ", expected " + std::to_string(config.crop_height) + "x" +
                                    std::to_string(config.crop_width));
      }
      std::uint8_t* dst = in.crops.data() + i * pixels;
      for (std::size_t p = 0; p < pixels; ++p) {
        dst[p] = static_cast<std::uint8_t>(std::lround(std::clamp(s.crop->pixels[p], 0.0f, 1.0f) * 255.0f));
      }
    }
  }
  return in;
}

template <typename T>
TextEncoder TextEncoder::create(nn::ParamStore<T>& store, const ModelConfig& config,
                                std::size_t vocab_size, Rng& rng) {
  TextEncoder e;
  e.vocab_size = vocab_size;
  e.max_len = config.max_seg_tokens;
  e.token_embedding = store.add("text.token_embedding",
                                nn::random_normal<T>({vocab_size, config.d_model}, config.init_std, rng));
  e.position_embedding = store.add(
      "text.position_embedding", nn::random_normal<T>({config.max_seg_tokens, config.d_model}, config.init_std, rng));
  e.norm = nn::LayerNorm::create(store, "text.embedding_norm", config.d_model);
  for (std::size_t l = 0; l < config.text_layers; ++l) {
    e.layers.push_back(nn::EncoderLayer::create(store, "text.layer" + std::to_string(l), config.d_model,
                                                config.heads, config.ffn_mult * config.d_model, rng));
  }
  return e;
}

template <typename T>
TextEncoding TextEncoder::operator()(nn::Tape<T>& tape, const nn::ParamStore<T>& store,
                                     const std::vector<std::vector<std::size_t>>& tokens) const {
  TextEncoding enc;
  std::vector<std::size_t> ids, positions, cls_rows;
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  enc.offsets.push_back(0);
  for (const auto& seq : tokens) {
    if (seq.empty() || seq.size() > max_len) {
      fail(ErrorKind::kShape, "encode_text: sequence of " + std::to_string(seq.size()) +
                                  " tokens exceeds the " + std::to_string(max_len) + "-token limit");
    }
    const std::size_t begin = ids.size();
    cls_rows.push_back(begin);
    for (std::size_t p = 0; p < seq.size(); ++p) {
      if (seq[p] >= vocab_size) fail(ErrorKind::kShape, "encode_text: token id outside vocabulary");
      ids.push_back(seq[p]);
      positions.push_back(p);
    }
    blocks.emplace_back(begin, ids.size());
    enc.offsets.push_back(ids.size());
  }
  nn::Var x = tape.add(tape.gather_rows(tape.param(store, token_embedding), std::move(ids)),
                       tape.gather_rows(tape.param(store, position_embedding), std::move(positions)));
  x = norm(tape, store, x);
  for (const auto& layer : layers) x = layer(tape, store, x, blocks);
  enc.tokens = x;
  enc.cls = tape.gather_rows(x, std::move(cls_rows));
  return enc;
}

template <typename T>
VisualEncoder VisualEncoder::create(nn::ParamStore<T>& store, const ModelConfig& config, Rng& rng) {
  VisualEncoder e;
  e.height = config.crop_height;
  e.width = config.crop_width;
  std::size_t in_c = 1, h = config.crop_height, w = config.crop_width;
  for (std::size_t l = 0; l < config.conv_channels.size(); ++l) {
    nn::ConvGeometry g;
    g.in_channels = in_c;
    g.height = h;
    g.width = w;
    g.out_channels = config.conv_channels[l];
    g.kernel = 3;
    g.stride = 2;
    g.pad = 1;
    const std::size_t fan_in = in_c * g.kernel * g.kernel;
    const std::string name = "visual.conv" + std::to_string(l);
    e.conv_weights.push_back(store.add(
        name + ".weight", nn::random_normal<T>({g.out_channels, fan_in}, std::sqrt(2.0 / static_cast<double>(fan_in)), rng)));
    e.conv_biases.push_back(store.add(name + ".bias", nn::Tensor<T>({1, g.out_channels})));
    e.geometry.push_back(g);
    in_c = g.out_channels;
    h = g.out_height();
    w = g.out_width();
  }
  e.projection = nn::Linear::create(store, "visual.projection", in_c, config.d_model, rng);
  return e;
}

template <typename T>
nn::Var VisualEncoder::operator()(nn::Tape<T>& tape, const nn::ParamStore<T>& store,
                                  const std::vector<std::uint8_t>& crops, std::size_t segments) const {
  const std::size_t pixels = height * width;
  if (crops.size() != segments * pixels) {
    fail(ErrorKind::kShape, "encode_visual: expected " + std::to_string(segments) + " rasters of " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
  nn::Tensor<T> input({segments, pixels});
  for (std::size_t i = 0; i < crops.size(); ++i) input[i] = static_cast<T>(crops[i]) / T(255);
  nn::Var x = tape.constant(std::move(input));
  for (std::size_t l = 0; l < geometry.size(); ++l) {
    x = tape.gelu(tape.conv2d(x, tape.param(store, conv_weights[l]), tape.param(store, conv_biases[l]), geometry[l]));
  }
  const std::size_t channels = geometry.empty() ? 1 : geometry.back().out_channels;
  return projection(tape, store, tape.channel_mean(x, channels));
}

template <typename T>
PositionEncoder PositionEncoder::create(nn::ParamStore<T>& store, const ModelConfig& config, Rng& rng) {
  PositionEncoder e;
  e.max_pages = config.max_pages;
  e.pos2d = nn::Mlp::create(store, "pos2d", 7, config.d_model, config.d_model, rng);
  e.pos1d = nn::Mlp::create(store, "pos1d", 1, config.d_model, config.d_model, rng);
  return e;
}

template <typename T>
nn::Var PositionEncoder::operator()(nn::Tape<T>& tape, const nn::ParamStore<T>& store,
                                    const std::vector<BBox>& boxes, const std::vector<std::size_t>& pages,
                                    const std::vector<std::size_t>& ranks) const {
  const std::size_t n = boxes.size();
  if (pages.size() != n || ranks.size() != n) fail(ErrorKind::kShape, "absolute_bias: ragged inputs");
  nn::Tensor<T> geo({n, 7});
  nn::Tensor<T> order({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    if (ranks[i] >= n) {
      fail(ErrorKind::kValidation, "absolute_bias: rank " + std::to_string(ranks[i]) +
                                       " out of range for " + std::to_string(n) + " segments");
    }
    const auto& b = boxes[i];
    const double s = 1.0 / kNormalizedExtent;
    const T row[7] = {static_cast<T>(b.x0 * s), static_cast<T>(b.y0 * s), static_cast<T>(b.x1 * s),
                      static_cast<T>(b.y1 * s), static_cast<T>(b.width() * s), static_cast<T>(b.height() * s),
                      static_cast<T>(static_cast<double>(pages[i]) / static_cast<double>(max_pages))};
    std::copy(row, row + 7, geo.row(i).begin());
    order(i, 0) = static_cast<T>(static_cast<double>(ranks[i]) / static_cast<double>(n));
  }
  return tape.add(pos2d(tape, store, tape.constant(std::move(geo))),
                  pos1d(tape, store, tape.constant(std::move(order))));
}

template <typename T>
MultiModalEmbedding MultiModalEmbedding::create(nn::ParamStore<T>& store, const ModelConfig& config,
                                                std::size_t vocab_size, Rng& rng) {
  MultiModalEmbedding m;
  m.text = TextEncoder::create(store, config, vocab_size, rng);
  m.visual = VisualEncoder::create(store, config, rng);
  m.position = PositionEncoder::create(store, config, rng);
  return m;
}

template <typename T>
nn::Var assemble_nodes(nn::Tape<T>& tape, nn::Var text, nn::Var visual, nn::Var bias,
                       std::size_t segments, const NodeMask* mask) {
  std::vector<nn::Var> sources{text, visual};
  const std::size_t mask_text_row = 2 * segments, mask_visual_row = 2 * segments + 1;
  if (mask) {
    if (mask->text.size() != segments || mask->visual.size() != segments) {
      fail(ErrorKind::kShape, "assemble_nodes: mask does not cover every segment");
    }
    sources.push_back(mask->text_vector);
    sources.push_back(mask->visual_vector);
  }
  std::vector<std::size_t> rows(2 * segments), bias_rows(2 * segments);
  for (std::size_t i = 0; i < segments; ++i) {
    rows[text_node(i)] = (mask && mask->text[i]) ? mask_text_row : i;
    rows[visual_node(i)] = (mask && mask->visual[i]) ? mask_visual_row : segments + i;
    bias_rows[text_node(i)] = i;
    bias_rows[visual_node(i)] = i;
  }
  nn::Var stacked = tape.concat_rows(sources);
  return tape.add(tape.gather_rows(stacked, std::move(rows)), tape.gather_rows(bias, std::move(bias_rows)));
}

template <typename T>
NodeSequence build_nodes(nn::Tape<T>& tape, const nn::ParamStore<T>& store,
                         const MultiModalEmbedding& embedding, const DocInputs& inputs,
                         const std::vector<std::vector<std::size_t>>* tokens) {
  NodeSequence nodes;
  nodes.segments = inputs.segments();
  nodes.boxes = inputs.boxes;
  nodes.text_encoding = embedding.text(tape, store, tokens ? *tokens : inputs.tokens);
  nodes.text = nodes.text_encoding.cls;
  nodes.visual = embedding.visual(tape, store, inputs.crops, nodes.segments);
  nodes.bias = embedding.position(tape, store, inputs.boxes, inputs.pages, inputs.ranks);
  nodes.x0 = assemble_nodes(tape, nodes.text, nodes.visual, nodes.bias, nodes.segments);
  return nodes;
}

#define ERU_INSTANTIATE_EMBEDDING(T)                                                                    \
  template TextEncoder TextEncoder::create<T>(nn::ParamStore<T>&, const ModelConfig&, std::size_t, Rng&); \
  template TextEncoding TextEncoder::operator()<T>(nn::Tape<T>&, const nn::ParamStore<T>&,               \
                                                   const std::vector<std::vector<std::size_t>>&) const;  \
  template VisualEncoder VisualEncoder::create<T>(nn::ParamStore<T>&, const ModelConfig&, Rng&);         \
  template nn::Var VisualEncoder::operator()<T>(nn::Tape<T>&, const nn::ParamStore<T>&,                 \
                                                const std::vector<std::uint8_t>&, std::size_t) const;         \
  template PositionEncoder PositionEncoder::create<T>(nn::ParamStore<T>&, const ModelConfig&, Rng&);     \
  template nn::Var PositionEncoder::operator()<T>(nn::Tape<T>&, const nn::ParamStore<T>&,               \
                                                  const std::vector<BBox>&, const std::vector<std::size_t>&, \
                                                  const std::vector<std::size_t>&) const;              \
  template MultiModalEmbedding MultiModalEmbedding::create<T>(nn::ParamStore<T>&, const ModelConfig&,   \
                                                              std::size_t, Rng&);                       \
  template nn::Var assemble_nodes<T>(nn::Tape<T>&, nn::Var, nn::Var, nn::Var, std::size_t, const NodeMask*); \
  template NodeSequence build_nodes<T>(nn::Tape<T>&, const nn::ParamStore<T>&, const MultiModalEmbedding&, \
                                       const DocInputs&, const std::vector<std::vector<std::size_t>>*);

ERU_INSTANTIATE_EMBEDDING(float)
ERU_INSTANTIATE_EMBEDDING(double)

}  // namespace eru
