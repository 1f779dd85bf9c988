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
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eru/config.hpp"
#include "eru/embedding.hpp"
#include "eru/model.hpp"

namespace eru {

enum class Direction : std::uint8_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

std::string_view direction_name(Direction d);

// Direction of the neighbor's center as seen from the anchor's center, with
// y growing downward. Ties |dy| == |dx| resolve vertically.
Direction direction_label(const BBox& anchor, const BBox& neighbor);

// Every random choice one pre-training step makes for one document.
struct MaskPlan {
  // Token ids after MLM corruption; [CLS]/[SEP] are never touched.
  std::vector<std::vector<std::size_t>> tokens;
  std::vector<std::pair<std::size_t, std::size_t>> mlm_positions;  // (segment, position)
  std::vector<std::size_t> mlm_targets;                            // original ids

  std::vector<bool> msp_text;    // segment's text node replaced
  std::vector<bool> msp_visual;  // segment's visual node replaced
  std::vector<std::size_t> msp_nodes;                 // masked node indices, ascending
  std::vector<std::vector<std::size_t>> msp_negatives;  // per masked node

  std::vector<std::size_t> vpa_anchor;
  std::vector<std::size_t> vpa_neighbor;
  std::vector<Direction> vpa_label;
};

MaskPlan make_mask_plan(const DocInputs& inputs, std::size_t vocab_size, const PretrainWeights& weights,
                        Rng& rng);

// Number of MSP negatives used for a document of `segments` segments.
std::size_t msp_negative_count(std::size_t segments, const PretrainWeights& weights);

// k nearest same-page segments by center distance, excluding coincident
// centers; ties broken by index.
std::vector<std::size_t> nearest_neighbors(const std::vector<BBox>& boxes, const std::vector<std::size_t>& pages,
                                           std::size_t anchor, std::size_t k);

struct PretrainTerms {
  double mlm = 0.0;
  double vpa = 0.0;
  double msp = 0.0;
  double total = 0.0;
  std::size_t mlm_empty = 0;  // documents with no masked token
};

struct PretrainGraph {
  nn::Var mlm;  // invalid when the term is skipped
  nn::Var vpa;
  nn::Var msp;
  nn::Var total;
  PretrainTerms values;
};

// Mean cross-entropy over masked positions, read from the text encoder's
// per-token outputs.
template <typename T>
nn::Var mlm_loss(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store,
                 const TextEncoding& encoding, const MaskPlan& plan);

// Mean 4-way cross-entropy over [v_i : v_j] of raw visual embeddings.
template <typename T>
nn::Var vpa_loss(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store,
                 nn::Var visual, const MaskPlan& plan);

// InfoNCE between clean and masked fusion outputs. Row m of `clean` is the
// anchor; candidates are masked[m] (target) then masked[negatives...].
template <typename T>
nn::Var contrastive_loss(nn::Tape<T>& tape, nn::Var clean, nn::Var masked, const std::vector<std::size_t>& nodes,
                         const std::vector<std::vector<std::size_t>>& negatives, double tau);

template <typename T>
nn::Var msp_loss(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store,
                 const NodeSequence& nodes, const MaskPlan& plan, const PretrainWeights& weights);

// L_pre = lambda_mlm * L_MLM + lambda_vpa * L_VPA + lambda_msp * L_MSP on one
// document. One text-encoder pass over the MLM-corrupted tokens feeds all
// three objectives.
template <typename T>
PretrainGraph pretrain_losses(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store,
                              const DocInputs& inputs, const MaskPlan& plan, const PretrainWeights& weights);

struct PretrainRecord {
  std::size_t step = 0;
  PretrainTerms terms;
  double grad_norm = 0.0;
};

struct PretrainOptions {
  PretrainConfig config;
  std::uint64_t seed = 7;
  std::size_t threads = 1;
  std::function<void(const PretrainRecord&)> on_step;
};

// One optimizer update over a batch; returns batch-mean terms.
PretrainRecord pretrain_step(Model<float>& model, const std::vector<const DocInputs*>& batch,
                             const PretrainOptions& options, std::size_t step);

std::vector<PretrainRecord> train_pretrain(Model<float>& model, const std::vector<DocInputs>& corpus,
                                           const PretrainOptions& options);

// step,l_pre,l_mlm,l_vpa,l_msp
std::string loss_history_csv(const std::vector<PretrainRecord>& history);

// Per-step learning-rate rules with linear warmup applied.
std::vector<nn::LearningRateRule> scheduled_rules(const OptimConfig& optim, std::size_t step);

}  // namespace eru
