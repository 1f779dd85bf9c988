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

#include "eru/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "eru/error.hpp"
#include "eru/parallel.hpp"

namespace eru {

std::string_view direction_name(Direction d) {
  switch (d) {
    case Direction::kUp: return "up";
    case Direction::kDown: return "down";
    case Direction::kLeft: return "left";
    case Direction::kRight: return "right";
  }
  return "?";
}

Direction direction_label(const BBox& anchor, const BBox& neighbor) {
  const double dx = neighbor.cx() - anchor.cx();
  const double dy = neighbor.cy() - anchor.cy();
  if (dx == 0.0 && dy == 0.0) fail(ErrorKind::kValidation, "direction_label: coincident centers");
  if (std::abs(dy) >= std::abs(dx)) return dy < 0 ? Direction::kUp : Direction::kDown;
  return dx < 0 ? Direction::kLeft : Direction::kRight;
}

std::vector<std::size_t> nearest_neighbors(const std::vector<BBox>& boxes, const std::vector<std::size_t>& pages,
                                           std::size_t anchor, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> cand;
  const auto& a = boxes[anchor];
  for (std::size_t j = 0; j < boxes.size(); ++j) {
    if (j == anchor || pages[j] != pages[anchor]) continue;
    const double dx = boxes[j].cx() - a.cx(), dy = boxes[j].cy() - a.cy();
    if (dx == 0.0 && dy == 0.0) continue;
    cand.emplace_back(dx * dx + dy * dy, j);
  }
  const std::size_t take = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
  std::vector<std::size_t> out(take);
  for (std::size_t i = 0; i < take; ++i) out[i] = cand[i].second;
  return out;
}

std::size_t msp_negative_count(std::size_t segments, const PretrainWeights& weights) {
  return std::max<std::size_t>(1, std::min(weights.n_neg, segments / 2));
}

MaskPlan make_mask_plan(const DocInputs& inputs, std::size_t vocab_size, const PretrainWeights& weights, Rng& rng) {
  const std::size_t S = inputs.segments();
  MaskPlan plan;

  // MLM: 15% of content tokens; 80% [MASK], 10% random word, 10% unchanged.
  plan.tokens = inputs.tokens;
  for (std::size_t i = 0; i < S; ++i) {
    auto& seq = plan.tokens[i];
    for (std::size_t p = 1; p + 1 < seq.size(); ++p) {
      if (!rng.bernoulli(weights.mlm_rate)) continue;
      plan.mlm_positions.emplace_back(i, p);
      plan.mlm_targets.push_back(seq[p]);
      const double u = rng.uniform();
      if (u < 0.8) {
        seq[p] = Vocab::kMask;
      } else if (u < 0.9 && vocab_size > Vocab::kSpecialCount) {
        seq[p] = Vocab::kSpecialCount + rng.index(vocab_size - Vocab::kSpecialCount);
      }
    }
  }

  // MSP: q disjoint segments, split between text and visual nodes.
  plan.msp_text.assign(S, false);
  plan.msp_visual.assign(S, false);
  if (S >= 2) {
    // The small slack keeps products such as 0.3 * 10 from rounding up past an integer.
    const double raw = weights.msp_rate * 2.0 * static_cast<double>(S);
    std::size_t q = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
    q = std::min(q, S - 1);
    std::size_t q_text = q / 2;
    if (q % 2 == 1 && rng.bernoulli(0.5)) ++q_text;
    const auto chosen = rng.sample_without_replacement(S, q);
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      if (k < q_text) {
        plan.msp_text[chosen[k]] = true;
      } else {
        plan.msp_visual[chosen[k]] = true;
      }
    }
    for (std::size_t i = 0; i < S; ++i) {
      if (plan.msp_text[i]) plan.msp_nodes.push_back(text_node(i));
      if (plan.msp_visual[i]) plan.msp_nodes.push_back(visual_node(i));
    }
    const std::size_t n_neg = msp_negative_count(S, weights);
    for (auto m : plan.msp_nodes) {
      auto draw = rng.sample_without_replacement(2 * S - 1, n_neg);
      for (auto& d : draw) d += (d >= m) ? 1 : 0;  // skip the positive
      plan.msp_negatives.push_back(std::move(draw));
    }
  }

  // VPA: one neighbor per segment from its nearest same-page segments.
  for (std::size_t i = 0; i < S; ++i) {
    const auto pool = nearest_neighbors(inputs.boxes, inputs.pages, i, weights.vpa_neighbors);
    if (pool.empty()) continue;
    const std::size_t j = pool[rng.index(pool.size())];
    plan.vpa_anchor.push_back(i);
    plan.vpa_neighbor.push_back(j);
    plan.vpa_label.push_back(direction_label(inputs.boxes[i], inputs.boxes[j]));
  }
  return plan;
}

template <typename T>
nn::Var mlm_loss(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store,
                 const TextEncoding& encoding, const MaskPlan& plan) {
  if (plan.mlm_positions.empty()) return {};
  std::vector<std::size_t> rows;
  rows.reserve(plan.mlm_positions.size());
  for (auto [seg, pos] : plan.mlm_positions) rows.push_back(encoding.offsets[seg] + pos);
  const nn::Var h = tape.gather_rows(encoding.tokens, std::move(rows));
  return tape.cross_entropy(layout.heads.mlm(tape, store, h), plan.mlm_targets);
}

template <typename T>
nn::Var vpa_loss(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store, nn::Var visual,
                 const MaskPlan& plan) {
  if (plan.vpa_anchor.empty()) return {};
  const nn::Var parts[2] = {tape.gather_rows(visual, plan.vpa_anchor), tape.gather_rows(visual, plan.vpa_neighbor)};
  std::vector<std::size_t> targets;
  for (auto d : plan.vpa_label) targets.push_back(static_cast<std::size_t>(d));
  return tape.cross_entropy(layout.heads.vpa(tape, store, tape.concat_cols(parts)), std::move(targets));
}

template <typename T>
nn::Var contrastive_loss(nn::Tape<T>& tape, nn::Var clean, nn::Var masked, const std::vector<std::size_t>& nodes,
                         const std::vector<std::vector<std::size_t>>& negatives, double tau) {
  if (nodes.empty()) return {};
  if (negatives.size() != nodes.size()) fail(ErrorKind::kShape, "contrastive_loss: one negative list per node");
  const std::size_t width = negatives.front().size() + 1;
  std::vector<std::size_t> anchors, candidates;
  for (std::size_t t = 0; t < nodes.size(); ++t) {
    if (negatives[t].size() + 1 != width) fail(ErrorKind::kShape, "contrastive_loss: ragged negatives");
    anchors.insert(anchors.end(), width, nodes[t]);
    candidates.push_back(nodes[t]);
    candidates.insert(candidates.end(), negatives[t].begin(), negatives[t].end());
  }
  const nn::Var a = tape.l2_normalize_rows(tape.gather_rows(clean, std::move(anchors)));
  const nn::Var c = tape.l2_normalize_rows(tape.gather_rows(masked, std::move(candidates)));
  const nn::Var sims = tape.row_sum(tape.mul(a, c));
  const nn::Var logits = tape.reshape(tape.scale(sims, static_cast<T>(1.0 / tau)), nodes.size(), width);
  return tape.cross_entropy(logits, std::vector<std::size_t>(nodes.size(), 0));
}

template <typename T>
nn::Var msp_loss(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store,
                 const NodeSequence& nodes, const MaskPlan& plan, const PretrainWeights& weights) {
  if (nodes.segments < 2 || plan.msp_nodes.empty()) return {};
  NodeMask mask{plan.msp_text, plan.msp_visual, tape.param(store, layout.heads.mask_text),
                tape.param(store, layout.heads.mask_visual)};
  const nn::Var masked_x0 = assemble_nodes(tape, nodes.text, nodes.visual, nodes.bias, nodes.segments, &mask);
  const nn::Var clean = layout.fusion.encode(tape, store, nodes.x0, nodes.boxes);
  const nn::Var masked = layout.fusion.encode(tape, store, masked_x0, nodes.boxes);
  return contrastive_loss(tape, clean, masked, plan.msp_nodes, plan.msp_negatives, weights.tau);
}

template <typename T>
PretrainGraph pretrain_losses(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store,
                              const DocInputs& inputs, const MaskPlan& plan, const PretrainWeights& weights) {
  PretrainGraph g;
  const NodeSequence nodes = build_nodes(tape, store, layout.embedding, inputs, &plan.tokens);
  g.mlm = mlm_loss(tape, layout, store, nodes.text_encoding, plan);
  g.vpa = vpa_loss(tape, layout, store, nodes.visual, plan);
  if (weights.lambda_msp > 0) g.msp = msp_loss(tape, layout, store, nodes, plan, weights);

  std::vector<nn::Var> weighted;
  auto take = [&](nn::Var v, double lambda, double& out, const char* name) {
    if (!v.valid()) return;
    out = static_cast<double>(tape.item(v));
    if (!std::isfinite(out)) fail(ErrorKind::kNumeric, std::string("pretrain: ") + name + " loss is not finite");
    weighted.push_back(tape.scale(v, static_cast<T>(lambda)));
  };
  take(g.mlm, weights.lambda_mlm, g.values.mlm, "MLM");
  take(g.vpa, weights.lambda_vpa, g.values.vpa, "VPA");
  take(g.msp, weights.lambda_msp, g.values.msp, "MSP");
  g.values.mlm_empty = plan.mlm_positions.empty() ? 1 : 0;
  if (weighted.empty()) {
    g.total = tape.constant(nn::Tensor<T>::scalar(T{0}));
  } else {
    g.total = weighted.front();
    for (std::size_t i = 1; i < weighted.size(); ++i) g.total = tape.add(g.total, weighted[i]);
  }
  g.values.total = weights.lambda_mlm * g.values.mlm + weights.lambda_vpa * g.values.vpa +
                   weights.lambda_msp * g.values.msp;
  return g;
}

std::vector<nn::LearningRateRule> scheduled_rules(const OptimConfig& optim, std::size_t step) {
  double factor = 1.0;
  if (optim.warmup_steps > 0 && step < optim.warmup_steps) {
    factor = static_cast<double>(step + 1) / static_cast<double>(optim.warmup_steps);
  }
  return default_rate_rules(optim.encoder_lr * factor, optim.head_lr * factor);
}

PretrainRecord pretrain_step(Model<float>& model, const std::vector<const DocInputs*>& batch,
                             const PretrainOptions& options, std::size_t step) {
  if (batch.empty()) fail(ErrorKind::kValidation, "pretrain_step: empty batch");
  auto& store = model.params();
  const auto& weights = options.config.weights;
  std::vector<nn::Gradients<float>> grads(batch.size(), nn::Gradients<float>(store.size()));
  std::vector<PretrainTerms> terms(batch.size());
  const std::uint64_t step_seed = child_seed(options.seed, step);
  parallel_for(batch.size(), options.threads, [&](std::size_t j) {
    Rng rng(child_seed(step_seed, j));
    const MaskPlan plan = make_mask_plan(*batch[j], model.vocab().size(), weights, rng);
    nn::Tape<float> tape(&grads[j]);
    const auto g = pretrain_losses(tape, model.layout(), store, *batch[j], plan, weights);
    tape.backward(g.total);
    terms[j] = g.values;
  });

  store.zero_grad();
  PretrainRecord rec;
  rec.step = step;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    store.accumulate(grads[j], static_cast<float>(inv));
    rec.terms.mlm += terms[j].mlm * inv;
    rec.terms.vpa += terms[j].vpa * inv;
    rec.terms.msp += terms[j].msp * inv;
    rec.terms.mlm_empty += terms[j].mlm_empty;
  }
  rec.terms.total = weights.lambda_mlm * rec.terms.mlm + weights.lambda_vpa * rec.terms.vpa +
                    weights.lambda_msp * rec.terms.msp;
  rec.grad_norm = nn::clip_grad_norm(store, options.config.optim.clip_norm);
  if (!std::isfinite(rec.grad_norm)) fail(ErrorKind::kNumeric, "pretrain: gradient norm is not finite");
  const auto rules = scheduled_rules(options.config.optim, step);
  nn::AdamWOptions adam;
  adam.weight_decay = options.config.optim.weight_decay;
  nn::adamw_step(store, rules, adam);
  return rec;
}

std::vector<PretrainRecord> train_pretrain(Model<float>& model, const std::vector<DocInputs>& corpus,
                                           const PretrainOptions& options) {
  if (corpus.empty()) fail(ErrorKind::kValidation, "pretrain: empty corpus");
  nn::resolve_rates(model.params(), scheduled_rules(options.config.optim, 0));  // fail fast on unmatched names
  const std::size_t batch_size = std::min(options.config.optim.batch_size, corpus.size());
  std::vector<std::size_t> order(corpus.size());
  std::size_t cursor = corpus.size();
  std::size_t epoch = 0;
  std::vector<PretrainRecord> history;
  history.reserve(options.config.steps);
  for (std::size_t step = 0; step < options.config.steps; ++step) {
    std::vector<const DocInputs*> batch;
    while (batch.size() < batch_size) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(child_seed(options.seed ^ 0x5eedULL, epoch++));
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(&corpus[order[cursor++]]);
    }
    history.push_back(pretrain_step(model, batch, options, step));
    if (options.on_step) options.on_step(history.back());
  }
  return history;
}

std::string loss_history_csv(const std::vector<PretrainRecord>& history) {
  std::string out = "step,l_pre,l_mlm,l_vpa,l_msp\n";
  char line[160];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g\n", r.step, r.terms.total, r.terms.mlm, r.terms.vpa,
                  r.terms.msp);
    out += line;
  }
  return out;
}

#define ERU_INSTANTIATE_PRETRAIN(T)                                                                              \
  template nn::Var mlm_loss<T>(nn::Tape<T>&, const ModelLayout&, const nn::ParamStore<T>&, const TextEncoding&, \
                               const MaskPlan&);                                                                 \
  template nn::Var vpa_loss<T>(nn::Tape<T>&, const ModelLayout&, const nn::ParamStore<T>&, nn::Var,             \
                               const MaskPlan&);                                                                 \
  template nn::Var contrastive_loss<T>(nn::Tape<T>&, nn::Var, nn::Var, const std::vector<std::size_t>&,         \
                                       const std::vector<std::vector<std::size_t>>&, double);                   \
  template nn::Var msp_loss<T>(nn::Tape<T>&, const ModelLayout&, const nn::ParamStore<T>&, const NodeSequence&, \
                               const MaskPlan&, const PretrainWeights&);                                         \
  template PretrainGraph pretrain_losses<T>(nn::Tape<T>&, const ModelLayout&, const nn::ParamStore<T>&,         \
                                            const DocInputs&, const MaskPlan&, const PretrainWeights&);

ERU_INSTANTIATE_PRETRAIN(float)
ERU_INSTANTIATE_PRETRAIN(double)

}  // namespace eru
