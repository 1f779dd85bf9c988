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

#include "eru/pipeline.hpp"

#include <chrono>
#include <set>

#include "eru/error.hpp"
#include "eru/parallel.hpp"
#include "eru/synth_corpus.hpp"

namespace eru {

std::vector<DocInputs> prepare_inputs(const std::vector<ResumeDoc>& docs, const Vocab& vocab,
                                      const ModelConfig& config, std::size_t threads) {
  std::vector<DocInputs> out(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) { out[i] = make_inputs(docs[i], vocab, config); });
  return out;
}

std::vector<LabeledInputs> prepare_labeled_set(const std::vector<ResumeDoc>& docs, const Model<float>& model,
                                               std::size_t threads) {
  std::vector<LabeledInputs> out(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) { out[i] = prepare_labeled(docs[i], model); });
  return out;
}

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.d_model = 16;
  c.heads = 2;
  c.text_layers = 1;
  c.conv_channels = {2, 4};
  c.fusion_layers = 1;
  c.ffn_mult = 2;
  c.rel_buckets = 8;
  c.crop_height = 8;
  c.crop_width = 24;
  c.max_seg_tokens = 8;
  c.init_std = 0.3;
  return c;
}

GradCheckFixture make_grad_check_fixture(const ModelConfig& config, std::uint64_t seed) {
  GenerateOptions gen;
  gen.split = "gradcheck";
  gen.crop = {config.crop_height, config.crop_width, config.crop_enlarge};
  const ResumeDoc source = generate_document(desk_profile(seed), 0, gen);

  // Two body segments on one page with distinct centers.
  ResumeDoc doc;
  doc.id = source.id;
  doc.pages = {source.pages.front()};
  for (const auto& s : source.segments) {
    if (s.page != 0 || s.label_seg == "other") continue;
    if (!doc.segments.empty() && doc.segments.back().bbox.cx() == s.bbox.cx() &&
        doc.segments.back().bbox.cy() == s.bbox.cy()) {
      continue;
    }
    doc.segments.push_back(s);
    if (doc.segments.size() == 2) break;
  }
  if (doc.segments.size() != 2) fail(ErrorKind::kValidation, "grad-check fixture: generator produced too few segments");

  std::vector<std::string> tokens{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  std::set<std::string> seen;
  auto take = [&](const std::string& text) {
    for (auto& w : split_words(text)) {
      if (tokens.size() >= 50) return;
      if (seen.insert(w).second) tokens.push_back(w);
    }
  };
  for (const auto& s : doc.segments) take(s.text);
  for (const auto& s : source.segments) take(s.text);
  for (std::size_t i = 0; tokens.size() < 50; ++i) tokens.push_back("filler" + std::to_string(i));
  Vocab vocab(tokens);

  GradCheckFixture fx{Model<double>(config, vocab, LabelSchema::default_schema(), seed), {}, {}, {}, {}, {}};
  fx.inputs = make_inputs(doc, vocab, config);
  fx.labels = gold_labels(doc, LabelSchema::default_schema());
  fx.weights.mlm_rate = 0.5;
  Rng rng(child_seed(seed, 1));
  for (int attempt = 0; attempt < 64; ++attempt) {
    fx.plan = make_mask_plan(fx.inputs, vocab.size(), fx.weights, rng);
    if (!fx.plan.mlm_positions.empty() && !fx.plan.msp_nodes.empty() && !fx.plan.vpa_anchor.empty()) break;
  }
  if (fx.plan.mlm_positions.empty()) fail(ErrorKind::kValidation, "grad-check fixture: no maskable tokens");
  fx.pairs = sample_pairs(fx.labels.block, rng);
  return fx;
}

std::vector<GradCheckCase> run_grad_checks(const ModelConfig& config, std::uint64_t seed, double eps) {
  GradCheckFixture fx = make_grad_check_fixture(config, seed);
  const auto& layout = fx.model.layout();
  auto& store = fx.model.params();

  using Builder = std::function<nn::Var(nn::Tape<double>&, const nn::ParamStore<double>&)>;
  auto run = [&](const std::string& name, Builder build) {
    const nn::LossFn loss = [&](const nn::ParamStore<double>& params, nn::Gradients<double>* grads) {
      nn::Tape<double> tape(grads, grads != nullptr);
      const nn::Var v = build(tape, params);
      if (!v.valid()) fail(ErrorKind::kValidation, "grad-check: " + name + " term was skipped");
      const double value = tape.item(v);
      if (grads) tape.backward(v);
      return value;
    };
    const auto t0 = std::chrono::steady_clock::now();
    GradCheckCase c{name, nn::grad_check(loss, store, eps), 0.0};
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return c;
  };

  std::vector<GradCheckCase> out;
  out.push_back(run("MLM", [&](auto& tape, const auto& params) {
    const auto nodes = build_nodes(tape, params, layout.embedding, fx.inputs, &fx.plan.tokens);
    return mlm_loss(tape, layout, params, nodes.text_encoding, fx.plan);
  }));
  out.push_back(run("VPA", [&](auto& tape, const auto& params) {
    const auto nodes = build_nodes(tape, params, layout.embedding, fx.inputs, &fx.plan.tokens);
    return vpa_loss(tape, layout, params, nodes.visual, fx.plan);
  }));
  out.push_back(run("MSP", [&](auto& tape, const auto& params) {
    const auto nodes = build_nodes(tape, params, layout.embedding, fx.inputs, &fx.plan.tokens);
    return msp_loss(tape, layout, params, nodes, fx.plan, fx.weights);
  }));
  out.push_back(run("L_pre", [&](auto& tape, const auto& params) {
    return pretrain_losses(tape, layout, params, fx.inputs, fx.plan, fx.weights).total;
  }));
  out.push_back(run("L_f", [&](auto& tape, const auto& params) {
    return finetune_losses(tape, layout, params, fx.inputs, fx.labels, fx.pairs).total;
  }));
  return out;
}

}  // namespace eru
