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

#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "eru/model.hpp"
#include "eru/pipeline.hpp"
#include "eru/pretrain.hpp"
#include "eru/random.hpp"
#include "eru/synth_corpus.hpp"

namespace eru::testing {
namespace {

struct Bench {
  ModelConfig config = tiny_model_config();
  std::vector<ResumeDoc> docs;
  Vocab vocab;
  std::vector<DocInputs> inputs;
};

Bench make_bench(std::size_t docs, std::uint64_t seed) {
  Bench b;
  b.docs = property_docs(docs, seed);
  b.vocab = Vocab::build(b.docs, 4000, 1);
  b.inputs = prepare_inputs(b.docs, b.vocab, b.config);
  return b;
}

Direction opposite(Direction d) {
  switch (d) {
    case Direction::kUp: return Direction::kDown;
    case Direction::kDown: return Direction::kUp;
    case Direction::kLeft: return Direction::kRight;
    case Direction::kRight: return Direction::kLeft;
  }
  return d;
}

std::vector<BBox> random_boxes(Rng& rng, std::size_t n, double extent) {
  std::vector<BBox> boxes(n);
  for (auto& b : boxes) {
    const double x = rng.uniform(0.0, extent), y = rng.uniform(0.0, extent);
    b = {x, y, x + rng.uniform(1.0, 50.0), y + rng.uniform(1.0, 20.0)};
  }
  return boxes;
}

}  // namespace

std::vector<ResumeDoc> property_docs(std::size_t count, std::uint64_t seed) {
  GenerateOptions opts;
  opts.split = "property";
  opts.render = false;
  std::vector<ResumeDoc> docs = generate_corpus(desk_profile(seed), count, opts);
  return docs;
}

double msp_closed_form() {
  nn::Tape<double> tape;
  // Node 0 is the masked node; nodes 1 and 2 are orthogonal to it in the masked view.
  nn::Tensor<double> clean({3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  nn::Tensor<double> masked({3, 3}, std::vector<double>{2, 0, 0, 0, 3, 0, 0, 0, 0.5});
  const nn::Var loss = contrastive_loss(tape, tape.constant(clean), tape.constant(masked), {0}, {{1, 2}}, 2.0);
  return tape.item(loss);
}

namespace {

template <typename Fn>
double with_zero_head(const std::vector<std::string>& names, Fn&& fn) {
  Bench b = make_bench(1, 21);
  Model<double> model(b.config, b.vocab, LabelSchema::default_schema(), 5);
  for (const auto& n : names) model.params().at(n).value.fill(0.0);
  PretrainWeights w;
  w.mlm_rate = 0.5;
  Rng rng(3);
  const MaskPlan plan = make_mask_plan(b.inputs[0], b.vocab.size(), w, rng);
  nn::Tape<double> tape;
  const auto nodes = build_nodes(tape, model.params(), model.layout().embedding, b.inputs[0], &plan.tokens);
  return fn(tape, model, nodes, plan);
}

}  // namespace

double uniform_mlm_loss(std::size_t* vocab_size) {
  return with_zero_head({"head.mlm.weight", "head.mlm.bias"}, [&](auto& tape, auto& model, auto& nodes, auto& plan) {
    *vocab_size = model.vocab().size();
    return tape.item(mlm_loss(tape, model.layout(), model.params(), nodes.text_encoding, plan));
  });
}

double uniform_vpa_loss() {
  return with_zero_head({"head.vpa.output.weight", "head.vpa.output.bias"},
                        [&](auto& tape, auto& model, auto& nodes, auto& plan) {
                          return tape.item(vpa_loss(tape, model.layout(), model.params(), nodes.visual, plan));
                        });
}

double pretrain_accounting_error() {
  Bench b = make_bench(1, 22);
  Model<double> model(b.config, b.vocab, LabelSchema::default_schema(), 6);
  const PretrainWeights w;
  Rng rng(4);
  const MaskPlan plan = make_mask_plan(b.inputs[0], b.vocab.size(), w, rng);
  nn::Tape<double> tape;
  const auto g = pretrain_losses(tape, model.layout(), model.params(), b.inputs[0], plan, w);
  const double mlm = tape.item(g.mlm), vpa = tape.item(g.vpa), msp = tape.item(g.msp);
  const double expect = 1.0 * mlm + 1.0 * vpa + 0.6 * msp;
  return std::max(std::abs(tape.item(g.total) - expect), std::abs(g.values.total - expect));
}

double attention_row_sum_deviation(std::size_t trials, std::uint64_t seed) {
  const ModelConfig config = tiny_model_config();
  Model<double> model(config, Vocab(), LabelSchema::default_schema(), seed);
  Rng rng(seed);
  for (auto& p : model.params()) p.value = nn::random_normal<double>(p.value.shape(), 0.5, rng);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t segments = 1 + rng.index(24);
    const auto boxes = random_boxes(rng, segments, 900.0);
    nn::Tape<double> tape(nullptr, false);
    const nn::Var x0 = tape.constant(nn::random_normal<double>({2 * segments, config.d_model}, 3.0, rng));
    std::vector<nn::Var> attn;
    model.layout().fusion.encode(tape, model.params(), x0, boxes, &attn);
    for (const auto& a : attn) {
      for (std::size_t h = 0; h < config.heads; ++h) {
        const auto w = tape.attention_weights(a, h, 0);
        for (std::size_t r = 0; r < w.rows(); ++r) {
          double s = 0.0;
          for (double v : w.row(r)) s += v;
          worst = std::max(worst, std::abs(s - 1.0));
        }
      }
    }
  }
  return worst;
}

BiasProperties relative_bias_properties(std::size_t trials, std::uint64_t seed) {
  const ModelConfig config = tiny_model_config();
  Model<double> model(config, Vocab(), LabelSchema::default_schema(), seed);
  Rng rng(seed);
  for (const char* name : {"fusion.rel_x", "fusion.rel_y"}) {
    auto& p = model.params().at(name);
    p.value = nn::random_normal<double>(p.value.shape(), 1.0, rng);
  }
  BiasProperties out;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t segments = 1 + rng.index(20);
    auto boxes = random_boxes(rng, segments, 700.0);
    auto shifted = boxes;
    const double dx = rng.uniform(0.0, 200.0), dy = rng.uniform(0.0, 200.0);
    for (auto& b : shifted) b = {b.x0 + dx, b.y0 + dy, b.x1 + dx, b.y1 + dy};
    nn::Tape<double> tape(nullptr, false);
    const auto& base = tape.value(model.layout().fusion.relative_bias(tape, model.params(), boxes));
    const nn::Tensor<double> a = base;
    const nn::Tensor<double> b = tape.value(model.layout().fusion.relative_bias(tape, model.params(), shifted));
    const std::size_t n = 2 * segments;
    for (std::size_t h = 0; h < config.heads; ++h) {
      for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t k = 0; k < n; ++k) {
          if (a(h * n + m, k) != a(h * n + k, m)) ++out.asymmetric;
          if (a(h * n + m, k) != b(h * n + m, k)) ++out.translation;
        }
      }
    }
  }
  return out;
}

PlanViolations mask_plan_violations(std::size_t trials, std::uint64_t seed) {
  Bench b = make_bench(50, seed);
  const PretrainWeights w;
  PlanViolations v;
  for (std::size_t t = 0; t < trials; ++t) {
    const DocInputs& in = b.inputs[t % b.inputs.size()];
    Rng rng(child_seed(seed, t));
    const MaskPlan plan = make_mask_plan(in, b.vocab.size(), w, rng);
    const std::size_t S = in.segments();
    for (std::size_t i = 0; i < S; ++i) {
      const auto& seq = plan.tokens[i];
      if (seq.front() != Vocab::kCls || seq.back() != Vocab::kSep) ++v.special_masked;
    }
    for (std::size_t k = 0; k < plan.mlm_positions.size(); ++k) {
      const auto [seg, pos] = plan.mlm_positions[k];
      const auto& orig = in.tokens[seg];
      if (pos == 0 || pos + 1 >= orig.size()) ++v.special_masked;
      if (plan.mlm_targets[k] != orig[pos]) ++v.target_mismatch;
    }
    std::size_t masked_segments = 0;
    for (std::size_t i = 0; i < S; ++i) {
      if (plan.msp_text[i] && plan.msp_visual[i]) ++v.overlap;
      if (plan.msp_text[i] || plan.msp_visual[i]) ++masked_segments;
    }
    if (S >= 2 && masked_segments >= S) ++v.overlap;
    // ceil(0.15 * 2S) in exact integer arithmetic.
    const std::size_t q = S < 2 ? 0 : std::min<std::size_t>(S - 1, std::max<std::size_t>(1, (30 * S + 99) / 100));
    if (plan.msp_nodes.size() != q) ++v.wrong_count;
    const std::size_t n_neg = msp_negative_count(S, w);
    for (std::size_t k = 0; k < plan.msp_nodes.size(); ++k) {
      const auto& neg = plan.msp_negatives[k];
      if (neg.size() != n_neg) ++v.wrong_count;
      const std::set<std::size_t> uniq(neg.begin(), neg.end());
      if (uniq.size() != neg.size() || uniq.count(plan.msp_nodes[k]) || (!uniq.empty() && *uniq.rbegin() >= 2 * S)) {
        ++v.bad_negative;
      }
    }
  }
  return v;
}

std::size_t vpa_mirror_violations(std::size_t trials, std::uint64_t seed) {
  const auto docs = property_docs(trials, seed);
  const Vocab vocab = Vocab::build(docs, 4000, 1);
  const auto inputs = prepare_inputs(docs, vocab, tiny_model_config());
  const PretrainWeights w;
  std::size_t bad = 0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Rng rng(child_seed(seed, t));
    const MaskPlan plan = make_mask_plan(inputs[t], vocab.size(), w, rng);
    bool ok = !plan.vpa_anchor.empty();
    for (std::size_t k = 0; k < plan.vpa_anchor.size(); ++k) {
      const BBox& a = inputs[t].boxes[plan.vpa_anchor[k]];
      const BBox& n = inputs[t].boxes[plan.vpa_neighbor[k]];
      ok = ok && plan.vpa_label[k] == direction_label(a, n) && direction_label(n, a) == opposite(plan.vpa_label[k]);
    }
    if (!ok) ++bad;
  }
  return bad;
}

}  // namespace eru::testing
