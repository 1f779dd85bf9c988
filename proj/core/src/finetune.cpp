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

#include "eru/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "eru/error.hpp"
#include "eru/parallel.hpp"
#include "eru/pretrain.hpp"

namespace eru {

using nlohmann::json;

SegmentLabels gold_labels(const ResumeDoc& doc, const LabelSchema& schema) {
  SegmentLabels out;
  for (const auto& s : doc.segments) {
    if (!s.label_seg || !s.label_block) {
      fail(ErrorKind::kValidation, "document " + doc.id + " segment " + std::to_string(s.id) + ": unlabeled");
    }
    const auto f = schema.field_index(*s.label_seg);
    const auto b = schema.block_index(*s.label_block);
    if (!f || !b) {
      fail(ErrorKind::kValidation, "document " + doc.id + " segment " + std::to_string(s.id) + ": label " +
                                       *s.label_block + "/" + *s.label_seg + " is not in the model schema");
    }
    if (schema.owner_block(*f) != *b) {
      fail(ErrorKind::kValidation, "document " + doc.id + " segment " + std::to_string(s.id) + ": field " +
                                       *s.label_seg + " does not belong to block " + *s.label_block);
    }
    out.field.push_back(*f);
    out.block.push_back(*b);
  }
  return out;
}

std::vector<PairSample> sample_pairs(const std::vector<std::size_t>& blocks, Rng& rng) {
  const std::size_t S = blocks.size();
  if (S < 2) return {};
  std::vector<PairSample> same, cross;
  for (std::size_t m = 0; m < S; ++m) {
    for (std::size_t n = 0; n < S; ++n) {
      if (m == n) continue;
      (blocks[m] == blocks[n] ? same : cross).push_back({m, n, blocks[m] == blocks[n]});
    }
  }
  std::vector<PairSample> out;
  out.reserve(2 * S);
  if (!same.empty() && !cross.empty()) {
    for (std::size_t k = 0; k < S; ++k) out.push_back(same[rng.index(same.size())]);
    for (std::size_t k = 0; k < S; ++k) out.push_back(cross[rng.index(cross.size())]);
  } else {
    const auto& pool = same.empty() ? cross : same;
    for (std::size_t k = 0; k < 2 * S; ++k) out.push_back(pool[rng.index(pool.size())]);
  }
  return out;
}

template <typename T>
nn::Var text_states(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store,
                    const DocInputs& inputs) {
  const NodeSequence nodes = build_nodes(tape, store, layout.embedding, inputs);
  const nn::Var fused = layout.fusion.encode(tape, store, nodes.x0, nodes.boxes);
  std::vector<std::size_t> rows(nodes.segments);
  for (std::size_t i = 0; i < nodes.segments; ++i) rows[i] = text_node(i);
  return tape.gather_rows(fused, std::move(rows));
}

namespace {

template <typename T>
nn::Var pair_logits(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store, nn::Var t,
                    const std::vector<PairSample>& pairs) {
  std::vector<std::size_t> ms, ns;
  for (const auto& p : pairs) {
    ms.push_back(p.m);
    ns.push_back(p.n);
  }
  const nn::Var parts[2] = {tape.gather_rows(t, std::move(ms)), tape.gather_rows(t, std::move(ns))};
  return layout.heads.pair(tape, store, tape.concat_cols(parts));
}

}  // namespace

template <typename T>
FinetuneGraph finetune_losses(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store,
                              const DocInputs& inputs, const SegmentLabels& labels,
                              const std::vector<PairSample>& pairs) {
  if (labels.field.size() != inputs.segments() || labels.block.size() != inputs.segments()) {
    fail(ErrorKind::kShape, "finetune_loss: labels do not cover every segment");
  }
  FinetuneGraph g;
  g.text_states = text_states(tape, layout, store, inputs);
  g.field = tape.cross_entropy(layout.heads.field(tape, store, g.text_states), labels.field, nn::Reduction::kSum);
  g.block = tape.cross_entropy(layout.heads.block(tape, store, g.text_states), labels.block, nn::Reduction::kSum);
  g.total = tape.add(g.field, g.block);
  g.values.field = static_cast<double>(tape.item(g.field));
  g.values.block = static_cast<double>(tape.item(g.block));
  if (!pairs.empty()) {
    std::vector<std::size_t> targets;
    for (const auto& p : pairs) targets.push_back(p.same_block ? 1 : 0);
    g.pair = tape.cross_entropy(pair_logits(tape, layout, store, g.text_states, pairs), std::move(targets),
                                nn::Reduction::kSum);
    g.values.pair = static_cast<double>(tape.item(g.pair));
    g.total = tape.add(g.total, g.pair);
  }
  g.values.total = g.values.field + g.values.block + g.values.pair;
  if (!std::isfinite(g.values.total)) fail(ErrorKind::kNumeric, "finetune: loss is not finite");
  return g;
}

PredictionSet predict_inputs(const Model<float>& model, const DocInputs& inputs, const std::vector<std::int64_t>& ids,
                             const std::vector<PairSample>& pairs) {
  if (ids.size() != inputs.segments()) fail(ErrorKind::kShape, "predict: one id per segment required");
  const auto& layout = model.layout();
  const auto& store = model.params();
  const auto& schema = model.schema();
  nn::Tape<float> tape(nullptr, false);
  const nn::Var t = text_states(tape, layout, store, inputs);
  const nn::Tensor<float> fp = tape.value(tape.row_softmax(layout.heads.field(tape, store, t)));
  const nn::Tensor<float> bp = tape.value(tape.row_softmax(layout.heads.block(tape, store, t)));
  PredictionSet out;
  for (std::size_t i = 0; i < inputs.segments(); ++i) {
    SegmentPrediction p;
    p.id = ids[i];
    p.field_probs.assign(fp.row(i).begin(), fp.row(i).end());
    p.block_probs.assign(bp.row(i).begin(), bp.row(i).end());
    p.field = static_cast<std::size_t>(std::max_element(p.field_probs.begin(), p.field_probs.end()) -
                                       p.field_probs.begin());
    p.block = static_cast<std::size_t>(std::max_element(p.block_probs.begin(), p.block_probs.end()) -
                                       p.block_probs.begin());
    if (schema.owner_block(p.field) != p.block) p.block = schema.owner_block(p.field);
    p.field_conf = p.field_probs[p.field];
    p.block_conf = p.block_probs[p.block];
    out.segments.push_back(std::move(p));
  }
  if (!pairs.empty()) {
    const nn::Tensor<float> pp = tape.value(tape.row_softmax(pair_logits(tape, layout, store, t, pairs)));
    out.pairs = pairs;
    for (std::size_t k = 0; k < pairs.size(); ++k) out.pair_probs.push_back(pp(k, 1));
  }
  return out;
}

PredictionSet predict(const Model<float>& model, const ResumeDoc& doc) {
  const DocInputs inputs = make_inputs(doc, model.vocab(), model.config());
  std::vector<std::int64_t> ids;
  for (const auto& s : doc.segments) ids.push_back(s.id);
  PredictionSet out = predict_inputs(model, inputs, ids);
  out.doc_id = doc.id;
  return out;
}

json predictions_json(const PredictionSet& preds, const LabelSchema& schema) {
  json segs = json::array();
  for (const auto& p : preds.segments) {
    segs.push_back({{"id", p.id},
                    {"field", schema.field_name(p.field)},
                    {"block", schema.block_name(p.block)},
                    {"field_conf", p.field_conf},
                    {"block_conf", p.block_conf}});
  }
  return {{"id", preds.doc_id}, {"segments", segs}};
}

double f1_score(double precision, double recall) {
  return (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

}  // namespace

EvalReport evaluate_labels(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred,
                           const LabelSchema& schema, const std::vector<std::size_t>& gold_blocks,
                           const std::vector<std::size_t>& pred_blocks) {
  if (gold.size() != pred.size()) fail(ErrorKind::kValidation, "evaluate: prediction and gold counts differ");
  if (gold_blocks.size() != pred_blocks.size()) fail(ErrorKind::kValidation, "evaluate: block counts differ");
  const std::size_t F = schema.field_count(), other = schema.other_field();
  EvalReport r;
  r.segments = gold.size();
  r.confusion.assign(F, std::vector<std::size_t>(F, 0));
  r.classes.resize(F);
  for (std::size_t f = 0; f < F; ++f) {
    r.labels.push_back(schema.field_name(f));
    r.classes[f].name = schema.field_name(f);
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= F || pred[i] >= F) fail(ErrorKind::kValidation, "evaluate: label index outside the schema");
    ++r.confusion[gold[i]][pred[i]];
    if (gold[i] == pred[i]) {
      ++r.classes[gold[i]].tp;
    } else {
      ++r.classes[pred[i]].fp;
      ++r.classes[gold[i]].fn;
    }
    if (gold[i] != other) ++r.gold;
    if (pred[i] != other) ++r.predicted;
    if (gold[i] != other && gold[i] == pred[i]) ++r.tp;
  }
  r.micro_precision = ratio(r.tp, r.predicted);
  r.micro_recall = ratio(r.tp, r.gold);
  r.micro_f1 = f1_score(r.micro_precision, r.micro_recall);
  std::size_t counted = 0;
  for (std::size_t f = 0; f < F; ++f) {
    auto& c = r.classes[f];
    c.precision = ratio(c.tp, c.tp + c.fp);
    c.recall = ratio(c.tp, c.tp + c.fn);
    c.f1 = f1_score(c.precision, c.recall);
    if (f == other || c.tp + c.fp + c.fn == 0) continue;
    r.macro_precision += c.precision;
    r.macro_recall += c.recall;
    r.macro_f1 += c.f1;
    ++counted;
  }
  if (counted) {
    r.macro_precision /= static_cast<double>(counted);
    r.macro_recall /= static_cast<double>(counted);
    r.macro_f1 /= static_cast<double>(counted);
  }
  std::size_t block_hits = 0;
  for (std::size_t i = 0; i < gold_blocks.size(); ++i) block_hits += gold_blocks[i] == pred_blocks[i];
  r.block_accuracy = ratio(block_hits, gold_blocks.size());
  return r;
}

EvalReport evaluate(const std::vector<PredictionSet>& preds, const std::vector<ResumeDoc>& gold,
                    const LabelSchema& schema) {
  if (preds.size() != gold.size()) fail(ErrorKind::kValidation, "evaluate: document counts differ");
  std::vector<std::size_t> gf, pf, gb, pb;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    if (preds[d].doc_id != gold[d].id) {
      fail(ErrorKind::kValidation, "evaluate: prediction for '" + preds[d].doc_id + "' aligned with document '" +
                                       gold[d].id + "'");
    }
    const auto labels = gold_labels(gold[d], schema);
    std::unordered_map<std::int64_t, std::size_t> index;
    for (std::size_t i = 0; i < gold[d].segments.size(); ++i) index.emplace(gold[d].segments[i].id, i);
    if (preds[d].segments.size() != index.size()) {
      fail(ErrorKind::kValidation, "evaluate: document " + gold[d].id + " has mismatched segment counts");
    }
    for (const auto& p : preds[d].segments) {
      auto it = index.find(p.id);
      if (it == index.end()) {
        fail(ErrorKind::kValidation, "evaluate: document " + gold[d].id + " has no segment " + std::to_string(p.id));
      }
      gf.push_back(labels.field[it->second]);
      gb.push_back(labels.block[it->second]);
      pf.push_back(p.field);
      pb.push_back(p.block);
    }
  }
  return evaluate_labels(gf, pf, schema, gb, pb);
}

json EvalReport::to_json() const {
  json classes_json = json::array();
  for (const auto& c : classes) {
    classes_json.push_back({{"name", c.name},
                            {"tp", c.tp},
                            {"fp", c.fp},
                            {"fn", c.fn},
                            {"precision", c.precision},
                            {"recall", c.recall},
                            {"f1", c.f1}});
  }
  return {{"segments", segments},
          {"micro", {{"precision", micro_precision}, {"recall", micro_recall}, {"f1", micro_f1},
                     {"tp", tp}, {"predicted", predicted}, {"gold", gold}}},
          {"macro", {{"precision", macro_precision}, {"recall", macro_recall}, {"f1", macro_f1}}},
          {"block_accuracy", block_accuracy},
          {"classes", classes_json},
          {"labels", labels},
          {"confusion", confusion}};
}

std::string EvalReport::table() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %9s %9s %9s %6s %6s %6s\n", "class", "precision", "recall", "f1", "tp",
                "fp", "fn");
  out += line;
  for (const auto& c : classes) {
    std::snprintf(line, sizeof line, "%-22s %9.4f %9.4f %9.4f %6zu %6zu %6zu\n", c.name.c_str(), c.precision,
                  c.recall, c.f1, c.tp, c.fp, c.fn);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-22s %9.4f %9.4f %9.4f %6zu %6zu %6zu\n", "micro (excl. other)",
                micro_precision, micro_recall, micro_f1, tp, predicted - tp, gold - tp);
  out += line;
  std::snprintf(line, sizeof line, "%-22s %9.4f %9.4f %9.4f\n", "macro (excl. other)", macro_precision,
                macro_recall, macro_f1);
  out += line;
  std::snprintf(line, sizeof line, "block accuracy %.4f over %zu segments\n", block_accuracy, segments);
  out += line;
  return out;
}

LabeledInputs prepare_labeled(const ResumeDoc& doc, const Model<float>& model) {
  LabeledInputs out;
  out.inputs = make_inputs(doc, model.vocab(), model.config());
  out.labels = gold_labels(doc, model.schema());
  for (const auto& s : doc.segments) out.ids.push_back(s.id);
  return out;
}

EvalReport evaluate_inputs(const Model<float>& model, const std::vector<LabeledInputs>& docs, std::size_t threads) {
  std::vector<PredictionSet> preds(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) { preds[i] = predict_inputs(model, docs[i].inputs, docs[i].ids); });
  std::vector<std::size_t> gf, pf, gb, pb;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (std::size_t i = 0; i < preds[d].segments.size(); ++i) {
      gf.push_back(docs[d].labels.field[i]);
      gb.push_back(docs[d].labels.block[i]);
      pf.push_back(preds[d].segments[i].field);
      pb.push_back(preds[d].segments[i].block);
    }
  }
  return evaluate_labels(gf, pf, model.schema(), gb, pb);
}

FinetuneResult train_finetune(Model<float>& model, const std::vector<LabeledInputs>& train,
                              const std::vector<LabeledInputs>& val, const FinetuneOptions& options) {
  if (train.empty()) fail(ErrorKind::kValidation, "finetune: empty training set");
  if (val.empty()) fail(ErrorKind::kValidation, "finetune: empty validation set");
  const auto& optim = options.config.optim;
  auto& store = model.params();
  nn::resolve_rates(store, scheduled_rules(optim, 0));
  nn::AdamWOptions adam;
  adam.weight_decay = optim.weight_decay;
  const std::size_t batch_size = std::min(optim.batch_size, train.size());

  FinetuneResult result;
  result.best_val_micro_f1 = -1.0;
  std::vector<nn::Tensor<float>> best;
  std::size_t since_best = 0, step = 0;
  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 0; epoch < options.config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(child_seed(options.seed ^ 0xf17eULL, epoch));
    shuffle_rng.shuffle(order);
    FinetuneRecord rec;
    rec.epoch = epoch;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t count = std::min(batch_size, order.size() - begin);
      std::vector<nn::Gradients<float>> grads(count, nn::Gradients<float>(store.size()));
      std::vector<FinetuneTerms> terms(count);
      const std::uint64_t step_seed = child_seed(options.seed, step);
      parallel_for(count, options.threads, [&](std::size_t j) {
        const auto& doc = train[order[begin + j]];
        Rng rng(child_seed(step_seed, j));
        const auto pairs = sample_pairs(doc.labels.block, rng);
        nn::Tape<float> tape(&grads[j]);
        const auto g = finetune_losses(tape, model.layout(), store, doc.inputs, doc.labels, pairs);
        tape.backward(g.total);
        terms[j] = g.values;
      });
      store.zero_grad();
      const float inv = 1.0f / static_cast<float>(count);
      for (std::size_t j = 0; j < count; ++j) {
        store.accumulate(grads[j], inv);
        rec.terms.field += terms[j].field;
        rec.terms.block += terms[j].block;
        rec.terms.pair += terms[j].pair;
      }
      nn::clip_grad_norm(store, optim.clip_norm);
      nn::adamw_step(store, scheduled_rules(optim, step), adam);
      ++step;
    }
    const double n = static_cast<double>(train.size());
    rec.terms.field /= n;
    rec.terms.block /= n;
    rec.terms.pair /= n;
    rec.terms.total = rec.terms.field + rec.terms.block + rec.terms.pair;
    rec.steps = step;
    rec.val_micro_f1 = evaluate_inputs(model, val, options.threads).micro_f1;
    if (rec.val_micro_f1 > result.best_val_micro_f1) {
      result.best_val_micro_f1 = rec.val_micro_f1;
      result.best_epoch = epoch;
      best.clear();
      for (const auto& p : store) best.push_back(p.value);
      since_best = 0;
    } else {
      ++since_best;
    }
    rec.best_val_micro_f1 = result.best_val_micro_f1;
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (options.config.patience > 0 && since_best >= options.config.patience) break;
  }
  for (std::size_t i = 0; i < best.size(); ++i) store[i].value = best[i];
  return result;
}

std::string finetune_history_csv(const std::vector<FinetuneRecord>& history) {
  std::string out = "epoch,steps,l_f,l_field,l_block,l_pair,val_micro_f1,best_val_micro_f1\n";
  char line[200];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%zu,%zu,%.9g,%.9g,%.9g,%.9g,%.6f,%.6f\n", r.epoch, r.steps, r.terms.total,
                  r.terms.field, r.terms.block, r.terms.pair, r.val_micro_f1, r.best_val_micro_f1);
    out += line;
  }
  return out;
}

#define ERU_INSTANTIATE_FINETUNE(T)                                                                           \
  template nn::Var text_states<T>(nn::Tape<T>&, const ModelLayout&, const nn::ParamStore<T>&, const DocInputs&); \
  template FinetuneGraph finetune_losses<T>(nn::Tape<T>&, const ModelLayout&, const nn::ParamStore<T>&,       \
                                            const DocInputs&, const SegmentLabels&, const std::vector<PairSample>&);

ERU_INSTANTIATE_FINETUNE(float)
ERU_INSTANTIATE_FINETUNE(double)

}  // namespace eru
