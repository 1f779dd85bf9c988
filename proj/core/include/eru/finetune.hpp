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
#include <vector>

#include <nlohmann/json.hpp>

#include "eru/config.hpp"
#include "eru/embedding.hpp"
#include "eru/model.hpp"

namespace eru {

struct SegmentLabels {
  std::vector<std::size_t> field;
  std::vector<std::size_t> block;
};

// Gold label indices in segment order; throws if any segment is unlabeled
// or uses a label the schema does not know.
SegmentLabels gold_labels(const ResumeDoc& doc, const LabelSchema& schema);

struct PairSample {
  std::size_t m = 0;
  std::size_t n = 0;
  bool same_block = false;
};

// 2|S| ordered pairs (m != n), half same-block and half cross-block when
// both kinds exist; otherwise all from the kind that exists.
std::vector<PairSample> sample_pairs(const std::vector<std::size_t>& blocks, Rng& rng);

struct FinetuneTerms {
  double field = 0.0;
  double block = 0.0;
  double pair = 0.0;
  double total = 0.0;
};

struct FinetuneGraph {
  nn::Var field;  // summed over segments
  nn::Var block;
  nn::Var pair;   // summed over pairs; invalid if there are none
  nn::Var total;
  nn::Var text_states;  // t'_i, [S x d]
  FinetuneTerms values;
};

// Textual fusion outputs t'_i of every segment.
template <typename T>
nn::Var text_states(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store,
                    const DocInputs& inputs);

// L_f: negative log-likelihood of the field, block and pair heads, summed.
template <typename T>
FinetuneGraph finetune_losses(nn::Tape<T>& tape, const ModelLayout& layout, const nn::ParamStore<T>& store,
                              const DocInputs& inputs, const SegmentLabels& labels,
                              const std::vector<PairSample>& pairs);

struct SegmentPrediction {
  std::int64_t id = 0;
  std::size_t field = 0;
  std::size_t block = 0;
  double field_conf = 0.0;
  double block_conf = 0.0;
  std::vector<double> field_probs;
  std::vector<double> block_probs;
};

struct PredictionSet {
  std::string doc_id;
  std::vector<SegmentPrediction> segments;
  std::vector<PairSample> pairs;
  std::vector<double> pair_probs;  // P(same block) per entry of `pairs`
};

// Argmax field and block per segment, then block := owner(field) when they
// disagree. `pairs`, if given, are scored by the pair head.
PredictionSet predict_inputs(const Model<float>& model, const DocInputs& inputs, const std::vector<std::int64_t>& ids,
                             const std::vector<PairSample>& pairs = {});
PredictionSet predict(const Model<float>& model, const ResumeDoc& doc);

nlohmann::json predictions_json(const PredictionSet& preds, const LabelSchema& schema);

struct ClassMetrics {
  std::string name;
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct EvalReport {
  std::size_t segments = 0;
  std::size_t tp = 0, predicted = 0, gold = 0;  // micro counts over non-"other" fields
  double micro_precision = 0.0, micro_recall = 0.0, micro_f1 = 0.0;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double block_accuracy = 0.0;
  std::vector<ClassMetrics> classes;  // every schema field, in schema order
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][pred]
  nlohmann::json to_json() const;
  std::string table() const;
};

double f1_score(double precision, double recall);

// Label-index form; blocks may be empty when block accuracy is not needed.
EvalReport evaluate_labels(const std::vector<std::size_t>& gold_fields, const std::vector<std::size_t>& pred_fields,
                           const LabelSchema& schema, const std::vector<std::size_t>& gold_blocks = {},
                           const std::vector<std::size_t>& pred_blocks = {});

// Aligns predictions with gold documents by document and segment id.
EvalReport evaluate(const std::vector<PredictionSet>& preds, const std::vector<ResumeDoc>& gold,
                    const LabelSchema& schema);

struct LabeledInputs {
  DocInputs inputs;
  SegmentLabels labels;
  std::vector<std::int64_t> ids;
};

LabeledInputs prepare_labeled(const ResumeDoc& doc, const Model<float>& model);

struct FinetuneRecord {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  FinetuneTerms terms;  // epoch means per document
  double val_micro_f1 = 0.0;
  double best_val_micro_f1 = 0.0;
};

struct FinetuneOptions {
  FinetuneConfig config;
  std::uint64_t seed = 7;
  std::size_t threads = 1;
  std::function<void(const FinetuneRecord&)> on_epoch;
};

struct FinetuneResult {
  std::vector<FinetuneRecord> history;
  std::size_t best_epoch = 0;
  double best_val_micro_f1 = 0.0;
};

// Trains until `patience` epochs pass without a validation micro-F1 gain
// (or max_epochs); leaves the model at its best validation state.
FinetuneResult train_finetune(Model<float>& model, const std::vector<LabeledInputs>& train,
                              const std::vector<LabeledInputs>& val, const FinetuneOptions& options);

EvalReport evaluate_inputs(const Model<float>& model, const std::vector<LabeledInputs>& docs, std::size_t threads = 1);

// epoch,steps,l_f,l_field,l_block,l_pair,val_micro_f1,best_val_micro_f1
std::string finetune_history_csv(const std::vector<FinetuneRecord>& history);

}  // namespace eru
