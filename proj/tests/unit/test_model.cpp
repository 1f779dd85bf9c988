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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "../support/checks.hpp"
#include "eru/checkpoint.hpp"
#include "eru/error.hpp"
#include "eru/finetune.hpp"
#include "eru/fusion.hpp"
#include "eru/pipeline.hpp"
#include "eru/pretrain.hpp"

namespace eru {
namespace {

TEST(Embedding, EnlargeBoxGrowsEachSideAndClamps) {
  const BBox b = enlarge_box({100, 200, 200, 250}, 0.10);
  EXPECT_DOUBLE_EQ(b.x0, 90);
  EXPECT_DOUBLE_EQ(b.y0, 195);
  EXPECT_DOUBLE_EQ(b.x1, 210);
  EXPECT_DOUBLE_EQ(b.y1, 255);
  const BBox edge = enlarge_box({0, 0, 1000, 10}, 0.10);
  EXPECT_DOUBLE_EQ(edge.x0, 0);
  EXPECT_DOUBLE_EQ(edge.x1, 1000);
}

TEST(Embedding, InputsFollowDocumentOrderWithSpecialTokens) {
  const auto docs = testing::property_docs(1, 3);
  const ModelConfig cfg = tiny_model_config();
  const Vocab vocab = Vocab::build(docs, 4000, 1);
  const DocInputs in = make_inputs(docs[0], vocab, cfg);
  ASSERT_EQ(in.segments(), docs[0].segments.size());
  EXPECT_EQ(in.crops.size(), in.segments() * cfg.crop_height * cfg.crop_width);
  for (std::size_t i = 0; i < in.segments(); ++i) {
    EXPECT_EQ(in.tokens[i].front(), Vocab::kCls);
    EXPECT_EQ(in.tokens[i].back(), Vocab::kSep);
    EXPECT_LE(in.tokens[i].size(), cfg.max_seg_tokens);
    EXPECT_LE(in.boxes[i].x1, kNormalizedExtent);
  }
  // Absent crops become a zero raster.
  EXPECT_TRUE(std::all_of(in.crops.begin(), in.crops.end(), [](std::uint8_t p) { return p == 0; }));
  std::vector<std::size_t> ranks = in.ranks;
  std::sort(ranks.begin(), ranks.end());
  for (std::size_t r = 0; r < ranks.size(); ++r) EXPECT_EQ(ranks[r], r);
}

TEST(Embedding, NodesAreInterleaved) {
  EXPECT_EQ(text_node(3), 6u);
  EXPECT_EQ(visual_node(3), 7u);
  EXPECT_EQ(node_segment(7), 3u);
  const auto docs = testing::property_docs(1, 4);
  const Vocab vocab = Vocab::build(docs, 4000, 1);
  const DocInputs in = make_inputs(docs[0], vocab, tiny_model_config());
  Model<double> model(tiny_model_config(), vocab, LabelSchema::default_schema(), 1);
  nn::Tape<double> tape(nullptr, false);
  const auto nodes = build_nodes(tape, model.params(), model.layout().embedding, in);
  const auto& x0 = tape.value(nodes.x0);
  const auto& t = tape.value(nodes.text);
  const auto& b = tape.value(nodes.bias);
  ASSERT_EQ(x0.rows(), 2 * in.segments());
  for (std::size_t c = 0; c < x0.cols(); ++c) EXPECT_NEAR(x0(2, c), t(1, c) + b(1, c), 1e-12);
}

TEST(Fusion, DistanceBucketsAreLogSpacedAndMonotone) {
  const DistanceBuckets buckets(16);
  EXPECT_EQ(buckets.count(), 16u);
  EXPECT_EQ(buckets.bucket(0.0), 0u);
  EXPECT_EQ(buckets.bucket(1000.0), 15u);
  std::size_t prev = 0;
  for (double d = 0.0; d <= 1000.0; d += 0.5) {
    const std::size_t b = buckets.bucket(d);
    EXPECT_GE(b, prev);
    prev = b;
  }
  EXPECT_THROW(DistanceBuckets(1), Error);
}

TEST(Fusion, RelativeBiasIsSymmetricAndTranslationInvariant) {
  const auto p = testing::relative_bias_properties(50, 9);
  EXPECT_EQ(p.asymmetric, 0u);
  EXPECT_EQ(p.translation, 0u);
}

TEST(Fusion, AttentionRowsSumToOne) { EXPECT_LT(testing::attention_row_sum_deviation(20, 5), 1e-6); }

TEST(Pretrain, DirectionLabelUsesDominantAxis) {
  const BBox a{100, 100, 110, 110};
  EXPECT_EQ(direction_label(a, {100, 50, 110, 60}), Direction::kUp);
  EXPECT_EQ(direction_label(a, {100, 150, 110, 160}), Direction::kDown);
  EXPECT_EQ(direction_label(a, {40, 95, 50, 105}), Direction::kLeft);
  EXPECT_EQ(direction_label(a, {200, 95, 210, 105}), Direction::kRight);
  // |dy| == |dx| is vertical.
  EXPECT_EQ(direction_label(a, {150, 150, 160, 160}), Direction::kDown);
  EXPECT_THROW(direction_label(a, a), Error);
  EXPECT_EQ(direction_name(Direction::kLeft), "left");
}

TEST(Pretrain, NearestNeighborsStayOnPage) {
  const std::vector<BBox> boxes{{0, 0, 10, 10}, {20, 0, 30, 10}, {0, 20, 10, 30}, {500, 500, 510, 510}, {1, 1, 2, 2}};
  const std::vector<std::size_t> pages{0, 0, 0, 0, 1};
  const auto n = nearest_neighbors(boxes, pages, 0, 2);
  EXPECT_EQ(n, (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(nearest_neighbors(boxes, pages, 4, 4).empty());
}

TEST(Pretrain, NegativeCount) {
  const PretrainWeights w;
  EXPECT_EQ(msp_negative_count(2, w), 1u);
  EXPECT_EQ(msp_negative_count(3, w), 1u);
  EXPECT_EQ(msp_negative_count(10, w), 5u);
  EXPECT_EQ(msp_negative_count(100, w), 8u);
}

TEST(Pretrain, MaskPlansRespectInvariants) {
  const auto v = testing::mask_plan_violations(200, 17);
  EXPECT_EQ(v.special_masked, 0u);
  EXPECT_EQ(v.target_mismatch, 0u);
  EXPECT_EQ(v.overlap, 0u);
  EXPECT_EQ(v.bad_negative, 0u);
  EXPECT_EQ(v.wrong_count, 0u);
}

TEST(Pretrain, VpaMirror) { EXPECT_EQ(testing::vpa_mirror_violations(50, 23), 0u); }

TEST(Pretrain, ClosedForms) {
  EXPECT_NEAR(testing::msp_closed_form(), std::log(1.0 + 2.0 * std::exp(-0.5)), 1e-12);
  EXPECT_NEAR(testing::msp_closed_form(), 0.7944, 1e-3);
  std::size_t v = 0;
  const double mlm = testing::uniform_mlm_loss(&v);
  EXPECT_NEAR(mlm, std::log(static_cast<double>(v)), 1e-9);
  EXPECT_NEAR(testing::uniform_vpa_loss(), std::log(4.0), 1e-9);
  EXPECT_LT(testing::pretrain_accounting_error(), 1e-9);
}

TEST(Pretrain, SkipsMspWhenWeightIsZero) {
  const auto docs = testing::property_docs(1, 6);
  const Vocab vocab = Vocab::build(docs, 4000, 1);
  const DocInputs in = make_inputs(docs[0], vocab, tiny_model_config());
  Model<double> model(tiny_model_config(), vocab, LabelSchema::default_schema(), 1);
  PretrainWeights w;
  w.lambda_msp = 0.0;
  Rng rng(1);
  const MaskPlan plan = make_mask_plan(in, vocab.size(), w, rng);
  nn::Tape<double> tape;
  const auto g = pretrain_losses(tape, model.layout(), model.params(), in, plan, w);
  EXPECT_FALSE(g.msp.valid());
  EXPECT_NEAR(g.values.total, g.values.mlm + g.values.vpa, 1e-12);
}

TEST(Finetune, PairsAreBalanced) {
  Rng rng(2);
  const std::vector<std::size_t> blocks{0, 0, 1, 1, 1, 2};
  const auto pairs = sample_pairs(blocks, rng);
  ASSERT_EQ(pairs.size(), 12u);
  std::size_t same = 0;
  for (const auto& p : pairs) {
    EXPECT_NE(p.m, p.n);
    EXPECT_EQ(p.same_block, blocks[p.m] == blocks[p.n]);
    same += p.same_block;
  }
  EXPECT_EQ(same, 6u);
  EXPECT_TRUE(sample_pairs({3}, rng).empty());
}

TEST(Finetune, MetricsByHand) {
  const auto& s = LabelSchema::default_schema();
  const std::size_t other = s.other_field();
  const std::size_t name = *s.field_index("personal.name");
  const std::size_t phone = *s.field_index("personal.phone");
  // gold: name name phone other ; pred: name phone phone name
  const auto r = evaluate_labels({name, name, phone, other}, {name, phone, phone, name}, s, {0, 0, 0, 5}, {0, 0, 0, 0});
  EXPECT_EQ(r.tp, 2u);
  EXPECT_EQ(r.predicted, 4u);
  EXPECT_EQ(r.gold, 3u);
  EXPECT_DOUBLE_EQ(r.micro_precision, 0.5);
  EXPECT_DOUBLE_EQ(r.micro_recall, 2.0 / 3.0);
  EXPECT_NEAR(r.micro_f1, 2 * 0.5 * (2.0 / 3.0) / (0.5 + 2.0 / 3.0), 1e-12);
  // name: P 1/2 R 1/2 F 1/2 ; phone: P 1/2 R 1 F 2/3.
  EXPECT_NEAR(r.macro_f1, (0.5 + 2.0 / 3.0) / 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.block_accuracy, 0.75);
  EXPECT_EQ(r.confusion[name][phone], 1u);
  EXPECT_DOUBLE_EQ(f1_score(0.0, 0.0), 0.0);
}

TEST(Finetune, GoldLabelsRequireLabels) {
  auto docs = testing::property_docs(1, 8);
  const auto labels = gold_labels(docs[0], LabelSchema::default_schema());
  EXPECT_EQ(labels.field.size(), docs[0].segments.size());
  docs[0].segments[0].label_seg.reset();
  docs[0].segments[0].label_block.reset();
  EXPECT_THROW(gold_labels(docs[0], LabelSchema::default_schema()), Error);
}

TEST(Finetune, PredictionRepairsBlockToFieldOwner) {
  const auto docs = testing::property_docs(2, 10);
  const Model<float> model(tiny_model_config(), Vocab::build(docs, 4000, 1), LabelSchema::default_schema(), 3);
  const auto preds = predict(model, docs[1]);
  ASSERT_EQ(preds.segments.size(), docs[1].segments.size());
  for (const auto& p : preds.segments) {
    EXPECT_EQ(p.block, model.schema().owner_block(p.field));
    EXPECT_GT(p.field_conf, 0.0);
    EXPECT_LE(p.field_conf, 1.0);
  }
  const auto js = predictions_json(preds, model.schema());
  EXPECT_EQ(js["id"], docs[1].id);
  EXPECT_EQ(js["segments"].size(), docs[1].segments.size());
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const auto docs = testing::property_docs(2, 12);
  Model<float> model(tiny_model_config(), Vocab::build(docs, 4000, 1), LabelSchema::default_schema(), 4);
  model.params().set_step(17);
  const std::string bytes = checkpoint_bytes(model, {{"note", "unit"}});
  EXPECT_EQ(bytes.substr(0, 12), "eru-ckpt-v1\n");
  const auto loaded = parse_checkpoint(bytes);
  EXPECT_EQ(loaded.meta["note"], "unit");
  EXPECT_EQ(loaded.model.params().step(), 17u);
  EXPECT_EQ(checkpoint_bytes(loaded.model, {{"note", "unit"}}), bytes);
  const auto a = predict(model, docs[0]);
  const auto b = predict(loaded.model, docs[0]);
  for (std::size_t i = 0; i < a.segments.size(); ++i) {
    EXPECT_EQ(a.segments[i].field_probs, b.segments[i].field_probs);
    EXPECT_EQ(a.segments[i].block_probs, b.segments[i].block_probs);
  }
}

TEST(Checkpoint, RejectsCorruptInput) {
  const Model<float> model(tiny_model_config(), Vocab(), LabelSchema::default_schema(), 4);
  const std::string bytes = checkpoint_bytes(model);
  auto kind = [](const std::string& b) {
    try {
      parse_checkpoint(b);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kNumeric;
  };
  EXPECT_EQ(kind("not a checkpoint"), ErrorKind::kFormat);
  EXPECT_EQ(kind(bytes.substr(0, bytes.size() - 4)), ErrorKind::kFormat);
  EXPECT_EQ(kind(bytes.substr(0, 30)), ErrorKind::kFormat);
  EXPECT_THROW(load_checkpoint("/nonexistent.ckpt"), Error);
}

TEST(Model, ParameterNamesMapToLearningRates) {
  const Model<float> model(tiny_model_config(), Vocab(), LabelSchema::default_schema(), 1);
  const auto rules = default_rate_rules(5e-5, 1e-3);
  const auto rates = nn::resolve_rates(model.params(), rules);
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const auto& name = model.params()[i].name;
    EXPECT_DOUBLE_EQ(rates[i], name.rfind("head.", 0) == 0 ? 1e-3 : 5e-5) << name;
  }
}

}  // namespace
}  // namespace eru
