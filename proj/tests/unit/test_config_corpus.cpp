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
#include <filesystem>

#include "eru/complexity.hpp"
#include "eru/config.hpp"
#include "eru/error.hpp"
#include "eru/synth_corpus.hpp"

namespace eru {
namespace {

ErrorKind config_error(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kNumeric;
}

TEST(Config, DefaultsAndPartialOverrides) {
  const RunConfig c = parse_run_config(R"({"seed": 11, "pretrain": {"steps": 5, "optim": {"batch_size": 2}}})");
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.pretrain.steps, 5u);
  EXPECT_EQ(c.pretrain.optim.batch_size, 2u);
  EXPECT_DOUBLE_EQ(c.pretrain.weights.lambda_msp, 0.6);
  EXPECT_DOUBLE_EQ(c.pretrain.weights.tau, 2.0);
  EXPECT_DOUBLE_EQ(c.finetune.optim.head_lr, 1e-3);
  EXPECT_DOUBLE_EQ(c.finetune.optim.encoder_lr, 5e-5);
  EXPECT_EQ(c.model.d_model, 64u);
}

TEST(Config, RoundTripAndHash) {
  const RunConfig a = parse_run_config(R"({"seed": 3})");
  const RunConfig b = parse_run_config(to_json(a).dump());
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(parse_run_config(R"({"seed": 4})")));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_EQ(config_error(R"({"sed": 1})"), ErrorKind::kConfig);
  EXPECT_EQ(config_error(R"({"model": {"d_model": "wide"}})"), ErrorKind::kConfig);
  EXPECT_EQ(config_error(R"({"model": {"d_model": 30, "heads": 4}})"), ErrorKind::kConfig);
  EXPECT_EQ(config_error(R"({"pretrain": {"tau": 0}})"), ErrorKind::kConfig);
  EXPECT_EQ(config_error("{oops"), ErrorKind::kFormat);
}

TEST(Config, ThreadResolution) {
  EXPECT_EQ(resolve_threads(3), 3u);
  EXPECT_GE(resolve_threads(0), 1u);
}

TEST(Complexity, ReferenceRatio) {
  const AnalyticCosts c = analytic_costs(ComplexityParams{});
  EXPECT_DOUBLE_EQ(c.segment_level, 6.0 * 2000 * 32 + 4.0 * (2000.0 / 32) * (2000.0 / 32));
  EXPECT_DOUBLE_EQ(c.token_level, 12.0 * 512 * 2000);
  EXPECT_NEAR(c.ratio, 399625.0 / 12288000.0, 1e-12);
  EXPECT_LT(c.ratio, 0.1);
  ComplexityParams bad;
  bad.segment_tokens = 1024;
  EXPECT_THROW(analytic_costs(bad), Error);
  EXPECT_GT(visual_cost(ComplexityParams{}), 0.0);
}

TEST(Complexity, BenchCsvShape) {
  const std::string csv = bench_csv({{2000, 1.5, 10.0, 0.15}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "N,t_segment_ms,t_token_ms,ratio");
}

TEST(Synth, DocumentsAreDeterministicAndValid) {
  GenerateOptions opts;
  opts.split = "unit";
  const auto profile = desk_profile(7);
  const ResumeDoc a = generate_document(profile, 3, opts);
  const ResumeDoc b = generate_document(profile, 3, opts);
  EXPECT_EQ(serialize_document(a), serialize_document(b));
  EXPECT_NE(serialize_document(a), serialize_document(generate_document(profile, 4, opts)));
  EXPECT_EQ(a.id, "unit-000003");
  LoadOptions lo;
  lo.schema = &LabelSchema::default_schema();
  EXPECT_NO_THROW(validate_document(a, lo));
  EXPECT_TRUE(a.labeled());
  for (const auto& s : a.segments) {
    ASSERT_TRUE(s.crop.has_value());
    EXPECT_EQ(s.crop->height, 32u);
    EXPECT_EQ(s.crop->width, 96u);
  }
  opts.labeled = false;
  const ResumeDoc u = generate_document(profile, 3, opts);
  EXPECT_FALSE(u.segments[0].label_seg.has_value());
}

TEST(Synth, CorpusRoundTripsThroughDisk) {
  const auto dir = std::filesystem::temp_directory_path() / "eru_unit_corpus";
  std::filesystem::remove_all(dir);
  GenerateOptions opts;
  opts.split = "disk";
  const auto docs = generate_corpus(desk_profile(7), 3, opts);
  write_corpus(dir, docs);
  LoadOptions lo;
  lo.schema = &LabelSchema::default_schema();
  const auto back = load_corpus(dir, lo);
  ASSERT_EQ(back.size(), docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) EXPECT_EQ(back[i], docs[i]);
  std::filesystem::remove_all(dir);
}

TEST(Synth, RenderingIsDeterministicAndStyled) {
  const auto heading = style_for("other", "other", true);
  const auto skill = style_for("skill", "skill.item", false);
  EXPECT_NE(heading, skill);
  const auto r1 = render_crop("hello world", skill, 5);
  const auto r2 = render_crop("hello world", skill, 5);
  EXPECT_EQ(r1, r2);
  EXPECT_NE(r1, render_crop("hello world", heading, 5));
  for (float p : r1.pixels) {
    EXPECT_GE(p, 0.0f);
    EXPECT_LE(p, 1.0f);
  }
}

TEST(Synth, ProfilesAndStats) {
  EXPECT_EQ(profile_by_name("paper-stats", 1).name, "paper-stats");
  EXPECT_THROW(profile_by_name("huge", 1), Error);
  GenerateOptions opts;
  opts.render = false;
  const auto docs = generate_corpus(desk_profile(7), 40, opts);
  const auto st = corpus_stats(docs);
  EXPECT_EQ(st.docs, 40u);
  EXPECT_NEAR(st.avg_segments, 30.0, 6.0);
  const auto heat = neighbor_heatmap(docs, LabelSchema::default_schema());
  EXPECT_EQ(heat.counts.size(), heat.labels.size());
  EXPECT_GT(heat.same_block_share(LabelSchema::default_schema()), 0.5);
  LoadOptions lo;
  lo.schema = &LabelSchema::default_schema();
  for (const auto& d : generate_corpus(paper_stats_profile(7), 10, opts)) EXPECT_NO_THROW(validate_document(d, lo));
}

}  // namespace
}  // namespace eru
