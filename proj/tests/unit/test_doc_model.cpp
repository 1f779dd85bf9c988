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

#include <fstream>
#include <sstream>

#include "eru/doc_model.hpp"
#include "eru/error.hpp"
#include "eru/raster.hpp"
#include "eru/vocab.hpp"

namespace eru {
namespace {

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kSample = std::string(ERU_TEST_DATA_DIR) + "/sample_resume.json";

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kNumeric;
}

const char* kMinimal = R"({"id":"d","pages":[{"width":100,"height":200}],"segments":[)";

std::string doc_with(const std::string& segments) { return std::string(kMinimal) + segments + "]}"; }

TEST(DocModel, SampleRoundTripIsByteStable) {
  const std::string bytes = read_all(kSample);
  LoadOptions opts;
  opts.schema = &LabelSchema::default_schema();
  const ResumeDoc doc = load_document(bytes, opts);
  EXPECT_EQ(doc.segments.size(), 12u);
  EXPECT_EQ(doc.pages.size(), 2u);
  EXPECT_TRUE(doc.labeled());
  EXPECT_EQ(serialize_document(doc), bytes);
  EXPECT_EQ(load_document(serialize_document(doc), opts), doc);
}

TEST(DocModel, ReadingOrderRowsThenColumns) {
  // Same 10-unit row: x decides. Different rows: y decides even if x is larger.
  ResumeDoc doc = load_document(doc_with(
      R"({"id":0,"text":"b","bbox":[50,12,60,20],"page":0},)"
      R"({"id":1,"text":"a","bbox":[10,15,20,20],"page":0},)"
      R"({"id":2,"text":"c","bbox":[5,31,20,40],"page":0},)"
      R"({"id":3,"text":"d","bbox":[0,0,5,5],"page":0})"));
  doc = assign_reading_order(doc);
  EXPECT_EQ(reading_sequence(doc), (std::vector<std::size_t>{3, 1, 0, 2}));
}

TEST(DocModel, ReadingOrderIsStableForTies) {
  ResumeDoc doc = load_document(doc_with(
      R"({"id":0,"text":"x","bbox":[10,10,20,20],"page":0},)"
      R"({"id":1,"text":"y","bbox":[10,12,20,20],"page":0})"));
  doc = assign_reading_order(doc);
  EXPECT_EQ(*doc.segments[0].rank, 0u);
  EXPECT_EQ(*doc.segments[1].rank, 1u);
}

TEST(DocModel, PageComesFirstInReadingOrder) {
  const ResumeDoc doc = assign_reading_order(load_document(read_all(kSample)));
  const auto seq = reading_sequence(doc);
  for (std::size_t r = 1; r < seq.size(); ++r) {
    EXPECT_LE(doc.segments[seq[r - 1]].page, doc.segments[seq[r]].page);
  }
}

TEST(DocModel, NormalizeScalesToThousand) {
  const ResumeDoc doc = normalize_boxes(load_document(doc_with(R"({"id":0,"text":"x","bbox":[10,20,50,100],"page":0})")));
  EXPECT_DOUBLE_EQ(doc.segments[0].bbox.x0, 100.0);
  EXPECT_DOUBLE_EQ(doc.segments[0].bbox.y0, 100.0);
  EXPECT_DOUBLE_EQ(doc.segments[0].bbox.x1, 500.0);
  EXPECT_DOUBLE_EQ(doc.segments[0].bbox.y1, 500.0);
  EXPECT_EQ(doc.pages[0].width, kNormalizedExtent);
}

TEST(DocModel, ValidationErrors) {
  LoadOptions labeled;
  labeled.schema = &LabelSchema::default_schema();
  EXPECT_EQ(kind_of([] { load_document("{not json"); }), ErrorKind::kFormat);
  EXPECT_EQ(kind_of([] { load_document(doc_with(R"({"id":0,"text":"x","bbox":[30,20,10,40],"page":0})")); }),
            ErrorKind::kValidation);
  EXPECT_EQ(kind_of([] { load_document(doc_with(R"({"id":0,"text":"x","bbox":[10,20,30,40],"page":3})")); }),
            ErrorKind::kValidation);
  EXPECT_EQ(kind_of([] { load_document(doc_with(R"({"id":0,"text":"x","bbox":[10,20,300,40],"page":0})")); }),
            ErrorKind::kValidation);
  EXPECT_EQ(kind_of([] { load_document(doc_with(R"({"id":0,"text":"","bbox":[10,20,30,40],"page":0})")); }),
            ErrorKind::kValidation);
  EXPECT_EQ(kind_of([] { load_document(doc_with(R"({"id":0,"text":"x","bbox":[10,20,30],"page":0})")); }),
            ErrorKind::kFormat);
  EXPECT_EQ(kind_of([&] {
              load_document(doc_with(R"({"id":0,"text":"x","bbox":[1,2,3,4],"page":0,"label_seg":"work.time"})"),
                            labeled);
            }),
            ErrorKind::kValidation);
  EXPECT_EQ(kind_of([&] {
              load_document(doc_with(R"({"id":0,"text":"x","bbox":[1,2,3,4],"page":0,)"
                                     R"("label_seg":"work.time","label_block":"education"})"),
                            labeled);
            }),
            ErrorKind::kValidation);
  EXPECT_EQ(kind_of([&] {
              load_document(doc_with(R"({"id":0,"text":"x","bbox":[1,2,3,4],"page":0,)"
                                     R"("label_seg":"work.salary","label_block":"work"})"),
                            labeled);
            }),
            ErrorKind::kValidation);
  LoadOptions small;
  small.max_segments = 1;
  EXPECT_EQ(kind_of([&] {
              load_document(doc_with(R"({"id":0,"text":"x","bbox":[1,2,3,4],"page":0},)"
                                     R"({"id":1,"text":"y","bbox":[1,2,3,4],"page":0})"),
                            small);
            }),
            ErrorKind::kValidation);
  EXPECT_EQ(kind_of([] { load_document_file("/nonexistent/doc.json"); }), ErrorKind::kIo);
}

TEST(DocModel, SchemaOwnership) {
  const auto& s = LabelSchema::default_schema();
  EXPECT_EQ(s.block_count(), 6u);
  EXPECT_EQ(s.field_count(), 17u);
  for (std::size_t f = 0; f < s.field_count(); ++f) {
    const auto& owned = s.fields_of(s.owner_block(f));
    EXPECT_NE(std::find(owned.begin(), owned.end(), f), owned.end());
  }
  EXPECT_EQ(s.owner_block(s.other_field()), s.other_block());
  EXPECT_EQ(load_schema(R"({"blocks":{"a":["a.x"],"other":["other"]}})").field_count(), 2u);
  EXPECT_EQ(kind_of([] { load_schema(R"({"blocks":{"a":["a.x"]}})"); }), ErrorKind::kValidation);
}

TEST(Vocab, SpecialIdsAndEncoding) {
  const Vocab v(std::vector<std::string>{"alpha", "beta"});
  EXPECT_EQ(v.id("[PAD]"), Vocab::kPad);
  EXPECT_EQ(v.id("[UNK]"), Vocab::kUnk);
  EXPECT_EQ(v.id("[CLS]"), Vocab::kCls);
  EXPECT_EQ(v.id("[SEP]"), Vocab::kSep);
  EXPECT_EQ(v.id("[MASK]"), Vocab::kMask);
  const auto ids = v.encode("Alpha gamma beta", 32);
  ASSERT_EQ(ids.size(), 5u);
  EXPECT_EQ(ids.front(), Vocab::kCls);
  EXPECT_EQ(ids[1], v.id("alpha"));
  EXPECT_EQ(ids[2], Vocab::kUnk);
  EXPECT_EQ(ids.back(), Vocab::kSep);
  EXPECT_EQ(v.encode("a b c d e f", 4).size(), 4u);
  EXPECT_EQ(Vocab::from_json(v.to_json()), v);
}

TEST(Vocab, BuildIsFrequencyOrderedAndDeterministic) {
  const ResumeDoc doc = load_document(read_all(kSample));
  const Vocab a = Vocab::build({doc}, 100, 1);
  const Vocab b = Vocab::build({doc}, 100, 1);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_LE(Vocab::build({doc}, 8, 1).size(), 8u);
  EXPECT_LT(Vocab::build({doc}, 100, 2).size(), a.size());
}

TEST(Raster, PngAndBase64RoundTrip) {
  GlyphRaster r(5, 7);
  for (std::size_t i = 0; i < r.pixels.size(); ++i) r.pixels[i] = static_cast<float>(i % 11) / 10.0f;
  quantize(r);
  const auto png = encode_png(r);
  EXPECT_EQ(decode_png(png), r);
  EXPECT_EQ(base64_decode(base64_encode(png)), png);
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>{'f', 'o', 'o', 'b'}), "Zm9vYg==");
  EXPECT_EQ(kind_of([] { decode_png(std::vector<std::uint8_t>{1, 2, 3}); }), ErrorKind::kFormat);
}

}  // namespace
}  // namespace eru
