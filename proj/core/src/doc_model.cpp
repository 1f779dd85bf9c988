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

#include "eru/doc_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "eru/error.hpp"

namespace eru {

using nlohmann::json;

bool ResumeDoc::labeled() const {
  return !segments.empty() && std::all_of(segments.begin(), segments.end(), [](const Segment& s) {
           return s.label_seg.has_value() && s.label_block.has_value();
         });
}

LabelSchema::LabelSchema(std::vector<std::pair<std::string, std::vector<std::string>>> blocks) {
  for (auto& [block, fields] : blocks) {
    if (block_index(block)) fail(ErrorKind::kValidation, "schema: duplicate block " + block);
    const std::size_t b = blocks_.size();
    blocks_.push_back(block);
    fields_by_block_.emplace_back();
    if (fields.empty()) fail(ErrorKind::kValidation, "schema: block " + block + " has no fields");
    for (auto& f : fields) {
      if (field_index(f)) fail(ErrorKind::kValidation, "schema: duplicate field " + f);
      fields_by_block_[b].push_back(fields_.size());
      fields_.push_back(f);
      owner_.push_back(b);
    }
  }
  const auto ob = block_index(kOther);
  const auto of = field_index(kOther);
  if (!ob || !of || owner_[*of] != *ob) {
    fail(ErrorKind::kValidation, "schema: an \"other\" block owning an \"other\" field is required");
  }
}

const LabelSchema& LabelSchema::default_schema() {
  static const LabelSchema schema({
      {"personal", {"personal.name", "personal.phone", "personal.email"}},
      {"education", {"education.school", "education.major", "education.degree", "education.time"}},
      {"work", {"work.company", "work.position", "work.time", "work.description"}},
      {"project", {"project.name", "project.role", "project.time", "project.description"}},
      {"skill", {"skill.item"}},
      {"other", {"other"}},
  });
  return schema;
}

std::optional<std::size_t> LabelSchema::block_index(std::string_view name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> LabelSchema::field_index(std::string_view name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i] == name) return i;
  }
  return std::nullopt;
}

std::string LabelSchema::to_json() const {
  nlohmann::ordered_json blocks = nlohmann::ordered_json::object();
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t f : fields_by_block_[b]) arr.push_back(fields_[f]);
    blocks[blocks_[b]] = arr;
  }
  nlohmann::ordered_json root;
  root["blocks"] = blocks;
  return root.dump(2) + "\n";
}

LabelSchema load_schema(std::string_view json_bytes) {
  nlohmann::ordered_json root;
  try {
    root = nlohmann::ordered_json::parse(json_bytes);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("schema: ") + e.what());
  }
  if (!root.is_object() || !root.contains("blocks") || !root["blocks"].is_object()) {
    fail(ErrorKind::kFormat, "schema: expected {\"blocks\": {...}}");
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> blocks;
  for (auto& [name, fields] : root["blocks"].items()) {
    if (!fields.is_array()) fail(ErrorKind::kFormat, "schema: block " + name + " must list fields");
    std::vector<std::string> names;
    for (auto& f : fields) {
      if (!f.is_string()) fail(ErrorKind::kFormat, "schema: field names must be strings");
      names.push_back(f.get<std::string>());
    }
    blocks.emplace_back(name, std::move(names));
  }
  return LabelSchema(std::move(blocks));
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

[[noreturn]] void segment_fail(ErrorKind kind, std::int64_t id, const std::string& what) {
  fail(kind, "segment " + std::to_string(id) + ": " + what);
}

GlyphRaster load_crop(const std::string& ref, const LoadOptions& options, std::int64_t id) {
  try {
    if (ref.size() > 4 && ref.compare(ref.size() - 4, 4, ".png") == 0) {
      const std::string bytes = read_file(options.base_dir / ref);
      return decode_png(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
    }
    const auto bytes = base64_decode(ref);
    return decode_png(bytes);
  } catch (const Error& e) {
    segment_fail(e.kind(), id, std::string("crop: ") + e.what());
  }
}

}  // namespace

void validate_document(const ResumeDoc& doc, const LoadOptions& options) {
  if (doc.pages.empty()) fail(ErrorKind::kValidation, "document " + doc.id + ": no pages");
  for (std::size_t p = 0; p < doc.pages.size(); ++p) {
    if (!(doc.pages[p].width > 0) || !(doc.pages[p].height > 0)) {
      fail(ErrorKind::kValidation, "page " + std::to_string(p) + ": non-positive dimension");
    }
  }
  if (doc.segments.empty()) fail(ErrorKind::kValidation, "document " + doc.id + ": no segments");
  if (doc.segments.size() > options.max_segments) {
    fail(ErrorKind::kValidation, "document " + doc.id + ": " + std::to_string(doc.segments.size()) +
                                     " segments exceeds limit " + std::to_string(options.max_segments));
  }
  for (const auto& s : doc.segments) {
    if (s.text.empty()) segment_fail(ErrorKind::kValidation, s.id, "empty text");
    if (s.page >= doc.pages.size()) {
      segment_fail(ErrorKind::kValidation, s.id, "page " + std::to_string(s.page) + " out of range");
    }
    const auto& b = s.bbox;
    if (!(b.x0 < b.x1) || !(b.y0 < b.y1)) segment_fail(ErrorKind::kValidation, s.id, "bbox inversion");
    if (b.x0 < 0 || b.y0 < 0) segment_fail(ErrorKind::kValidation, s.id, "negative bbox coordinate");
    const auto& pg = doc.pages[s.page];
    constexpr double kSlack = 1e-9;
    if (b.x1 > pg.width + kSlack || b.y1 > pg.height + kSlack) {
      segment_fail(ErrorKind::kValidation, s.id, "bbox outside page");
    }
    if (s.label_seg.has_value() != s.label_block.has_value()) {
      segment_fail(ErrorKind::kValidation, s.id, "label_seg and label_block must be given together");
    }
    if (options.schema && s.label_seg) {
      const auto f = options.schema->field_index(*s.label_seg);
      if (!f) segment_fail(ErrorKind::kValidation, s.id, "unknown label " + *s.label_seg);
      const auto blk = options.schema->block_index(*s.label_block);
      if (!blk) segment_fail(ErrorKind::kValidation, s.id, "unknown label " + *s.label_block);
      if (options.schema->owner_block(*f) != *blk) {
        segment_fail(ErrorKind::kValidation, s.id,
                     "label " + *s.label_seg + " does not belong to block " + *s.label_block);
      }
    }
  }
}

ResumeDoc load_document(std::string_view bytes, const LoadOptions& options) {
  json root;
  try {
    root = json::parse(bytes);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed JSON: ") + e.what());
  }
  ResumeDoc doc;
  std::int64_t current = -1;
  try {
    if (!root.is_object()) fail(ErrorKind::kFormat, "document must be a JSON object");
    doc.id = root.at("id").get<std::string>();
    for (const auto& p : root.at("pages")) {
      doc.pages.push_back({p.at("width").get<double>(), p.at("height").get<double>()});
    }
    for (const auto& js : root.at("segments")) {
      Segment s;
      s.id = js.at("id").get<std::int64_t>();
      current = s.id;
      const auto page = js.at("page").get<std::int64_t>();
      if (page < 0) segment_fail(ErrorKind::kValidation, s.id, "negative page index");
      s.page = static_cast<std::size_t>(page);
      const auto& bb = js.at("bbox");
      if (!bb.is_array() || bb.size() != 4) segment_fail(ErrorKind::kFormat, s.id, "bbox must have 4 numbers");
      s.bbox = {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(), bb[3].get<double>()};
      s.text = js.at("text").get<std::string>();
      if (js.contains("crop") && !js["crop"].is_null()) s.crop = load_crop(js["crop"].get<std::string>(), options, s.id);
      if (js.contains("label_seg") && !js["label_seg"].is_null()) s.label_seg = js["label_seg"].get<std::string>();
      if (js.contains("label_block") && !js["label_block"].is_null()) s.label_block = js["label_block"].get<std::string>();
      doc.segments.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    if (current >= 0) segment_fail(ErrorKind::kFormat, current, std::string("malformed: ") + e.what());
    fail(ErrorKind::kFormat, std::string("malformed document: ") + e.what());
  }
  validate_document(doc, options);
  return doc;
}

ResumeDoc load_document_file(const std::filesystem::path& path, LoadOptions options) {
  if (options.base_dir.empty()) options.base_dir = path.parent_path();
  return load_document(read_file(path), options);
}

std::string serialize_document(const ResumeDoc& doc) {
  json root;
  root["id"] = doc.id;
  root["pages"] = json::array();
  for (const auto& p : doc.pages) root["pages"].push_back({{"width", p.width}, {"height", p.height}});
  root["segments"] = json::array();
  for (const auto& s : doc.segments) {
    json js;
    js["id"] = s.id;
    js["page"] = s.page;
    js["bbox"] = {s.bbox.x0, s.bbox.y0, s.bbox.x1, s.bbox.y1};
    js["text"] = s.text;
    if (s.crop) js["crop"] = base64_encode(encode_png(*s.crop));
    if (s.label_seg) js["label_seg"] = *s.label_seg;
    if (s.label_block) js["label_block"] = *s.label_block;
    root["segments"].push_back(std::move(js));
  }
  return root.dump(1) + "\n";
}

ResumeDoc normalize_boxes(ResumeDoc doc) {
  for (std::size_t p = 0; p < doc.pages.size(); ++p) {
    if (!(doc.pages[p].width > 0) || !(doc.pages[p].height > 0)) {
      fail(ErrorKind::kValidation, "page " + std::to_string(p) + ": non-positive dimension");
    }
  }
  for (auto& s : doc.segments) {
    if (s.page >= doc.pages.size()) {
      segment_fail(ErrorKind::kValidation, s.id, "page " + std::to_string(s.page) + " out of range");
    }
    const auto& pg = doc.pages[s.page];
    if (pg.width == kNormalizedExtent && pg.height == kNormalizedExtent) continue;
    const double sx = kNormalizedExtent / pg.width;
    const double sy = kNormalizedExtent / pg.height;
    s.bbox = {s.bbox.x0 * sx, s.bbox.y0 * sy, s.bbox.x1 * sx, s.bbox.y1 * sy};
  }
  for (auto& pg : doc.pages) pg = {kNormalizedExtent, kNormalizedExtent};
  return doc;
}

ResumeDoc assign_reading_order(ResumeDoc doc) {
  std::vector<std::size_t> order(doc.segments.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) {
    const auto& s = doc.segments[i];
    return std::tuple(s.page, std::floor(s.bbox.y0 / kReadingRowHeight), s.bbox.x0);
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  for (std::size_t r = 0; r < order.size(); ++r) doc.segments[order[r]].rank = r;
  return doc;
}

std::vector<std::size_t> reading_sequence(const ResumeDoc& doc) {
  std::vector<std::size_t> seq(doc.segments.size());
  for (std::size_t i = 0; i < doc.segments.size(); ++i) {
    const auto& r = doc.segments[i].rank;
    if (!r || *r >= seq.size()) fail(ErrorKind::kValidation, "reading order not assigned");
    seq[*r] = i;
  }
  return seq;
}

}  // namespace eru
