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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eru/raster.hpp"

namespace eru {

// Page-space box; origin top-left, y grows downward.
struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double cx() const { return 0.5 * (x0 + x1); }
  double cy() const { return 0.5 * (y0 + y1); }

  bool operator==(const BBox&) const = default;
};

struct PageSize {
  double width = 0;
  double height = 0;

  bool operator==(const PageSize&) const = default;
};

struct Segment {
  std::int64_t id = 0;
  std::string text;
  BBox bbox;
  std::size_t page = 0;
  std::optional<GlyphRaster> crop;
  std::optional<std::size_t> rank;
  std::optional<std::string> label_seg;
  std::optional<std::string> label_block;

  bool operator==(const Segment&) const = default;
};

struct ResumeDoc {
  std::string id;
  std::vector<PageSize> pages;
  std::vector<Segment> segments;

  bool labeled() const;
  bool operator==(const ResumeDoc&) const = default;
};

// Two-level label taxonomy. Every field belongs to exactly one block; the
// "other" block owns the single "other" field.
class LabelSchema {
 public:
  static constexpr std::string_view kOther = "other";

  LabelSchema() = default;
  // Blocks in order, each with its fields in order.
  explicit LabelSchema(std::vector<std::pair<std::string, std::vector<std::string>>> blocks);

  static const LabelSchema& default_schema();

  std::size_t block_count() const noexcept { return blocks_.size(); }
  std::size_t field_count() const noexcept { return fields_.size(); }
  const std::string& block_name(std::size_t b) const { return blocks_[b]; }
  const std::string& field_name(std::size_t f) const { return fields_[f]; }
  std::size_t owner_block(std::size_t field) const { return owner_[field]; }
  const std::vector<std::size_t>& fields_of(std::size_t block) const { return fields_by_block_[block]; }

  std::optional<std::size_t> block_index(std::string_view name) const;
  std::optional<std::size_t> field_index(std::string_view name) const;
  std::size_t other_field() const { return *field_index(kOther); }
  std::size_t other_block() const { return *block_index(kOther); }

  std::string to_json() const;
  bool operator==(const LabelSchema&) const = default;

 private:
  std::vector<std::string> blocks_;
  std::vector<std::string> fields_;
  std::vector<std::size_t> owner_;
  std::vector<std::vector<std::size_t>> fields_by_block_;
};

LabelSchema load_schema(std::string_view json_bytes);

struct LoadOptions {
  const LabelSchema* schema = nullptr;
  std::size_t max_segments = 256;
  // Directory against which relative crop paths are resolved.
  std::filesystem::path base_dir;
};

// Parses the segment-JSON interchange format. Segments keep file order.
ResumeDoc load_document(std::string_view bytes, const LoadOptions& options = {});
ResumeDoc load_document_file(const std::filesystem::path& path, LoadOptions options = {});

// Canonical serialization: sorted keys, crops embedded as base64 PNG.
std::string serialize_document(const ResumeDoc& doc);

// Checks structural invariants; throws a validation error naming the segment.
void validate_document(const ResumeDoc& doc, const LoadOptions& options = {});

// Per-axis scale onto [0,1000]; pages become 1000 x 1000.
ResumeDoc normalize_boxes(ResumeDoc doc);

// Ranks by (page, y0 quantized to 10-unit rows, x0) with a stable sort.
ResumeDoc assign_reading_order(ResumeDoc doc);

inline constexpr double kNormalizedExtent = 1000.0;
inline constexpr double kReadingRowHeight = 10.0;

// Segment indices in reading order (ranks must be assigned).
std::vector<std::size_t> reading_sequence(const ResumeDoc& doc);

}  // namespace eru
