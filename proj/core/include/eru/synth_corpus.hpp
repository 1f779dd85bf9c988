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
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "eru/doc_model.hpp"
#include "eru/random.hpp"

namespace eru {

// Rendering cues of one segment class. Styles differ by block so the visual
// channel alone carries block identity.
struct TextStyle {
  std::size_t glyph_height = 9;
  std::size_t advance = 6;  // horizontal pixels per character
  std::size_t stroke = 1;   // 2 renders bold
  float ink = 0.85f;
  std::size_t slant = 0;    // horizontal shear in pixels over the glyph height
  bool underline = false;
  bool frame = false;
  float noise = 0.03f;
  bool operator==(const TextStyle&) const = default;
};

// Style of a segment given its block and field (or the section heading).
TextStyle style_for(const std::string& block, const std::string& field, bool heading);

struct CropGeometry {
  std::size_t height = 32;
  std::size_t width = 96;
  double enlarge = 0.10;  // crop margin as a proportion of the text box
};

// Procedural glyph rendering: deterministic in (text, style, seed).
GlyphRaster render_crop(const std::string& text, const TextStyle& style, std::uint64_t seed,
                        const CropGeometry& geometry = {});

struct CorpusProfile {
  std::string name;
  double target_avg_segments = 30.0;
  double target_avg_seg_tokens = 6.0;  // reported for calibration; driven by the counts below
  double target_avg_pages = 1.0;
  // Probability that the next drawn entry belongs to each non-personal block.
  std::vector<std::pair<std::string, double>> block_frequency;
  std::size_t max_pages = 1;
  double page_width = 595.0;
  double page_height = 842.0;
  double margin = 50.0;
  double row_pitch = 22.0;
  std::size_t description_lines_min = 1, description_lines_max = 2;
  std::size_t description_words_min = 5, description_words_max = 10;
  std::uint64_t seed = 7;
  void validate() const;
  nlohmann::json to_json() const;
};

CorpusProfile desk_profile(std::uint64_t seed);
CorpusProfile paper_stats_profile(std::uint64_t seed);
// "desk" or "paper-stats".
CorpusProfile profile_by_name(const std::string& name, std::uint64_t seed);

struct GenerateOptions {
  std::string split = "docs";  // id prefix and seed stream
  bool labeled = true;
  CropGeometry crop;
  bool render = true;  // false leaves crops absent
  std::size_t threads = 1;
};

ResumeDoc generate_document(const CorpusProfile& profile, std::size_t index, const GenerateOptions& options);
std::vector<ResumeDoc> generate_corpus(const CorpusProfile& profile, std::size_t n_docs,
                                       const GenerateOptions& options);

struct CorpusStats {
  std::size_t docs = 0;
  double avg_segments = 0.0;
  double avg_seg_tokens = 0.0;
  double avg_pages = 0.0;
  nlohmann::json to_json() const;
};

CorpusStats corpus_stats(const std::vector<ResumeDoc>& corpus);

// counts[a][b]: segments of field a whose nearest same-page segment (center
// distance, ties to the lower index) has field b.
struct NeighborHeatmap {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;
  std::string csv() const;
  // Share of segments whose nearest neighbor lies in the same block.
  double same_block_share(const LabelSchema& schema) const;
};

NeighborHeatmap neighbor_heatmap(const std::vector<ResumeDoc>& corpus, const LabelSchema& schema);

// Writes <id>.json per document plus manifest.json.
void write_corpus(const std::filesystem::path& dir, const std::vector<ResumeDoc>& docs,
                  const nlohmann::json& manifest_extra = nlohmann::json::object());
// Reads the documents listed in manifest.json, or every *.json file in name
// order when there is no manifest.
std::vector<ResumeDoc> load_corpus(const std::filesystem::path& dir, const LoadOptions& options = {});

}  // namespace eru
