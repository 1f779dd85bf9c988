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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "eru/model.hpp"

namespace eru {

inline constexpr std::string_view kCheckpointFormat = "eru-ckpt-v1";

// Container layout:
//   "eru-ckpt-v1\n"                 12 bytes
//   manifest length                 u64, little-endian
//   manifest                        JSON: format, config, vocab, schema,
//                                   tensors (name, shape, dtype, offset, bytes), meta
//   tensor data                     float32 little-endian, offsets relative
//                                   to the end of the manifest
std::string checkpoint_bytes(const Model<float>& model, const nlohmann::json& meta = nlohmann::json::object());
void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const nlohmann::json& meta = nlohmann::json::object());

struct LoadedCheckpoint {
  Model<float> model;
  nlohmann::json meta;
};

LoadedCheckpoint parse_checkpoint(std::string_view bytes);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace eru
