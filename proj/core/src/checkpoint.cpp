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

#include "eru/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "eru/config.hpp"
#include "eru/error.hpp"

namespace eru {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "eru-ckpt-v1\n";

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  return v;
}

void put_f32(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float get_f32(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

json schema_json(const LabelSchema& schema) {
  json blocks = json::array();
  for (std::size_t b = 0; b < schema.block_count(); ++b) {
    json fields = json::array();
    for (auto f : schema.fields_of(b)) fields.push_back(schema.field_name(f));
    blocks.push_back({schema.block_name(b), fields});
  }
  return blocks;
}

LabelSchema schema_from_json(const json& j) {
  std::vector<std::pair<std::string, std::vector<std::string>>> blocks;
  for (const auto& entry : j) {
    blocks.emplace_back(entry.at(0).get<std::string>(), entry.at(1).get<std::vector<std::string>>());
  }
  return LabelSchema(std::move(blocks));
}

}  // namespace

std::string checkpoint_bytes(const Model<float>& model, const json& meta) {
  json tensors = json::array();
  std::string data;
  for (const auto& p : model.params()) {
    const std::size_t offset = data.size();
    for (float v : p.value.values()) put_f32(data, v);
    tensors.push_back({{"name", p.name},
                       {"shape", p.value.shape()},
                       {"dtype", "float32"},
                       {"offset", offset},
                       {"bytes", data.size() - offset}});
  }
  const json manifest = {{"format", kCheckpointFormat},
                         {"config", to_json(model.config())},
                         {"vocab", model.vocab().tokens()},
                         {"schema", schema_json(model.schema())},
                         {"tensors", tensors},
                         {"step", model.params().step()},
                         {"meta", meta}};
  const std::string text = manifest.dump();
  std::string out(kMagic);
  put_u64(out, text.size());
  out += text;
  out += data;
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, const json& meta) {
  const std::string bytes = checkpoint_bytes(model, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

LoadedCheckpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
    fail(ErrorKind::kFormat, "checkpoint: missing eru-ckpt-v1 header");
  }
  const std::uint64_t length = get_u64(bytes.substr(kMagic.size(), 8));
  const std::size_t start = kMagic.size() + 8;
  if (length > bytes.size() - start) fail(ErrorKind::kFormat, "checkpoint: truncated manifest");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(start, length));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kFormat, std::string("checkpoint manifest: ") + e.what());
  }
  const std::string_view data = bytes.substr(start + length);
  try {
    if (manifest.at("format").get<std::string>() != kCheckpointFormat) {
      fail(ErrorKind::kFormat, "checkpoint: unsupported format " + manifest.at("format").dump());
    }
    ModelConfig config = model_config_from_json(manifest.at("config"));
    Vocab vocab(manifest.at("vocab").get<std::vector<std::string>>());
    LabelSchema schema = schema_from_json(manifest.at("schema"));
    nn::ParamStore<float> store;
    for (const auto& t : manifest.at("tensors")) {
      if (t.at("dtype").get<std::string>() != "float32") fail(ErrorKind::kFormat, "checkpoint: only float32 tensors are supported");
      const auto shape = t.at("shape").get<nn::Shape>();
      const auto offset = t.at("offset").get<std::size_t>();
      const auto count = nn::shape_size(shape);
      if (t.at("bytes").get<std::size_t>() != 4 * count || offset > data.size() || 4 * count > data.size() - offset) {
        fail(ErrorKind::kFormat, "checkpoint: tensor " + t.at("name").get<std::string>() + " overruns the data section");
      }
      std::vector<float> values(count);
      for (std::size_t i = 0; i < count; ++i) values[i] = get_f32(data.data() + offset + 4 * i);
      store.add(t.at("name").get<std::string>(), nn::Tensor<float>(shape, std::move(values)));
    }
    store.set_step(manifest.at("step").get<std::size_t>());
    json meta = manifest.value("meta", json::object());
    return LoadedCheckpoint{Model<float>(std::move(config), std::move(vocab), std::move(schema), std::move(store)),
                            std::move(meta)};
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("checkpoint manifest: ") + e.what());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace eru
