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
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "eru/model_config.hpp"

namespace eru {

// Weights and sampling knobs of the three pre-training objectives.
struct PretrainWeights {
  double lambda_mlm = 1.0;
  double lambda_vpa = 1.0;
  double lambda_msp = 0.6;
  double tau = 2.0;
  std::size_t n_neg = 8;
  double mlm_rate = 0.15;
  double msp_rate = 0.15;
  std::size_t vpa_neighbors = 4;
  void validate() const;
};

struct OptimConfig {
  double encoder_lr = 5e-5;
  double head_lr = 1e-3;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  std::size_t batch_size = 8;
  std::size_t warmup_steps = 0;  // linear ramp from 0; 0 disables
  void validate() const;
};

struct PretrainConfig {
  std::size_t steps = 2000;
  OptimConfig optim;
  PretrainWeights weights;
};

struct FinetuneConfig {
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  OptimConfig optim;
};

struct CorpusConfig {
  std::string profile = "desk";
  std::size_t unlabeled = 2000;
  std::size_t train = 200;
  std::size_t val = 50;
  std::size_t test = 100;
};

struct VocabConfig {
  std::size_t max_size = 4000;
  std::size_t min_count = 2;
};

struct BenchConfig {
  std::vector<std::size_t> sizes{500, 1000, 2000};
  std::size_t runs = 5;
  std::size_t segment_tokens = 32;  // Q
  std::size_t window = 512;         // Z
  std::size_t token_layers = 0;     // L'; 0 means text_layers + fusion_layers
};

struct PathsConfig {
  std::string corpus;
  std::string out;
};

struct RunConfig {
  ModelConfig model;
  CorpusConfig corpus;
  VocabConfig vocab;
  PretrainConfig pretrain;
  FinetuneConfig finetune;
  BenchConfig bench;
  PathsConfig paths;
  std::uint64_t seed = 7;
  std::size_t threads = 0;  // 0: ERU_THREADS or hardware concurrency
  void validate() const;
};

// Strict parsing: unknown keys and mistyped values are config errors naming
// the dotted key path. Absent keys keep their defaults.
RunConfig parse_run_config(std::string_view json_bytes);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
std::uint64_t config_hash(const RunConfig& config);

// Worker count: explicit value if nonzero, else ERU_THREADS, else 1.
std::size_t resolve_threads(std::size_t requested);

}  // namespace eru
