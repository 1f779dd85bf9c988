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

#include "eru/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "eru/error.hpp"
#include "eru/random.hpp"

namespace eru {

using nlohmann::json;

namespace {

// Binds object members to typed fields, then rejects anything unclaimed.
class Reader {
 public:
  Reader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) fail(ErrorKind::kConfig, where() + " must be an object");
  }

  template <typename V>
  Reader& get(const char* key, V& out) {
    claimed_.emplace(key);
    auto it = object_.find(key);
    if (it == object_.end()) return *this;
    try {
      if constexpr (std::is_same_v<V, std::size_t> || std::is_same_v<V, std::uint64_t>) {
        if (!it->is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_same_v<V, double>) {
        if (!it->is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<V, std::string>) {
        if (!it->is_string()) throw std::invalid_argument("expected a string");
      }
      out = it->template get<V>();
    } catch (const std::exception& e) {
      fail(ErrorKind::kConfig, "key '" + join(key) + "': " + e.what());
    }
    return *this;
  }

  template <typename F>
  Reader& section(const char* key, F&& body) {
    claimed_.emplace(key);
    auto it = object_.find(key);
    if (it == object_.end()) return *this;
    Reader inner(*it, join(key));
    body(inner);
    inner.finish();
    return *this;
  }

  void finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (!claimed_.count(it.key())) fail(ErrorKind::kConfig, "unknown key '" + join(it.key()) + "'");
    }
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  const json& object_;
  std::string path_;
  std::set<std::string> claimed_;
};

void read_model(Reader& r, ModelConfig& m) {
  r.get("d_model", m.d_model)
      .get("heads", m.heads)
      .get("text_layers", m.text_layers)
      .get("conv_channels", m.conv_channels)
      .get("fusion_layers", m.fusion_layers)
      .get("ffn_mult", m.ffn_mult)
      .get("rel_buckets", m.rel_buckets)
      .get("crop_height", m.crop_height)
      .get("crop_width", m.crop_width)
      .get("max_pages", m.max_pages)
      .get("max_seg_tokens", m.max_seg_tokens)
      .get("max_segments", m.max_segments)
      .get("crop_enlarge", m.crop_enlarge)
      .get("init_std", m.init_std);
}

void read_optim(Reader& r, OptimConfig& o) {
  r.get("encoder_lr", o.encoder_lr)
      .get("head_lr", o.head_lr)
      .get("weight_decay", o.weight_decay)
      .get("clip_norm", o.clip_norm)
      .get("batch_size", o.batch_size)
      .get("warmup_steps", o.warmup_steps);
}

json optim_json(const OptimConfig& o) {
  return {{"encoder_lr", o.encoder_lr}, {"head_lr", o.head_lr},       {"weight_decay", o.weight_decay},
          {"clip_norm", o.clip_norm},   {"batch_size", o.batch_size}, {"warmup_steps", o.warmup_steps}};
}

}  // namespace

void PretrainWeights::validate() const {
  if (lambda_mlm < 0 || lambda_vpa < 0 || lambda_msp < 0) fail(ErrorKind::kConfig, "pretrain: lambdas must be non-negative");
  if (!(tau > 0)) fail(ErrorKind::kConfig, "pretrain: tau must be positive");
  if (n_neg == 0) fail(ErrorKind::kConfig, "pretrain: n_neg must be positive");
  if (!(mlm_rate > 0 && mlm_rate < 1) || !(msp_rate > 0 && msp_rate < 1)) {
    fail(ErrorKind::kConfig, "pretrain: mask rates must lie in (0, 1)");
  }
  if (vpa_neighbors == 0) fail(ErrorKind::kConfig, "pretrain: vpa_neighbors must be positive");
}

void OptimConfig::validate() const {
  if (!(encoder_lr >= 0) || !(head_lr >= 0)) fail(ErrorKind::kConfig, "optim: learning rates must be non-negative");
  if (!(weight_decay >= 0)) fail(ErrorKind::kConfig, "optim: weight_decay must be non-negative");
  if (!(clip_norm > 0)) fail(ErrorKind::kConfig, "optim: clip_norm must be positive");
  if (batch_size == 0) fail(ErrorKind::kConfig, "optim: batch_size must be positive");
}

void RunConfig::validate() const {
  model.validate();
  pretrain.weights.validate();
  pretrain.optim.validate();
  finetune.optim.validate();
  if (finetune.max_epochs == 0) fail(ErrorKind::kConfig, "finetune: max_epochs must be positive");
  if (vocab.max_size <= 5) fail(ErrorKind::kConfig, "vocab: max_size must exceed the special tokens");
  if (bench.runs == 0 || bench.segment_tokens == 0 || bench.window == 0) {
    fail(ErrorKind::kConfig, "bench: runs, segment_tokens and window must be positive");
  }
  if (bench.segment_tokens > bench.window) fail(ErrorKind::kConfig, "bench: segment_tokens must not exceed window");
}

RunConfig parse_run_config(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kFormat, std::string("config: ") + e.what());
  }
  RunConfig c;
  Reader root(j, "");
  root.section("model", [&](Reader& r) { read_model(r, c.model); })
      .section("corpus", [&](Reader& r) {
        r.get("profile", c.corpus.profile)
            .get("unlabeled", c.corpus.unlabeled)
            .get("train", c.corpus.train)
            .get("val", c.corpus.val)
            .get("test", c.corpus.test);
      })
      .section("vocab", [&](Reader& r) { r.get("max_size", c.vocab.max_size).get("min_count", c.vocab.min_count); })
      .section("pretrain", [&](Reader& r) {
        auto& w = c.pretrain.weights;
        r.get("steps", c.pretrain.steps)
            .section("optim", [&](Reader& o) { read_optim(o, c.pretrain.optim); })
            .get("lambda_mlm", w.lambda_mlm)
            .get("lambda_vpa", w.lambda_vpa)
            .get("lambda_msp", w.lambda_msp)
            .get("tau", w.tau)
            .get("n_neg", w.n_neg)
            .get("mlm_rate", w.mlm_rate)
            .get("msp_rate", w.msp_rate)
            .get("vpa_neighbors", w.vpa_neighbors);
      })
      .section("finetune", [&](Reader& r) {
        r.get("max_epochs", c.finetune.max_epochs)
            .get("patience", c.finetune.patience)
            .section("optim", [&](Reader& o) { read_optim(o, c.finetune.optim); });
      })
      .section("bench", [&](Reader& r) {
        r.get("sizes", c.bench.sizes)
            .get("runs", c.bench.runs)
            .get("segment_tokens", c.bench.segment_tokens)
            .get("window", c.bench.window)
            .get("token_layers", c.bench.token_layers);
      })
      .section("paths", [&](Reader& r) { r.get("corpus", c.paths.corpus).get("out", c.paths.out); })
      .get("seed", c.seed)
      .get("threads", c.threads);
  root.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

json to_json(const ModelConfig& m) {
  return {{"d_model", m.d_model},
          {"heads", m.heads},
          {"text_layers", m.text_layers},
          {"conv_channels", m.conv_channels},
          {"fusion_layers", m.fusion_layers},
          {"ffn_mult", m.ffn_mult},
          {"rel_buckets", m.rel_buckets},
          {"crop_height", m.crop_height},
          {"crop_width", m.crop_width},
          {"max_pages", m.max_pages},
          {"max_seg_tokens", m.max_seg_tokens},
          {"max_segments", m.max_segments},
          {"crop_enlarge", m.crop_enlarge},
          {"init_std", m.init_std}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig m;
  Reader r(j, "model");
  read_model(r, m);
  r.finish();
  m.validate();
  return m;
}

json to_json(const RunConfig& c) {
  const auto& w = c.pretrain.weights;
  return {{"model", to_json(c.model)},
          {"corpus",
           {{"profile", c.corpus.profile},
            {"unlabeled", c.corpus.unlabeled},
            {"train", c.corpus.train},
            {"val", c.corpus.val},
            {"test", c.corpus.test}}},
          {"vocab", {{"max_size", c.vocab.max_size}, {"min_count", c.vocab.min_count}}},
          {"pretrain",
           {{"steps", c.pretrain.steps},
            {"optim", optim_json(c.pretrain.optim)},
            {"lambda_mlm", w.lambda_mlm},
            {"lambda_vpa", w.lambda_vpa},
            {"lambda_msp", w.lambda_msp},
            {"tau", w.tau},
            {"n_neg", w.n_neg},
            {"mlm_rate", w.mlm_rate},
            {"msp_rate", w.msp_rate},
            {"vpa_neighbors", w.vpa_neighbors}}},
          {"finetune",
           {{"max_epochs", c.finetune.max_epochs},
            {"patience", c.finetune.patience},
            {"optim", optim_json(c.finetune.optim)}}},
          {"bench",
           {{"sizes", c.bench.sizes},
            {"runs", c.bench.runs},
            {"segment_tokens", c.bench.segment_tokens},
            {"window", c.bench.window},
            {"token_layers", c.bench.token_layers}}},
          {"paths", {{"corpus", c.paths.corpus}, {"out", c.paths.out}}},
          {"seed", c.seed},
          {"threads", c.threads}};
}

std::uint64_t config_hash(const RunConfig& config) { return fnv1a(to_json(config).dump()); }

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ERU_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || v == 0) fail(ErrorKind::kConfig, "ERU_THREADS must be a positive integer");
    return v;
  }
  return 1;
}

}  // namespace eru
