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

#include "eru/complexity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <new>

#include "eru/embedding.hpp"
#include "eru/error.hpp"
#include "eru/fusion.hpp"

namespace eru {

void ComplexityParams::validate() const {
  const double all[] = {text_layers, conv_layers, fusion_layers, token_layers, segment_tokens, window,
                        tokens,      feature_map, kernel,        in_channels,  out_channels};
  for (double v : all) {
    if (!(v > 0)) fail(ErrorKind::kConfig, "complexity: every parameter must be positive");
  }
  if (segment_tokens > window) fail(ErrorKind::kConfig, "complexity: Q must not exceed Z");
}

AnalyticCosts analytic_costs(const ComplexityParams& p) {
  p.validate();
  AnalyticCosts c;
  const double segments = p.tokens / p.segment_tokens;
  c.segment_level = p.text_layers * p.tokens * p.segment_tokens + p.fusion_layers * segments * segments;
  c.token_level = p.token_layers * p.window * p.tokens;
  c.ratio = c.segment_level / c.token_level;
  return c;
}

double visual_cost(const ComplexityParams& p) {
  p.validate();
  return p.conv_layers * (p.tokens / p.segment_tokens) * p.feature_map * p.feature_map * p.kernel * p.kernel *
         p.in_channels * p.out_channels;
}

BenchOptions bench_options(const BenchConfig& config, std::uint64_t seed) {
  BenchOptions o;
  o.sizes = config.sizes;
  o.runs = config.runs;
  o.segment_tokens = config.segment_tokens;
  o.window = config.window;
  o.token_layers = config.token_layers;
  o.seed = seed;
  return o;
}

namespace {

template <typename Fn>
double median_ms(std::size_t runs, Fn&& fn) {
  fn();  // warm-up
  std::vector<double> times;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  return n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
}

constexpr std::size_t kBenchVocab = 1000;

}  // namespace

std::vector<BenchRow> empirical_bench(const ModelConfig& model, const BenchOptions& options) {
  if (options.runs == 0 || options.segment_tokens < 2 || options.window == 0) {
    fail(ErrorKind::kConfig, "bench: runs, segment_tokens and window must be positive");
  }
  ModelConfig cfg = model;
  cfg.max_seg_tokens = options.segment_tokens;
  cfg.validate();
  Rng rng(options.seed);
  nn::ParamStore<float> store;
  const TextEncoder text = TextEncoder::create(store, cfg, kBenchVocab, rng);
  const FusionTransformer fusion = FusionTransformer::create(store, cfg, rng);
  const std::size_t token_layers =
      options.token_layers ? options.token_layers : cfg.text_layers + cfg.fusion_layers;
  const std::size_t token_embedding =
      store.add("token.embedding", nn::random_normal<float>({kBenchVocab, cfg.d_model}, cfg.init_std, rng));
  const std::size_t token_position =
      store.add("token.position", nn::random_normal<float>({options.window, cfg.d_model}, cfg.init_std, rng));
  std::vector<nn::EncoderLayer> token_stack;
  for (std::size_t l = 0; l < token_layers; ++l) {
    token_stack.push_back(nn::EncoderLayer::create(store, "token.layer" + std::to_string(l), cfg.d_model, cfg.heads,
                                                   cfg.ffn_mult * cfg.d_model, rng));
  }

  std::vector<BenchRow> rows;
  for (std::size_t n_tokens : options.sizes) {
    try {
      const std::size_t Q = options.segment_tokens;
      const std::size_t segments = std::max<std::size_t>(1, (n_tokens + Q - 1) / Q);
      std::vector<std::vector<std::size_t>> seg_tokens(segments);
      std::vector<BBox> boxes(segments);
      for (std::size_t s = 0; s < segments; ++s) {
        seg_tokens[s].push_back(Vocab::kCls);
        for (std::size_t t = 0; t + 2 < Q; ++t) seg_tokens[s].push_back(Vocab::kSpecialCount + rng.index(kBenchVocab - Vocab::kSpecialCount));
        seg_tokens[s].push_back(Vocab::kSep);
        const double y = 1000.0 * static_cast<double>(s) / static_cast<double>(segments);
        boxes[s] = {50.0, y, 950.0, y + 1000.0 / static_cast<double>(segments)};
      }
      std::vector<std::size_t> node_rows(2 * segments);
      for (std::size_t k = 0; k < node_rows.size(); ++k) node_rows[k] = node_segment(k);
      std::vector<std::size_t> ids(n_tokens), positions(n_tokens);
      std::vector<std::pair<std::size_t, std::size_t>> windows;
      for (std::size_t i = 0; i < n_tokens; ++i) {
        ids[i] = Vocab::kSpecialCount + rng.index(kBenchVocab - Vocab::kSpecialCount);
        positions[i] = i % options.window;
      }
      for (std::size_t b = 0; b < n_tokens; b += options.window) windows.emplace_back(b, std::min(n_tokens, b + options.window));

      BenchRow row;
      row.tokens = n_tokens;
      row.segment_ms = median_ms(options.runs, [&] {
        nn::Tape<float> tape(nullptr, false);
        const TextEncoding enc = text(tape, store, seg_tokens);
        // Two nodes per segment, as in the full model; the visual slot reuses
        // the text state since only sequence structure is being timed.
        fusion.encode(tape, store, tape.gather_rows(enc.cls, node_rows), boxes);
      });
      row.token_ms = median_ms(options.runs, [&] {
        nn::Tape<float> tape(nullptr, false);
        nn::Var x = tape.add(tape.gather_rows(tape.param(store, token_embedding), ids),
                             tape.gather_rows(tape.param(store, token_position), positions));
        for (const auto& layer : token_stack) x = layer(tape, store, x, windows);
      });
      row.ratio = row.segment_ms / row.token_ms;
      rows.push_back(row);
    } catch (const std::bad_alloc&) {
      std::cerr << "bench: out of memory at N=" << n_tokens << ", skipped\n";
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "N,t_segment_ms,t_token_ms,ratio\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%zu,%.4f,%.4f,%.6f\n", r.tokens, r.segment_ms, r.token_ms, r.ratio);
    out += line;
  }
  return out;
}

}  // namespace eru
