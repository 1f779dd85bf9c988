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
#include <string>
#include <vector>

#include "eru/config.hpp"
#include "eru/model_config.hpp"

namespace eru {

struct ComplexityParams {
  double text_layers = 6;     // L1
  double conv_layers = 2;     // L2
  double fusion_layers = 4;   // L3
  double token_layers = 12;   // L'
  double segment_tokens = 32; // Q, max tokens per segment
  double window = 512;        // Z, token-model window
  double tokens = 2000;       // N, document tokens
  double feature_map = 16;    // E
  double kernel = 3;          // K
  double in_channels = 1;     // I_in
  double out_channels = 16;   // I_out
  void validate() const;
};

struct AnalyticCosts {
  double segment_level = 0.0;  // L1*N*Q + L3*(N/Q)^2
  double token_level = 0.0;    // L'*Z*N
  double ratio = 0.0;
};

AnalyticCosts analytic_costs(const ComplexityParams& p);

// L2 * |S| * E^2 * K^2 * I_in * I_out with |S| = N / Q. Not part of the ratio.
double visual_cost(const ComplexityParams& p);

struct BenchRow {
  std::size_t tokens = 0;
  double segment_ms = 0.0;
  double token_ms = 0.0;
  double ratio = 0.0;
};

struct BenchOptions {
  std::vector<std::size_t> sizes{500, 1000, 2000};
  std::size_t runs = 5;
  std::size_t segment_tokens = 32;
  std::size_t window = 512;
  std::size_t token_layers = 0;  // 0: text_layers + fusion_layers
  std::uint64_t seed = 7;
};

BenchOptions bench_options(const BenchConfig& config, std::uint64_t seed);

// Median forward wall time of the segment-level encoder (text encoder over
// N/Q segments of Q tokens, then fusion over the segment states) against a
// windowed token-level transformer (ceil(N/Z) windows) at the same width.
// Sizes that fail to allocate are reported on stderr and skipped.
std::vector<BenchRow> empirical_bench(const ModelConfig& model, const BenchOptions& options);

// N,t_segment_ms,t_token_ms,ratio
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace eru
