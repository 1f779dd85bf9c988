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
#include <vector>

namespace eru {

// Architecture dimensions shared by every model component.
struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t text_layers = 2;               // L1
  std::vector<std::size_t> conv_channels{8, 16};  // one stride-2 conv per entry (L2)
  std::size_t fusion_layers = 2;             // L3
  std::size_t ffn_mult = 4;
  std::size_t rel_buckets = 16;
  std::size_t crop_height = 32;
  std::size_t crop_width = 96;
  std::size_t max_pages = 4;
  std::size_t max_seg_tokens = 32;
  std::size_t max_segments = 256;
  double crop_enlarge = 0.10;
  double init_std = 0.02;

  // Throws a config error on inconsistent dimensions.
  void validate() const;
};

}  // namespace eru
