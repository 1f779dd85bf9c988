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
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eru {

// Grayscale segment crop; ink is 1, paper is 0. Pixel values are always
// multiples of 1/255 so PNG encoding is lossless.
struct GlyphRaster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  GlyphRaster() = default;
  GlyphRaster(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w, 0.0f) {}

  float& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  float at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

  bool operator==(const GlyphRaster&) const = default;
};

// Rounds every pixel to the nearest k/255 and clamps to [0,1].
void quantize(GlyphRaster& raster);

std::vector<std::uint8_t> encode_png(const GlyphRaster& raster);
GlyphRaster decode_png(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace eru
