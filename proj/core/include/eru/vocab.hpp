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
#include <string_view>
#include <unordered_map>
#include <vector>

namespace eru {

struct ResumeDoc;

// Word-level vocabulary with fixed low ids for the special tokens.
class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kCls = 2;
  static constexpr std::size_t kSep = 3;
  static constexpr std::size_t kMask = 4;
  static constexpr std::size_t kSpecialCount = 5;

  Vocab();
  explicit Vocab(std::vector<std::string> tokens);

  // Tokens ordered by descending corpus frequency, ties broken
  // lexicographically; at most max_size entries including specials.
  static Vocab build(const std::vector<ResumeDoc>& corpus, std::size_t max_size,
                     std::size_t min_count = 1);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t id(std::string_view token) const;
  const std::string& token(std::size_t id) const { return tokens_[id]; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  static bool is_special(std::size_t id) noexcept { return id < kSpecialCount; }

  // Lowercased whitespace + punctuation split, [UNK] for unknown words,
  // truncated to max_tokens - 2 and wrapped as [CLS] ... [SEP].
  std::vector<std::size_t> encode(std::string_view text, std::size_t max_tokens) const;

  std::string to_json() const;
  static Vocab from_json(std::string_view bytes);
  std::uint64_t fingerprint() const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Splits into lowercase words; each ASCII punctuation character is its own token.
std::vector<std::string> split_words(std::string_view text);

}  // namespace eru
