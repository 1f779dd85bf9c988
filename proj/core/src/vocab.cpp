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

#include "eru/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <nlohmann/json.hpp>

#include "eru/doc_model.hpp"
#include "eru/error.hpp"
#include "eru/random.hpp"

namespace eru {
namespace {
const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 128 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur += c < 128 ? static_cast<char>(std::tolower(c)) : ch;
    }
  }
  flush();
  return out;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(std::vector<std::string> tokens) {
  if (tokens.size() < kSpecialCount ||
      !std::equal(kSpecials.begin(), kSpecials.end(), tokens.begin())) {
    std::vector<std::string> full = kSpecials;
    for (auto& t : tokens) {
      if (std::find(kSpecials.begin(), kSpecials.end(), t) == kSpecials.end()) full.push_back(std::move(t));
    }
    tokens = std::move(full);
  }
  tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      fail(ErrorKind::kValidation, "vocab: duplicate token " + tokens_[i]);
    }
  }
}

Vocab Vocab::build(const std::vector<ResumeDoc>& corpus, std::size_t max_size, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus) {
    for (const auto& s : doc.segments) {
      for (auto& w : split_words(s.text)) ++counts[w];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = kSpecials;
  for (auto& [w, c] : ranked) {
    if (tokens.size() >= max_size) break;
    if (c < min_count) break;
    tokens.push_back(w);
  }
  return Vocab(std::move(tokens));
}

std::size_t Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocab::encode(std::string_view text, std::size_t max_tokens) const {
  const std::size_t budget = max_tokens >= 2 ? max_tokens - 2 : 0;
  std::vector<std::size_t> ids{kCls};
  for (const auto& w : split_words(text)) {
    if (ids.size() - 1 >= budget) break;
    ids.push_back(id(w));
  }
  ids.push_back(kSep);
  return ids;
}

std::string Vocab::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < tokens_.size(); ++i) j[tokens_[i]] = i;
  return j.dump(1) + "\n";
}

Vocab Vocab::from_json(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("vocab: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::kFormat, "vocab: expected token -> id object");
  std::vector<std::string> tokens(j.size());
  std::vector<bool> seen(j.size(), false);
  for (auto& [tok, id] : j.items()) {
    const auto i = id.get<std::size_t>();
    if (i >= tokens.size() || seen[i]) fail(ErrorKind::kFormat, "vocab: ids must be a permutation of 0..n-1");
    tokens[i] = tok;
    seen[i] = true;
  }
  if (!std::equal(kSpecials.begin(), kSpecials.end(), tokens.begin())) {
    fail(ErrorKind::kFormat, "vocab: special tokens must occupy ids 0..4");
  }
  return Vocab(std::move(tokens));
}

std::uint64_t Vocab::fingerprint() const {
  std::string joined;
  for (const auto& t : tokens_) {
    joined += t;
    joined += '\n';
  }
  return fnv1a(joined);
}

}  // namespace eru
