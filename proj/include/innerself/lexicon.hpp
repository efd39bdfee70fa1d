// Copyright 2026 The InnerSelf Authors.
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
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace innerself {

/// A word in a UTF-8 text. Word characters are ASCII letters, digits,
/// apostrophes and any non-ASCII byte; leading and trailing apostrophes are
/// not part of the token.
struct Token {
  std::size_t begin = 0;  // byte offsets into the source text
  std::size_t end = 0;
  std::string lower;      // ASCII-lowercased token text
};

std::vector<Token> tokenize(std::string_view text);

/// A lexicon hit covering tokens [first_token, first_token + token_count).
struct PhraseMatch {
  std::size_t first_token = 0;
  std::size_t token_count = 0;
  std::size_t begin = 0;  // byte offsets
  std::size_t end = 0;
  std::string entry;      // normalized lexicon entry
};

/// Set of lowercase tokens or multi-word phrases.
///
/// File format: UTF-8, one entry per line, '#' starts a comment line, blank
/// lines ignored. Entries are normalized to lowercase with single spaces.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(const std::vector<std::string>& entries);

  static Lexicon load(const std::filesystem::path& path);
  static Lexicon parse(std::string_view contents);

  bool contains(std::string_view phrase) const;
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t max_phrase_tokens() const noexcept { return max_tokens_; }
  const std::vector<std::string>& entries() const noexcept { return ordered_; }

  /// Non-overlapping matches, scanned left to right, longest match first at
  /// each token position. Consecutive tokens of a phrase must be separated by
  /// whitespace only.
  std::vector<PhraseMatch> find_all(std::string_view text) const;
  std::vector<PhraseMatch> find_all(std::string_view text, const std::vector<Token>& tokens) const;

 private:
  void add(std::string_view entry);

  std::unordered_set<std::string> entries_;
  std::vector<std::string> ordered_;
  std::size_t max_tokens_ = 0;
};

/// Lowercases and collapses whitespace runs to one space.
std::string normalize_phrase(std::string_view phrase);

}  // namespace innerself
