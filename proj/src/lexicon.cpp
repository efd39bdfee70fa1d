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

#include "innerself/lexicon.hpp"

#include <algorithm>
#include <sstream>

#include "innerself/audio.hpp"
#include "innerself/error.hpp"
#include "innerself/utf8.hpp"

namespace innerself {
namespace {

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || (u >= '0' && u <= '9') ||
         u == '\'' || u >= 0x80;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_byte(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word_byte(text[j])) ++j;
    std::size_t b = i;
    std::size_t e = j;
    while (b < e && text[b] == '\'') ++b;
    while (e > b && text[e - 1] == '\'') --e;
    if (b < e) tokens.push_back(Token{b, e, utf8::ascii_lower(text.substr(b, e - b))});
    i = j;
  }
  return tokens;
}

std::string normalize_phrase(std::string_view phrase) {
  std::string out;
  bool pending_space = false;
  for (char c : phrase) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  }
  return out;
}

Lexicon::Lexicon(const std::vector<std::string>& entries) {
  for (const auto& e : entries) add(e);
}

void Lexicon::add(std::string_view entry) {
  std::string norm = normalize_phrase(entry);
  if (norm.empty()) return;
  const auto toks = tokenize(norm);
  if (toks.empty()) return;
  if (entries_.insert(norm).second) {
    ordered_.push_back(norm);
    max_tokens_ = std::max(max_tokens_, toks.size());
  }
}

Lexicon Lexicon::parse(std::string_view contents) {
  utf8::require_valid(contents);
  Lexicon lex;
  std::istringstream in{std::string(contents)};
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    lex.add(line);
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  try {
    return parse(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(ErrorCode::kTableError, "lexicon " + path.string() + ": " + e.what());
  }
}

bool Lexicon::contains(std::string_view phrase) const {
  return entries_.contains(normalize_phrase(phrase));
}

std::vector<PhraseMatch> Lexicon::find_all(std::string_view text) const {
  return find_all(text, tokenize(text));
}

std::vector<PhraseMatch> Lexicon::find_all(std::string_view text,
                                           const std::vector<Token>& tokens) const {
  std::vector<PhraseMatch> matches;
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    const std::size_t longest = std::min(max_tokens_, tokens.size() - i);
    for (std::size_t n = longest; n >= 1; --n) {
      std::string phrase = tokens[i].lower;
      bool contiguous = true;
      for (std::size_t k = 1; k < n; ++k) {
        const auto gap = text.substr(tokens[i + k - 1].end,
                                     tokens[i + k].begin - tokens[i + k - 1].end);
        if (gap.empty() || !std::all_of(gap.begin(), gap.end(), is_space)) {
          contiguous = false;
          break;
        }
        phrase += ' ';
        phrase += tokens[i + k].lower;
      }
      if (contiguous && entries_.contains(phrase)) {
        matches.push_back(PhraseMatch{i, n, tokens[i].begin, tokens[i + n - 1].end, phrase});
        i += n;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return matches;
}

}  // namespace innerself
