// Copyright 2026 The cnforge Authors.
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

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cnforge/error.hpp"

namespace cnforge {

using Tokens = std::vector<std::string>;

namespace utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

/// Decodes the code point starting at `pos` and advances `pos` past it.
/// Malformed sequences consume one byte and yield U+FFFD.
inline char32_t decode(std::string_view s, std::size_t& pos) {
  const auto lead = static_cast<unsigned char>(s[pos]);
  if (lead < 0x80) {
    ++pos;
    return lead;
  }
  std::size_t extra = 0;
  char32_t cp = 0;
  if ((lead & 0xE0) == 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3;
    cp = lead & 0x07;
  } else {
    ++pos;
    return kReplacement;
  }
  if (pos + extra >= s.size()) {
    ++pos;
    return kReplacement;
  }
  for (std::size_t i = 1; i <= extra; ++i) {
    const auto c = static_cast<unsigned char>(s[pos + i]);
    if ((c & 0xC0) != 0x80) {
      ++pos;
      return kReplacement;
    }
    cp = (cp << 6) | (c & 0x3F);
  }
  pos += extra + 1;
  return cp;
}

inline void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace utf8

/// True for code points that belong to a word: ASCII letters and digits,
/// plus every non-ASCII code point outside the punctuation, symbol, space
/// and emoji blocks.
inline bool is_word_char(char32_t c) {
  if (c < 0x80) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
           (c >= 'A' && c <= 'Z');
  }
  if (c < 0xC0) return c == 0xAA || c == 0xB5 || c == 0xBA;
  if (c == 0xD7 || c == 0xF7) return false;
  if (c == utf8::kReplacement) return false;
  if (c == 0x037E || c == 0x0387 || c == 0x0589 || c == 0x05BE) return false;
  if (c == 0x060C || c == 0x061B || c == 0x061F || c == 0x06D4) return false;
  if (c >= 0x066A && c <= 0x066D) return false;
  if (c >= 0x2000 && c <= 0x2BFF) return false;
  if (c >= 0x2E00 && c <= 0x2E7F) return false;
  if (c >= 0x3000 && c <= 0x303F) return false;
  if (c >= 0xE000 && c <= 0xF8FF) return false;
  if (c >= 0xFE30 && c <= 0xFE4F) return false;
  if (c >= 0xFF00 && c <= 0xFF0F) return false;
  if (c >= 0xFF1A && c <= 0xFF20) return false;
  if (c >= 0xFF3B && c <= 0xFF40) return false;
  if (c >= 0xFF5B && c <= 0xFF65) return false;
  if (c >= 0xFFF0) return c >= 0x10000 && !(c >= 0x1F000 && c <= 0x1FAFF);
  return true;
}

/// Simple case folding for ASCII, Latin-1, Latin Extended-A, Greek,
/// Cyrillic and Armenian capitals.
inline char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0xC0) return c;
  if (c <= 0xDE) return c == 0xD7 ? c : c + 0x20;
  if (c >= 0x100 && c <= 0x137) return c | 1;
  if (c >= 0x139 && c <= 0x148) return (c & 1) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return c | 1;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E) return (c & 1) ? c + 1 : c;
  if (c == 0x386) return 0x3AC;
  if (c >= 0x388 && c <= 0x38A) return c + 37;
  if (c == 0x38C) return 0x3CC;
  if (c == 0x38E || c == 0x38F) return c + 63;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if ((c >= 0x460 && c <= 0x481) || (c >= 0x48A && c <= 0x4BF) ||
      (c >= 0x4D0 && c <= 0x52F)) {
    return c | 1;
  }
  if (c >= 0x531 && c <= 0x556) return c + 0x30;
  return c;
}

inline bool is_upper(char32_t c) { return to_lower(c) != c; }

/// A token together with the byte range of its surface form in the source.
struct TokenSpan {
  std::string token;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Splits on non-alphanumeric boundaries and lowercases. Punctuation is
/// dropped and digits are kept, so "3M Muslims" gives {"3m", "muslims"}.
inline std::vector<TokenSpan> tokenize_spans(std::string_view text) {
  std::vector<TokenSpan> spans;
  TokenSpan current;
  bool in_word = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t start = pos;
    const char32_t cp = utf8::decode(text, pos);
    if (is_word_char(cp)) {
      if (!in_word) {
        current = TokenSpan{{}, start, start};
        in_word = true;
      }
      utf8::encode(to_lower(cp), current.token);
      current.end = pos;
    } else if (in_word) {
      spans.push_back(std::move(current));
      in_word = false;
    }
  }
  if (in_word) spans.push_back(std::move(current));
  return spans;
}

inline Tokens tokenize(std::string_view text) {
  Tokens tokens;
  for (auto& span : tokenize_spans(text)) tokens.push_back(std::move(span.token));
  return tokens;
}

inline std::string join(const Tokens& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.append(sep);
    out.append(tokens[i]);
  }
  return out;
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

/// Collapses whitespace runs to one space and trims both ends.
inline std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string lowercase(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) utf8::encode(to_lower(utf8::decode(text, pos)), out);
  return out;
}

/// A set of lowercase entries loaded from a one-per-line data file.
/// Blank lines and lines starting with '#' are ignored.
class WordList {
 public:
  WordList() = default;
  WordList(std::initializer_list<std::string_view> words) {
    for (auto w : words) words_.emplace(w);
  }

  static WordList from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("ingest", "cannot open word list: " + path);
    WordList list;
    std::string line;
    while (std::getline(in, line)) {
      auto entry = trim(line);
      if (entry.empty() || entry.front() == '#') continue;
      list.words_.insert(lowercase(entry));
    }
    return list;
  }

  bool contains(std::string_view word) const {
    return words_.find(std::string(word)) != words_.end();
  }
  std::size_t size() const { return words_.size(); }
  const std::set<std::string>& words() const { return words_; }

  friend bool operator==(const WordList&, const WordList&) = default;

 private:
  std::set<std::string> words_;
};

/// Mirrors data/abbreviations.txt.
inline const WordList& default_abbreviations() {
  static const WordList list{"dr.", "mr.",  "mrs.", "ms.",  "prof.",
                             "st.", "jr.",  "sr.",  "vs.",  "u.s.",
                             "u.k.", "e.g.", "i.e.", "etc."};
  return list;
}

/// Mirrors data/stopwords.txt.
inline const WordList& default_stopwords() {
  static const WordList list{
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves",
      "you", "your", "yours", "yourself", "yourselves", "he", "him", "his",
      "himself", "she", "her", "hers", "herself", "it", "its", "itself",
      "they", "them", "their", "theirs", "themselves", "what", "which", "who",
      "whom", "this", "that", "these", "those", "am", "is", "are",
      "was", "were", "be", "been", "being", "have", "has", "had",
      "having", "do", "does", "did", "doing", "a", "an", "the",
      "and", "but", "if", "or", "because", "as", "until", "while",
      "of", "at", "by", "for", "with", "about", "against", "between",
      "into", "through", "during", "before", "after", "above", "below", "to",
      "from", "up", "down", "in", "out", "on", "off", "over",
      "under", "again", "further", "then", "once", "here", "there", "when",
      "where", "why", "how", "all", "any", "both", "each", "few",
      "more", "most", "other", "some", "such", "no", "nor", "not",
      "only", "own", "same", "so", "than", "too", "very", "s",
      "t", "can", "will", "just", "don", "should", "now", "d",
      "ll", "m", "o", "re", "ve", "y", "ain", "aren",
      "couldn", "didn", "doesn", "hadn", "hasn", "haven", "isn", "ma",
      "mightn", "mustn", "needn", "shan", "shouldn", "wasn", "weren", "won",
      "wouldn",  };
  return list;
}

namespace detail {

inline bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

inline bool is_closing(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

inline bool is_opening(char c) { return c == '"' || c == '\'' || c == '(' || c == '['; }

// Right double/single quotation marks, U+201D and U+2019.
inline std::size_t closing_quote_len(std::string_view s, std::size_t pos) {
  if (pos + 3 <= s.size() && s.substr(pos, 2) == "\xE2\x80" &&
      (s[pos + 2] == '\x9D' || s[pos + 2] == '\x99')) {
    return 3;
  }
  return 0;
}

// Left double/single quotation marks, U+201C and U+2018.
inline std::size_t opening_quote_len(std::string_view s, std::size_t pos) {
  if (pos + 3 <= s.size() && s.substr(pos, 2) == "\xE2\x80" &&
      (s[pos + 2] == '\x9C' || s[pos + 2] == '\x98')) {
    return 3;
  }
  return 0;
}

}  // namespace detail

/// Rule-based sentence splitter. A boundary is a run of . ! ? (plus any
/// closing quotes or brackets) followed by a space and then an uppercase
/// letter or digit, optionally behind opening quotes. A lone period ending
/// a listed abbreviation is never a boundary. Output segments are
/// whitespace-normalized, so joining them with single spaces gives back
/// normalize_whitespace(text).
inline std::vector<std::string> segment_sentences(
    std::string_view text, const WordList& abbreviations = default_abbreviations()) {
  const std::string s = normalize_whitespace(text);
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!detail::is_terminal(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && detail::is_terminal(s[j])) ++j;
    const bool single_period = (j - i == 1 && s[i] == '.');
    for (;;) {
      if (j < s.size() && detail::is_closing(s[j])) {
        ++j;
      } else if (auto n = detail::closing_quote_len(s, j); n > 0) {
        j += n;
      } else {
        break;
      }
    }
    if (j >= s.size() || s[j] != ' ') {
      i = j;
      continue;
    }
    std::size_t k = j + 1;
    for (;;) {
      if (k < s.size() && detail::is_opening(s[k])) {
        ++k;
      } else if (auto n = detail::opening_quote_len(s, k); n > 0) {
        k += n;
      } else {
        break;
      }
    }
    bool boundary = false;
    if (k < s.size()) {
      std::size_t p = k;
      const char32_t next = utf8::decode(s, p);
      boundary = is_upper(next) || (next >= '0' && next <= '9');
    }
    if (boundary && single_period) {
      std::size_t word_start = s.rfind(' ', i);
      word_start = word_start == std::string::npos ? 0 : word_start + 1;
      while (word_start < i && detail::is_opening(s[word_start])) ++word_start;
      const auto word = lowercase(std::string_view(s).substr(word_start, i + 1 - word_start));
      if (abbreviations.contains(word)) boundary = false;
    }
    if (boundary) {
      out.push_back(s.substr(start, j - start));
      start = j + 1;
    }
    i = j;
  }
  if (start < s.size()) out.push_back(s.substr(start));
  return out;
}

}  // namespace cnforge
