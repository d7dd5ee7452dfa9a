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

// Seeded synthetic corpora shared by the unit tests and the acceptance gate.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cnforge/corpus.hpp"
#include "support/oracles.hpp"

namespace fixtures {

inline std::string doc_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "d%03zu", i);
  return buf;
}

/// `n` documents of 5..30 tokens over a `vocab`-word vocabulary. Every
/// seventh document repeats its predecessor so score ties occur.
inline std::vector<oracle::Doc> random_docs(oracle::Gen& gen, std::size_t n, std::size_t vocab = 12) {
  std::vector<oracle::Doc> docs;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 7 == 6) {
      docs.push_back({doc_id(i), docs.back().tokens});
    } else {
      docs.push_back({doc_id(i), gen.tokens(5, 30, vocab)});
    }
  }
  return docs;
}

inline cnforge::ArticleSet to_articles(const std::vector<oracle::Doc>& docs) {
  std::vector<cnforge::Article> items;
  for (const auto& d : docs) items.push_back({d.id, "", cnforge::join(d.tokens), cnforge::Source::wiki});
  return cnforge::ArticleSet(std::move(items));
}

/// A sentence of 3..9 words that segments on its own: capitalized first word,
/// trailing period.
inline std::string random_sentence(oracle::Gen& gen, std::size_t vocab) {
  auto words = gen.tokens(3, 9, vocab);
  words[0][0] = 'W';
  return cnforge::join(words) + ".";
}

/// `n_articles` articles of `per_article` sentences each.
inline cnforge::ArticleSet sentence_corpus(oracle::Gen& gen, std::size_t n_articles, std::size_t per_article,
                                           std::size_t vocab = 15) {
  std::vector<cnforge::Article> items;
  for (std::size_t i = 0; i < n_articles; ++i) {
    std::string body;
    for (std::size_t s = 0; s < per_article; ++s) body += (s ? " " : "") + random_sentence(gen, vocab);
    items.push_back({doc_id(i), "", body, cnforge::Source::wiki});
  }
  return cnforge::ArticleSet(std::move(items));
}

}  // namespace fixtures
