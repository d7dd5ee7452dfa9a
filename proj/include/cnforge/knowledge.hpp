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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cnforge/bm25.hpp"
#include "cnforge/corpus.hpp"
#include "cnforge/metrics.hpp"
#include "cnforge/query.hpp"
#include "json.hpp"

namespace cnforge {

/// The sentences of one retrieved article; `rank` is its 0-based position
/// in the search results.
struct ArticleSentences {
  std::string article_id;
  std::size_t rank = 0;
  std::vector<Sentence> sentences;
};

struct ScoredSentence {
  Sentence sentence;
  double score = 0.0;
  std::size_t article_rank = 0;
};

struct Knowledge {
  std::vector<ScoredSentence> sentences;
  Query query;
  std::vector<std::string> article_pool;

  std::vector<std::string> texts() const {
    std::vector<std::string> out;
    for (const auto& s : sentences) out.push_back(s.sentence.text);
    return out;
  }
};

inline constexpr std::size_t kDefaultTopSentences = 5;

struct SelectOptions {
  std::size_t top_sentences = kDefaultTopSentences;
  /// Sentences with fewer tokens never become knowledge. 0 admits all.
  std::size_t min_sentence_tokens = 3;
};

inline double score_sentence(const Sentence& sentence, const Tokens& query_tokens) {
  return rouge_l_f1(sentence.tokens, query_tokens);
}

/// ROUGE-L F1 of the sentence against the query's concatenated keyphrase tokens.
inline double score_sentence(const Sentence& sentence, const Query& query) {
  return score_sentence(sentence, query_terms(query));
}

/// Keeps the global top sentences of the pool by score; ties go to the
/// better-ranked article, then the earlier sentence. No per-article cap.
inline Knowledge select_knowledge(std::span<const ArticleSentences> pool, const Query& query,
                                  SelectOptions options = {}) {
  if (options.top_sentences == 0) throw QueryError("top_sentences must be positive");
  const Tokens terms = query_terms(query);
  Knowledge kn{{}, query, {}};
  std::vector<ScoredSentence> candidates;
  std::vector<std::pair<std::size_t, std::string>> ranked_ids;
  for (const auto& article : pool) {
    ranked_ids.emplace_back(article.rank, article.article_id);
    for (const auto& s : article.sentences) {
      if (s.tokens.size() < options.min_sentence_tokens) continue;
      candidates.push_back({s, score_sentence(s, terms), article.rank});
    }
  }
  auto better = [](const ScoredSentence& a, const ScoredSentence& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.article_rank != b.article_rank) return a.article_rank < b.article_rank;
    return a.sentence.sent_index < b.sentence.sent_index;
  };
  const auto n = std::min(options.top_sentences, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n), candidates.end(),
                    better);
  candidates.resize(n);
  kn.sentences = std::move(candidates);
  std::sort(ranked_ids.begin(), ranked_ids.end());
  for (auto& [rank, id] : ranked_ids) kn.article_pool.push_back(std::move(id));
  return kn;
}

/// Segments every retrieved article into the candidate pool, keeping search rank.
inline std::vector<ArticleSentences> sentence_pool(const ArticleSet& articles,
                                                   std::span<const ScoredArticle> ranked) {
  std::vector<ArticleSentences> pool;
  pool.reserve(ranked.size());
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const Article* a = articles.find(ranked[r].article_id);
    if (!a) throw Error("retrieve", "retrieved article " + ranked[r].article_id + " is not in the corpus");
    pool.push_back({a->article_id, r, sentences_of(*a)});
  }
  return pool;
}

inline nlohmann::ordered_json to_json(const Knowledge& kn) {
  nlohmann::ordered_json sentences = nlohmann::ordered_json::array();
  for (const auto& s : kn.sentences) {
    sentences.push_back({{"article_id", s.sentence.article_id},
                         {"sent_index", s.sentence.sent_index},
                         {"article_rank", s.article_rank},
                         {"score", s.score},
                         {"text", s.sentence.text}});
  }
  return {{"query", to_json(kn.query)}, {"article_pool", kn.article_pool}, {"sentences", std::move(sentences)}};
}

/// Restores knowledge from its JSON form; sentence tokens are recomputed.
inline Knowledge knowledge_from_json(const nlohmann::json& j) {
  Knowledge kn;
  if (j.contains("query")) kn.query = query_from_json(j.at("query"));
  kn.article_pool = j.value("article_pool", std::vector<std::string>{});
  for (const auto& s : j.value("sentences", nlohmann::json::array())) {
    ScoredSentence ss;
    if (s.is_string()) {
      ss.sentence.text = s.get<std::string>();
    } else {
      ss.sentence.article_id = s.value("article_id", std::string());
      ss.sentence.sent_index = s.value("sent_index", std::size_t{0});
      ss.sentence.text = s.value("text", std::string());
      ss.score = s.value("score", 0.0);
      ss.article_rank = s.value("article_rank", std::size_t{0});
    }
    ss.sentence.tokens = tokenize(ss.sentence.text);
    kn.sentences.push_back(std::move(ss));
  }
  return kn;
}

}  // namespace cnforge
