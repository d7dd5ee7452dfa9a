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
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cnforge/corpus.hpp"
#include "cnforge/error.hpp"
#include "cnforge/text.hpp"
#include "json.hpp"

namespace cnforge {

/// Which keyphrase sources feed retrieval.
enum class QueryConfig { q_hs, q_gen, q_hs_gen, q_hs_cn, q_cn };

inline constexpr std::array<QueryConfig, 5> kQueryConfigs{
    QueryConfig::q_hs, QueryConfig::q_gen, QueryConfig::q_hs_gen, QueryConfig::q_hs_cn,
    QueryConfig::q_cn};

inline std::string_view to_string(QueryConfig c) {
  switch (c) {
    case QueryConfig::q_hs: return "q_hs";
    case QueryConfig::q_gen: return "q_gen";
    case QueryConfig::q_hs_gen: return "q_hs_gen";
    case QueryConfig::q_hs_cn: return "q_hs_cn";
    case QueryConfig::q_cn: return "q_cn";
  }
  return "q_hs";
}

/// Accepts both the flag spelling ("q_hs_cn") and the display spelling ("Q_hs_cn").
inline std::optional<QueryConfig> parse_query_config(std::string_view s) {
  std::string lower(s);
  if (!lower.empty() && lower.front() == 'Q') lower.front() = 'q';
  for (auto c : kQueryConfigs)
    if (to_string(c) == lower) return c;
  return std::nullopt;
}

enum class KeyphraseSource { hs, cn, gen, override_ };

inline std::string_view to_string(KeyphraseSource s) {
  switch (s) {
    case KeyphraseSource::hs: return "hs";
    case KeyphraseSource::cn: return "cn";
    case KeyphraseSource::gen: return "gen";
    case KeyphraseSource::override_: return "override";
  }
  return "hs";
}

struct Keyphrase {
  std::string text;
  double weight = 1.0;
  KeyphraseSource source = KeyphraseSource::hs;

  friend bool operator==(const Keyphrase&, const Keyphrase&) = default;
};

using Keyphrases = std::vector<Keyphrase>;

struct Query {
  QueryConfig config = QueryConfig::q_hs;
  Keyphrases keyphrases;

  friend bool operator==(const Query&, const Query&) = default;
};

class QueryError : public Error {
 public:
  explicit QueryError(const std::string& message) : Error("query", message) {}
};

/// Retrieval terms of a query: the tokenized keyphrases concatenated in
/// query order, duplicates kept.
inline Tokens query_terms(const Query& query) {
  Tokens terms;
  for (const auto& kp : query.keyphrases) {
    for (auto& t : tokenize(kp.text)) terms.push_back(std::move(t));
  }
  return terms;
}

inline constexpr std::size_t kDefaultMaxKeyphrases = 5;
inline constexpr std::size_t kMaxPhraseTokens = 3;

/// Statistical keyphrase extraction over candidate n-grams (n <= 3) that
/// neither start nor end with a stopword and never cross a sentence
/// boundary. Each candidate is weighted
///
///   frequency * n * (1 + 1 / (1 + first_token_index))
///
/// and the list is ranked by weight, then earliest occurrence, then longer
/// phrase, then text.
inline Keyphrases extract_keyphrases(std::string_view text,
                                     std::size_t max_k = kDefaultMaxKeyphrases,
                                     KeyphraseSource source = KeyphraseSource::hs,
                                     const WordList& stopwords = default_stopwords()) {
  if (max_k == 0) throw QueryError("max_k must be positive");
  struct Candidate {
    std::size_t frequency = 0;
    std::size_t first = 0;
    std::size_t length = 0;
  };
  std::map<std::string, Candidate> candidates;
  std::size_t offset = 0;
  for (const auto& sentence : segment_sentences(text)) {
    const Tokens tokens = tokenize(sentence);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (stopwords.contains(tokens[i])) continue;
      std::string phrase;
      for (std::size_t n = 1; n <= kMaxPhraseTokens && i + n <= tokens.size(); ++n) {
        if (n > 1) phrase.push_back(' ');
        phrase += tokens[i + n - 1];
        if (stopwords.contains(tokens[i + n - 1])) continue;
        auto [it, fresh] = candidates.try_emplace(phrase, Candidate{0, offset + i, n});
        ++it->second.frequency;
      }
    }
    offset += tokens.size();
  }

  struct Ranked {
    Keyphrase kp;
    std::size_t first;
    std::size_t length;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(candidates.size());
  for (const auto& [phrase, c] : candidates) {
    const double position_boost = 1.0 + 1.0 / (1.0 + static_cast<double>(c.first));
    const double weight = static_cast<double>(c.frequency) * static_cast<double>(c.length) * position_boost;
    ranked.push_back({Keyphrase{phrase, weight, source}, c.first, c.length});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.kp.weight != b.kp.weight) return a.kp.weight > b.kp.weight;
    if (a.first != b.first) return a.first < b.first;
    if (a.length != b.length) return a.length > b.length;
    return a.kp.text < b.kp.text;
  });
  Keyphrases out;
  for (std::size_t i = 0; i < ranked.size() && i < max_k; ++i) out.push_back(std::move(ranked[i].kp));
  return out;
}

/// Parses a backend reply such as "islamic law, god, christians".
inline Keyphrases parse_generated_keyphrases(std::string_view text) {
  Keyphrases out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    auto piece = trim(text.substr(start, comma - start));
    if (!piece.empty()) out.push_back({lowercase(piece), 1.0, KeyphraseSource::gen});
    start = comma + 1;
  }
  return out;
}

/// Builds the query for `config`. Union configs put the HS keyphrases first,
/// then the other source; every config drops exact-text repeats while
/// keeping first occurrences.
inline Query compose_query(QueryConfig config, const Keyphrases& hs_kps,
                           const std::optional<Keyphrases>& cn_kps = std::nullopt,
                           const std::optional<Keyphrases>& gen_kps = std::nullopt) {
  auto require = [config](const std::optional<Keyphrases>& kps, std::string_view what) -> const Keyphrases& {
    if (!kps || kps->empty()) {
      throw QueryError("query config " + std::string(to_string(config)) + " requires " + std::string(what) +
                       " keyphrases");
    }
    return *kps;
  };
  std::vector<const Keyphrases*> sources;
  switch (config) {
    case QueryConfig::q_hs:
      if (hs_kps.empty()) throw QueryError("query config q_hs requires hs keyphrases");
      sources = {&hs_kps};
      break;
    case QueryConfig::q_cn: sources = {&require(cn_kps, "cn")}; break;
    case QueryConfig::q_gen: sources = {&require(gen_kps, "generated")}; break;
    case QueryConfig::q_hs_cn: sources = {&hs_kps, &require(cn_kps, "cn")}; break;
    case QueryConfig::q_hs_gen: sources = {&hs_kps, &require(gen_kps, "generated")}; break;
  }
  Query query{config, {}};
  std::unordered_set<std::string> seen;
  for (const auto* kps : sources) {
    for (const auto& kp : *kps) {
      if (seen.insert(kp.text).second) query.keyphrases.push_back(kp);
    }
  }
  return query;
}

inline constexpr std::size_t kMinTrainableCnTokens = 10;

/// Keeps the pairs whose CN has at least `min_tokens` tokens.
inline PairSet filter_trainable_pairs(const PairSet& pairs, std::size_t min_tokens = kMinTrainableCnTokens) {
  std::vector<HsCnPair> kept;
  for (const auto& p : pairs.items()) {
    if (tokenize(p.cn).size() >= min_tokens) kept.push_back(p);
  }
  return PairSet(std::move(kept));
}

inline nlohmann::ordered_json to_json(const Query& q) {
  nlohmann::ordered_json kps = nlohmann::ordered_json::array();
  for (const auto& kp : q.keyphrases) {
    kps.push_back({{"text", kp.text}, {"weight", kp.weight}, {"source", to_string(kp.source)}});
  }
  return {{"config", to_string(q.config)}, {"keyphrases", std::move(kps)}};
}

/// Accepts keyphrases either as plain strings or as {"text","weight","source"}.
inline Query query_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw QueryError("query must be a JSON object");
  auto config = parse_query_config(j.value("config", std::string()));
  if (!config) throw QueryError("unknown query config");
  Query q{*config, {}};
  for (const auto& item : j.value("keyphrases", nlohmann::json::array())) {
    if (item.is_string()) {
      q.keyphrases.push_back({item.get<std::string>(), 1.0, KeyphraseSource::override_});
      continue;
    }
    Keyphrase kp{item.value("text", std::string()), item.value("weight", 1.0), KeyphraseSource::hs};
    const auto src = item.value("source", std::string("hs"));
    for (auto s : {KeyphraseSource::hs, KeyphraseSource::cn, KeyphraseSource::gen, KeyphraseSource::override_})
      if (to_string(s) == src) kp.source = s;
    if (kp.text.empty()) throw QueryError("empty keyphrase text");
    q.keyphrases.push_back(std::move(kp));
  }
  return q;
}

}  // namespace cnforge
