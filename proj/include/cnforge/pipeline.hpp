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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cnforge/bm25.hpp"
#include "cnforge/corpus.hpp"
#include "cnforge/gateway.hpp"
#include "cnforge/knowledge.hpp"
#include "cnforge/prompt.hpp"
#include "cnforge/query.hpp"
#include "json.hpp"

namespace cnforge {

struct PipelineOptions {
  std::size_t top_articles = kDefaultTopArticles;
  SelectOptions select;
  std::size_t max_keyphrases = kDefaultMaxKeyphrases;
  TruncationPolicy truncation;
};

struct RetrieveInput {
  std::string hs;
  QueryConfig config = QueryConfig::q_hs;
  std::optional<std::string> cn;
  /// Replaces the extracted or generated keyphrases of the non-HS source
  /// (or of the HS source for q_hs).
  std::optional<std::vector<std::string>> overrides;
  std::string request_id = "retrieve";
  std::optional<std::int64_t> seed;
};

struct RetrievalResult {
  Query query;
  std::vector<ScoredArticle> articles;
  Knowledge knowledge;
  std::optional<GenerationResult> keyphrase_generation;
};

struct GenerationOutcome {
  PromptSequence prompt;
  GenerationResult result;
  Continuation cn;
};

/// Figure-1 style wiring: query construction, BM25 article retrieval,
/// sentence distillation and CN generation. Read-only after construction.
class Pipeline {
 public:
  Pipeline(ArticleSet articles, std::optional<Bm25Index> index, PipelineOptions options = {})
      : articles_(std::move(articles)), index_(std::move(index)), options_(options) {}

  static Pipeline build(ArticleSet articles, PipelineOptions options = {}, Bm25Params params = {}) {
    std::optional<Bm25Index> index;
    if (!articles.empty()) index = Bm25Index::build(articles, params);
    return Pipeline(std::move(articles), std::move(index), options);
  }

  const ArticleSet& articles() const { return articles_; }
  const std::optional<Bm25Index>& index() const { return index_; }
  const PipelineOptions& options() const { return options_; }

  Query build_query(const RetrieveInput& in, Backend& backend,
                    std::optional<GenerationResult>* kp_generation = nullptr) const {
    auto hs_kps = extract_keyphrases(in.hs, options_.max_keyphrases, KeyphraseSource::hs);
    std::optional<Keyphrases> override_kps;
    if (in.overrides) {
      Keyphrases kps;
      for (const auto& text : *in.overrides) {
        auto normalized = lowercase(normalize_whitespace(text));
        if (!normalized.empty()) kps.push_back({normalized, 1.0, KeyphraseSource::override_});
      }
      override_kps = std::move(kps);
    }
    const auto config = in.config;
    if (config == QueryConfig::q_hs) return compose_query(config, override_kps ? *override_kps : hs_kps);

    const bool wants_cn = config == QueryConfig::q_cn || config == QueryConfig::q_hs_cn;
    std::optional<Keyphrases> other = override_kps;
    if (!other && wants_cn) {
      if (!in.cn || trim(*in.cn).empty())
        throw QueryError("query config " + std::string(to_string(config)) + " requires a CN text");
      other = extract_keyphrases(*in.cn, options_.max_keyphrases, KeyphraseSource::cn);
    }
    if (!other && !wants_cn) {
      auto generated = generate_keyphrases(in, backend);
      other = parse_generated_keyphrases(parse_continuation(generated.text, kKpEnd).text);
      if (kp_generation) *kp_generation = std::move(generated);
    }
    return wants_cn ? compose_query(config, hs_kps, other, std::nullopt)
                    : compose_query(config, hs_kps, std::nullopt, other);
  }

  RetrievalResult retrieve(const RetrieveInput& in, Backend& backend) const {
    RetrievalResult out;
    out.query = build_query(in, backend, &out.keyphrase_generation);
    out.knowledge.query = out.query;
    if (!index_) return out;
    out.articles = index_->search(out.query, options_.top_articles);
    const auto pool = sentence_pool(articles_, out.articles);
    out.knowledge = select_knowledge(pool, out.query, options_.select);
    return out;
  }

  GenerationOutcome generate(std::string_view hs, std::span<const std::string> knowledge, const DecodingParams& decoding,
                             const std::string& request_id, Backend& backend) const {
    GenerationOutcome out;
    out.prompt = assemble_cn(hs, knowledge, std::nullopt, options_.truncation);
    GenerationRequest req{GenerationMode::cn, out.prompt.text, decoding, request_id};
    out.result = request_generation(req, backend);
    out.cn = parse_continuation(out.result.text, kCnEnd);
    return out;
  }

 private:
  GenerationResult generate_keyphrases(const RetrieveInput& in, Backend& backend) const {
    auto decoding = default_decoding(GenerationMode::keyphrases);
    decoding.seed = in.seed;
    const auto prompt = assemble_kp_infer(in.hs, options_.truncation);
    GenerationRequest req{GenerationMode::keyphrases, prompt.text, decoding, in.request_id + ":kp"};
    return request_generation(req, backend);
  }

  ArticleSet articles_;
  std::optional<Bm25Index> index_;
  PipelineOptions options_;
};

inline nlohmann::ordered_json to_json(std::span<const ScoredArticle> articles) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& a : articles) out.push_back({{"article_id", a.article_id}, {"score", a.score}});
  return out;
}

inline nlohmann::ordered_json to_json(const RetrievalResult& r) {
  nlohmann::ordered_json j;
  j["query"] = to_json(r.query);
  j["articles"] = to_json(r.articles);
  j["knowledge"] = to_json(r.knowledge);
  if (r.keyphrase_generation) j["keyphrase_generation"] = to_json(*r.keyphrase_generation);
  return j;
}

}  // namespace cnforge
