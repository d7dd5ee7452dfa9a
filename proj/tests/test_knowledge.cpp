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

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "cnforge/bm25.hpp"
#include "cnforge/knowledge.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace cnforge;

namespace {

Sentence sent(const std::string& article, std::size_t idx, const std::string& text) {
  return {article, idx, text, tokenize(text)};
}

Query q_of(std::initializer_list<const char*> words) {
  Query q{QueryConfig::q_hs, {}};
  for (const char* w : words) q.keyphrases.push_back({w, 1.0, KeyphraseSource::hs});
  return q;
}

}  // namespace

TEST(SentenceScore, Identity) {
  const auto s = sent("a", 0, "islam is a disease");
  EXPECT_EQ(score_sentence(s, s.tokens), 1.0);
}

TEST(SentenceScore, HandValue) {
  const auto s = sent("a", 0, "the cat sat");
  const Tokens q{"the", "cat", "ate"};
  EXPECT_EQ(oracle::lcs(s.tokens, q), 2u);
  EXPECT_NEAR(score_sentence(s, q), 2.0 / 3.0, 1e-15);
}

TEST(SentenceScore, Disjoint) {
  const Tokens q{"dog"};
  EXPECT_EQ(score_sentence(sent("a", 0, "the cat sat"), q), 0.0);
  EXPECT_EQ(score_sentence(sent("a", 0, "the cat sat"), Tokens{}), 0.0);
}

TEST(SentenceScore, MatchesSubsequenceOracle) {
  oracle::Gen gen(3);
  for (int i = 0; i < 500; ++i) {
    const auto a = gen.tokens(0, 12);
    const auto b = gen.tokens(0, 12);
    const Sentence s{"x", 0, join(a), a};
    ASSERT_NEAR(score_sentence(s, b), oracle::rouge_l(a, b), 1e-12);
    ASSERT_EQ(score_sentence(s, b), rouge_l_f1(a, b));
  }
}

TEST(Select, FewerCandidatesThanK) {
  const std::vector<ArticleSentences> pool{
      {"a", 0, {sent("a", 0, "islam is peace"), sent("a", 1, "many people pray daily")}},
      {"b", 1, {sent("b", 0, "islam and disease are unrelated")}}};
  const auto kn = select_knowledge(pool, q_of({"islam", "disease"}));
  ASSERT_EQ(kn.sentences.size(), 3u);
  for (std::size_t i = 1; i < kn.sentences.size(); ++i)
    EXPECT_GE(kn.sentences[i - 1].score, kn.sentences[i].score);
  EXPECT_EQ(kn.sentences[0].sentence.text, "islam and disease are unrelated");
  EXPECT_EQ(kn.article_pool, (std::vector<std::string>{"a", "b"}));
}

TEST(Select, FullQueryInOrderRanksFirst) {
  const std::vector<ArticleSentences> pool{
      {"a", 0, {sent("a", 0, "disease spreads fast in winter"), sent("a", 1, "tolerance matters to christianity")}},
      {"b", 1,
       {sent("b", 0, "we value tolerance"), sent("b", 1, "tolerance christianity and islam share roots"),
        sent("b", 2, "islam tolerance christianity")}}};
  const auto q = q_of({"tolerance", "christianity", "islam"});
  const auto kn = select_knowledge(pool, q);
  EXPECT_EQ(kn.sentences[0].sentence.article_id, "b");
  EXPECT_EQ(kn.sentences[0].sentence.sent_index, 1u);
}

TEST(Select, EqualScoresFollowArticleRank) {
  const std::vector<ArticleSentences> pool{{"late", 1, {sent("late", 0, "islam is old")}},
                                           {"early", 0, {sent("early", 3, "islam is old")}}};
  const auto kn = select_knowledge(pool, q_of({"islam"}));
  ASSERT_EQ(kn.sentences.size(), 2u);
  EXPECT_EQ(kn.sentences[0].sentence.article_id, "early");
  EXPECT_EQ(kn.article_pool, (std::vector<std::string>{"early", "late"}));
}

TEST(Select, EqualScoresInOneArticleFollowSentenceIndex) {
  const std::vector<ArticleSentences> pool{
      {"a", 0, {sent("a", 4, "islam is old"), sent("a", 2, "islam is old"), sent("a", 9, "islam is old")}}};
  const auto kn = select_knowledge(pool, q_of({"islam"}), {2, 3});
  ASSERT_EQ(kn.sentences.size(), 2u);
  EXPECT_EQ(kn.sentences[0].sentence.sent_index, 2u);
  EXPECT_EQ(kn.sentences[1].sentence.sent_index, 4u);
}

TEST(Select, ShortSentencesExcluded) {
  const std::vector<ArticleSentences> pool{{"a", 0, {sent("a", 0, "Islam."), sent("a", 1, "islam is old")}}};
  const auto kn = select_knowledge(pool, q_of({"islam"}));
  ASSERT_EQ(kn.sentences.size(), 1u);
  EXPECT_EQ(kn.sentences[0].sentence.sent_index, 1u);
  EXPECT_EQ(select_knowledge(pool, q_of({"islam"}), {5, 0}).sentences.size(), 2u);
}

TEST(Select, ZeroScoresStillFillTheList) {
  const std::vector<ArticleSentences> pool{{"a", 0, {sent("a", 0, "nothing shared here"), sent("a", 1, "islam is old")}}};
  const auto kn = select_knowledge(pool, q_of({"islam"}));
  ASSERT_EQ(kn.sentences.size(), 2u);
  EXPECT_EQ(kn.sentences[1].score, 0.0);
}

TEST(Select, EmptyPool) {
  const auto kn = select_knowledge({}, q_of({"islam"}));
  EXPECT_TRUE(kn.sentences.empty());
  EXPECT_TRUE(kn.article_pool.empty());
  EXPECT_THROW(select_knowledge({}, q_of({"islam"}), {0, 3}), QueryError);
}

TEST(Select, SeededCorpusTopFiveFromArticlePool) {
  oracle::Gen gen(99);
  const auto articles = fixtures::sentence_corpus(gen, 30, 10);
  const auto idx = Bm25Index::build(articles);
  for (int trial = 0; trial < 20; ++trial) {
    Query query{QueryConfig::q_hs, {}};
    for (const auto& w : gen.tokens(2, 4, 15)) query.keyphrases.push_back({w, 1.0, KeyphraseSource::hs});
    const auto ranked = idx.search(query, 25);
    const auto pool = sentence_pool(articles, ranked);
    const auto kn = select_knowledge(pool, query);
    ASSERT_EQ(kn.sentences.size(), 5u);
    std::vector<double> all;
    for (const auto& a : pool)
      for (const auto& s : a.sentences) all.push_back(oracle::rouge_l(s.tokens, query_terms(query)));
    std::sort(all.rbegin(), all.rend());
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_NEAR(kn.sentences[i].score, all[i], 1e-12);
      EXPECT_NEAR(kn.sentences[i].score, oracle::rouge_l(kn.sentences[i].sentence.tokens, query_terms(query)), 1e-12);
      EXPECT_LT(kn.sentences[i].article_rank, 25u);
    }
  }
}

TEST(SentencePool, UnknownArticle) {
  const ArticleSet articles({{"a", "", "Body one.", Source::wiki}});
  const std::vector<ScoredArticle> ranked{{"missing", 1.0}};
  EXPECT_THROW(sentence_pool(articles, ranked), Error);
}

TEST(KnowledgeJson, RoundTripRecomputesTokens) {
  const std::vector<ArticleSentences> pool{{"a", 0, {sent("a", 0, "Islam is old."), sent("a", 1, "It is a faith.")}}};
  const auto kn = select_knowledge(pool, q_of({"islam"}));
  const auto back = knowledge_from_json(nlohmann::json::parse(to_json(kn).dump()));
  ASSERT_EQ(back.sentences.size(), kn.sentences.size());
  for (std::size_t i = 0; i < kn.sentences.size(); ++i) {
    EXPECT_EQ(back.sentences[i].sentence, kn.sentences[i].sentence);
    EXPECT_EQ(back.sentences[i].score, kn.sentences[i].score);
  }
  EXPECT_EQ(back.query, kn.query);
  EXPECT_EQ(back.texts(), kn.texts());
  const auto plain = knowledge_from_json(nlohmann::json::parse(R"({"sentences":["Free text here."]})"));
  EXPECT_EQ(plain.sentences[0].sentence.tokens, (Tokens{"free", "text", "here"}));
}
