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

#include "cnforge/gateway.hpp"
#include "cnforge/prompt.hpp"
#include "support/oracles.hpp"

using namespace cnforge;

namespace {

std::string words(std::size_t n, const char* stem = "w") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + std::string(stem) + std::to_string(i);
  return out;
}

std::string random_text(oracle::Gen& gen, std::size_t max_words) {
  static const std::vector<std::string> pool = {"islam", "Tolerance,", "[x]", "\"quoted\"", "end.", "¿qué?",
                                                "3M", "-", "don't", "Ωmega", "(a)", "law;", "Why?"};
  std::string out;
  const auto n = gen.uniform(0, max_words);
  for (std::size_t i = 0; i < n; ++i)
    out += std::string(gen.uniform(0, 3) ? " " : "\t ") + pool[gen.uniform(0, pool.size() - 1)];
  return out;
}

}  // namespace

TEST(AssembleCn, TrainingFormat) {
  const std::vector<std::string> kn{"K1", "K2"};
  const auto seq = assemble_cn("H", kn, std::string("C"));
  EXPECT_EQ(seq.text, "H [HS_end_token] K1 K2 [KN_end_token] C [CN_end_token]");
  EXPECT_EQ(seq.kind, PromptKind::cn_train);
  EXPECT_EQ(seq.segment("kn"), "K1 K2");
  EXPECT_EQ(seq.segment("cn"), "C");
}

TEST(AssembleCn, InferenceEndsAtKnowledgeToken) {
  const std::vector<std::string> kn{"K1"};
  const auto seq = assemble_cn("H", kn);
  EXPECT_EQ(seq.text, "H [HS_end_token] K1 [KN_end_token]");
  EXPECT_EQ(seq.kind, PromptKind::cn_infer);
}

TEST(AssembleCn, EmptyKnowledge) {
  const auto seq = assemble_cn("H", {});
  EXPECT_EQ(seq.text, "H [HS_end_token] [KN_end_token]");
  EXPECT_EQ(seq.segment("kn"), "");
  EXPECT_EQ(parse_prompt(seq.text, PromptKind::cn_infer).at("kn"), "");
}

TEST(AssembleCn, HateSpeechTruncatedToSeventyTokens) {
  const auto seq = assemble_cn(words(100), {});
  EXPECT_EQ(seq.segment("hs"), words(70));
  EXPECT_EQ(seq.segments[0].tokens, 70u);
}

TEST(AssembleCn, KnowledgeTruncatedTo256Tokens) {
  const std::vector<std::string> kn{words(200, "a"), words(200, "b")};
  const auto seq = assemble_cn("H", kn, std::string(words(300, "c")));
  EXPECT_EQ(tokenize(seq.segment("kn")).size(), 256u);
  EXPECT_EQ(tokenize(seq.segment("cn")).size(), 256u);
  EXPECT_EQ(seq.segment("kn"), words(200, "a") + " " + words(56, "b"));
}

TEST(AssembleCn, RejectsBoundaryLiterals) {
  try {
    assemble_cn("H [KN_end_token] x", {});
    FAIL();
  } catch (const PromptError& e) {
    EXPECT_EQ(e.token(), "[KN_end_token]");
    EXPECT_EQ(e.stage(), "prompt");
  }
  const std::vector<std::string> kn{"k [CN_end_token]"};
  EXPECT_THROW(assemble_cn("H", kn), PromptError);
  EXPECT_THROW(assemble_cn("   ", {}), PromptError);
}

TEST(AssembleKp, CommaJoined) {
  const std::vector<std::string> kps{"a", "b"};
  EXPECT_EQ(assemble_kp("H", kps).text, "H [HS_end_token] a, b [KP_end_token]");
  const std::vector<std::string> one{"islamic law"};
  EXPECT_EQ(assemble_kp("H", one).text, "H [HS_end_token] islamic law [KP_end_token]");
}

TEST(AssembleKp, Errors) {
  EXPECT_THROW(assemble_kp("H", {}), PromptError);
  const std::vector<std::string> comma{"a, b"};
  EXPECT_THROW(assemble_kp("H", comma), PromptError);
  const std::vector<std::string> blank{" "};
  EXPECT_THROW(assemble_kp("H", blank), PromptError);
}

TEST(AssembleKp, InferencePrompt) {
  EXPECT_EQ(assemble_kp_infer("Islam is a disease.").text, "Islam is a disease. [HS_end_token]");
}

TEST(ParsePrompt, DuplicatedTokenIsNamed) {
  try {
    parse_prompt("H [HS_end_token] x [HS_end_token] K [KN_end_token]", PromptKind::cn_infer);
    FAIL();
  } catch (const PromptError& e) {
    EXPECT_EQ(e.token(), "[HS_end_token]");
  }
}

TEST(ParsePrompt, MissingAndMisplacedTokens) {
  try {
    parse_prompt("H [HS_end_token] K", PromptKind::cn_infer);
    FAIL();
  } catch (const PromptError& e) {
    EXPECT_EQ(e.token(), "[KN_end_token]");
  }
  try {
    parse_prompt("K [KN_end_token] H [HS_end_token]", PromptKind::cn_infer);
    FAIL();
  } catch (const PromptError& e) {
    EXPECT_NE(std::string(e.what()).find("out of order"), std::string::npos);
  }
  EXPECT_THROW(parse_prompt("H [HS_end_token] K [KP_end_token]", PromptKind::cn_infer), PromptError);
  EXPECT_THROW(parse_prompt("H [HS_end_token] K [KN_end_token] extra", PromptKind::cn_infer), PromptError);
}

TEST(ParsePrompt, UnterminatedGeneratorOutput) {
  // A stub reply with its end token cut off, appended to the prompt it answered.
  const std::vector<std::string> kn{"Tolerance is central. Charity too."};
  const auto prompt = assemble_cn("Islam is a disease.", kn);
  StubBackend stub;
  const auto reply = stub.generate({GenerationMode::cn, prompt.text, DecodingParams::nucleus(), "r1"}).text;
  EXPECT_EQ(reply, "Counter: Tolerance is central. [CN_end_token]");
  const std::string cut = reply.substr(0, reply.find(" [CN_end_token]"));
  const auto parsed = parse_prompt(prompt.text + " " + cut, PromptKind::cn_train);
  EXPECT_TRUE(parsed.unterminated);
  EXPECT_EQ(parsed.at("cn"), "Counter: Tolerance is central.");
  const auto whole = parse_prompt(prompt.text + " " + reply, PromptKind::cn_train);
  EXPECT_FALSE(whole.unterminated);
  EXPECT_EQ(whole.at("cn"), "Counter: Tolerance is central.");
}

TEST(ParseContinuation, CutsAtEndToken) {
  const auto c = parse_continuation("Counter: x. [CN_end_token] trailing junk", kCnEnd);
  EXPECT_TRUE(c.terminated);
  EXPECT_EQ(c.text, "Counter: x.");
  const auto u = parse_continuation("Counter: x", kCnEnd);
  EXPECT_FALSE(u.terminated);
  EXPECT_EQ(u.text, "Counter: x");
}

TEST(PromptProperties, ParseInvertsAssemble) {
  oracle::Gen gen(17);
  TruncationPolicy small{5, 12, 9};
  for (int trial = 0; trial < 500; ++trial) {
    const auto policy = trial % 2 ? small : TruncationPolicy{};
    std::string hs = random_text(gen, 20);
    if (trim(hs).empty()) hs = "h";
    std::vector<std::string> kn;
    for (std::size_t i = gen.uniform(0, 4); i > 0; --i) kn.push_back(random_text(gen, 8));
    const auto cn = random_text(gen, 15);
    std::string joined;
    for (const auto& k : kn) {
      const auto n = normalize_whitespace(k);
      if (!n.empty()) joined += (joined.empty() ? "" : " ") + n;
    }

    const auto train = assemble_cn(hs, kn, cn, policy);
    const auto parsed = parse_prompt(train.text, PromptKind::cn_train);
    ASSERT_EQ(parsed.at("hs"), truncate_tokens(hs, policy.hs_max));
    ASSERT_EQ(parsed.at("kn"), truncate_tokens(joined, policy.kn_max));
    ASSERT_EQ(parsed.at("cn"), truncate_tokens(cn, policy.cn_max));
    ASSERT_FALSE(parsed.unterminated);
    for (const auto& s : train.segments)
      ASSERT_EQ(train.segment(s.name), parsed.at(s.name));

    const auto infer = assemble_cn(hs, kn, std::nullopt, policy);
    ASSERT_EQ(parse_prompt(infer.text, PromptKind::cn_infer).segments,
              (std::map<std::string, std::string>{{"hs", parsed.at("hs")}, {"kn", parsed.at("kn")}}));

    std::vector<std::string> kps;
    for (const auto& w : tokenize(hs)) {
      kps.push_back(w);
      if (kps.size() == 3) break;
    }
    if (kps.empty()) kps.push_back("k");
    const auto kp = assemble_kp(hs, kps, policy);
    const auto kp_parsed = parse_prompt(kp.text, PromptKind::kp_train);
    ASSERT_EQ(kp_parsed.at("hs"), parsed.at("hs"));
    std::string kp_joined;
    for (const auto& k : kps) kp_joined += (kp_joined.empty() ? "" : ", ") + k;
    ASSERT_EQ(kp_parsed.at("kp"), truncate_tokens(kp_joined, policy.cn_max));
  }
}

TEST(PromptProperties, TruncationIsATokenPrefix) {
  oracle::Gen gen(23);
  for (int trial = 0; trial < 300; ++trial) {
    const auto text = random_text(gen, 30);
    const auto limit = gen.uniform(1, 20);
    const auto full = tokenize(text);
    const auto cut = tokenize(truncate_tokens(text, limit));
    ASSERT_EQ(cut.size(), std::min(limit, full.size()));
    ASSERT_TRUE(std::equal(cut.begin(), cut.end(), full.begin()));
  }
}

TEST(PromptJson, SidecarSegments) {
  const std::vector<std::string> kn{"K1"};
  const auto seq = assemble_cn("H", kn);
  const auto j = to_json(seq);
  EXPECT_EQ(j["kind"], "cn_infer");
  EXPECT_EQ(j["segments"]["kn"]["begin"], seq.text.find("K1"));
  EXPECT_EQ(j["segments"]["hs"]["tokens"], 1);
}
