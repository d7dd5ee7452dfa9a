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

#include <sstream>
#include <string>
#include <vector>

#include "cnforge/corpus.hpp"
#include "cnforge/query.hpp"
#include "json.hpp"
#include "support/oracles.hpp"

using json = nlohmann::json;

namespace {

const std::string kData = CNFORGE_TEST_DATA;
const std::string kArticles = kData + "/kb_articles.jsonl";
const std::string kPairs = kData + "/kb_pairs.tsv";

oracle::Run cli(const std::string& args, const std::string& stderr_to = "/dev/null") {
  return oracle::run("env -u CNFORGE_BACKEND_URL " + oracle::quote(CNFORGE_CLI) + " " + args + " 2>" +
                     oracle::quote(stderr_to));
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

}  // namespace

TEST(Cli, IngestReportsCountsAndWritesSnapshot) {
  oracle::TempDir dir;
  const auto r = cli("ingest --corpus " + kArticles + " --pairs " + kPairs + " --out " + (dir / "snap").string());
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "articles\t12\twiki=10\tnews=2\tother=0\npairs\t10\ttrain=5\tdev=2\ttest=3\n");
  const auto again = cli("index --corpus " + (dir / "snap").string() + " --index-dir " + (dir / "idx").string());
  EXPECT_EQ(again.status, 0);
  EXPECT_EQ(again.out.rfind("docs\t12\t", 0), 0u);
}

TEST(Cli, IngestErrorExitsWithTwo) {
  oracle::TempDir dir;
  const auto err = dir / "err.txt";
  const auto r = cli("ingest --corpus " + kData + "/articles_bad.jsonl --out " + (dir / "snap").string(), err.string());
  EXPECT_EQ(r.status, 2);
  const auto message = oracle::slurp(err);
  EXPECT_EQ(message.rfind("cnforge: ingest:", 0), 0u) << message;
  EXPECT_NE(message.find("line 2"), std::string::npos) << message;
  EXPECT_FALSE(std::filesystem::exists(dir / "snap" / "articles.jsonl"));
}

TEST(Cli, UsageErrorsAreNonZero) {
  EXPECT_NE(cli("").status, 0);
  EXPECT_NE(cli("retrieve --corpus " + kArticles + " --hs x --config q_zz").status, 0);
  EXPECT_EQ(cli("retrieve --corpus " + kArticles + " --hs x --config q_cn").status, 1);
}

TEST(Cli, RetrieveAdhocWithSavedIndex) {
  oracle::TempDir dir;
  ASSERT_EQ(cli("index --corpus " + kArticles + " --index-dir " + (dir / "idx").string()).status, 0);
  const auto r = cli("retrieve --corpus " + kArticles + " --index-dir " + (dir / "idx").string() +
                     " --hs 'Islam is a disease.'");
  ASSERT_EQ(r.status, 0);
  const auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), 1u);
  const auto j = json::parse(lines[0]);
  EXPECT_EQ(j["pair_id"], "adhoc");
  EXPECT_EQ(j["query"]["keyphrases"][0]["text"], "islam");
  EXPECT_EQ(j["query"]["keyphrases"][1]["text"], "disease");
  EXPECT_EQ(j["articles"][0]["article_id"], "wiki-islam");
  EXPECT_LE(j["knowledge"]["sentences"].size(), 5u);
}

TEST(Cli, RetrieveRejectsMismatchedIndex) {
  oracle::TempDir dir;
  ASSERT_EQ(cli("index --corpus " + kData + "/articles_small.jsonl --index-dir " + (dir / "idx").string()).status, 0);
  EXPECT_EQ(cli("retrieve --corpus " + kArticles + " --index-dir " + (dir / "idx").string() + " --hs x").status, 1);
}

TEST(Cli, RetrieveOverPairsUsesFilteredSplit) {
  const auto r = cli("retrieve --corpus " + kArticles + " --pairs " + kPairs);
  ASSERT_EQ(r.status, 0);
  const auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(json::parse(lines[0])["pair_id"], "p08");
  EXPECT_EQ(json::parse(lines[1])["pair_id"], "p09");
  const auto all = cli("retrieve --corpus " + kArticles + " --pairs " + kPairs + " --min-cn-tokens 0");
  EXPECT_EQ(lines_of(all.out).size(), 3u);
}

TEST(Cli, DatasetBuildBothKinds) {
  oracle::TempDir dir;
  const auto cn = (dir / "cn.txt").string();
  ASSERT_EQ(cli("dataset-build --corpus " + kArticles + " --pairs " + kPairs + " --out " + cn).status, 0);
  const auto cn_lines = lines_of(oracle::slurp(cn));
  ASSERT_EQ(cn_lines.size(), 4u);
  for (const auto& l : cn_lines) {
    EXPECT_NE(l.find(" [HS_end_token] "), std::string::npos);
    EXPECT_EQ(l.substr(l.size() - 15), " [CN_end_token]") << l;
  }
  const auto sidecar = lines_of(oracle::slurp(cn + ".segments.jsonl"));
  ASSERT_EQ(sidecar.size(), 4u);
  EXPECT_EQ(json::parse(sidecar[0])["pair_id"], "p01");
  EXPECT_EQ(json::parse(sidecar[0])["kind"], "cn_train");

  const auto kp = (dir / "kp.txt").string();
  ASSERT_EQ(cli("dataset-build --kind kp_train --pairs " + kPairs + " --out " + kp).status, 0);
  const auto kp_lines = lines_of(oracle::slurp(kp));
  ASSERT_EQ(kp_lines.size(), 4u);
  for (const auto& l : kp_lines) EXPECT_NE(l.find(" [KP_end_token]"), std::string::npos);
}

TEST(Cli, GenerateIsReproducibleUnderSeed) {
  oracle::TempDir dir;
  std::vector<std::string> outs;
  std::vector<std::string> journals;
  for (const std::string run : {"a", "b"}) {
    const auto out = (dir / (run + ".jsonl")).string();
    ASSERT_EQ(cli("generate --corpus " + kArticles + " --pairs " + kPairs + " --seed 11 --out " + out).status, 0);
    outs.push_back(oracle::slurp(out));
    journals.push_back(oracle::slurp(out + ".journal.jsonl"));
  }
  EXPECT_EQ(outs[0], outs[1]);
  EXPECT_EQ(journals[0], journals[1]);
  const auto preds = lines_of(outs[0]);
  ASSERT_EQ(preds.size(), 2u);
  const auto p = json::parse(preds[0]);
  EXPECT_EQ(p["pair_id"], "p08");
  EXPECT_EQ(p["prediction"], "Counter: " + p["knowledge"][0].get<std::string>());
  const auto record = json::parse(lines_of(journals[0])[0]);
  EXPECT_EQ(record["started_at"], "tick-000001");
  EXPECT_EQ(record["decoding"]["seed"], 11);
  EXPECT_EQ(record["generation"]["backend_id"], "stub");
}

TEST(Cli, EvalReferencesAgainstThemselves) {
  oracle::TempDir dir;
  std::string lines;
  const auto pairs = cnforge::filter_trainable_pairs(cnforge::load_pairs(kPairs));
  for (const auto& p : pairs.in_split(cnforge::Split::test))
    lines += json{{"pair_id", p.pair_id}, {"prediction", p.cn}}.dump() + "\n";
  oracle::spit(dir / "refs.jsonl", lines);
  const auto r = cli("eval --pairs " + kPairs + " --predictions " + (dir / "refs.jsonl").string());
  ASSERT_EQ(r.status, 0);
  const auto rows = lines_of(r.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "# query_config=q_hs\tsplit=test\tn_items=2");
  EXPECT_EQ(rows[2].rfind("refs\t", 0), 0u);
  std::vector<std::string> cells;
  std::istringstream row(rows[2]);
  for (std::string c; std::getline(row, c, '\t');) cells.push_back(c);
  ASSERT_EQ(cells.size(), 10u);
  EXPECT_EQ(cells[3], "1.0000");
  EXPECT_EQ(cells[4], "1.0000");

  const auto js = cli("eval --format json --model gold --pairs " + kPairs + " --predictions " +
                      (dir / "refs.jsonl").string());
  ASSERT_EQ(js.status, 0);
  EXPECT_EQ(json::parse(js.out)["rows"][0]["model"], "gold");

  oracle::spit(dir / "short.jsonl", lines_of(lines)[0] + "\n");
  EXPECT_EQ(cli("eval --pairs " + kPairs + " --predictions " + (dir / "short.jsonl").string()).status, 1);
}

TEST(Cli, CompareConfigsTable) {
  const auto r = cli("compare-configs --corpus " + kArticles + " --pairs " + kPairs);
  ASSERT_EQ(r.status, 0);
  std::vector<std::string> table;
  for (const auto& l : lines_of(r.out))
    if (l[0] != '#') table.push_back(l);
  ASSERT_EQ(table.size(), 4u);
  EXPECT_EQ(table[0], "rank\tconfig\tmean_score\ths_relevance\tsentences_per_pair");
  EXPECT_EQ(table[1].rfind("1\t", 0), 0u);
}
