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

// cnforge: batch driver for knowledge-grounded counter-narrative pipelines.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cnforge.hpp"

namespace fs = std::filesystem;
using cnforge::Error;

namespace {

struct Options {
  std::string corpus;
  std::string index_dir;
  std::string pairs;
  std::string config = "q_hs";
  std::string backend_url;
  std::optional<std::int64_t> seed;
  std::size_t top_articles = cnforge::kDefaultTopArticles;
  std::size_t top_sentences = cnforge::kDefaultTopSentences;
  std::size_t min_sentence_tokens = 3;
  std::size_t max_keyphrases = cnforge::kDefaultMaxKeyphrases;
  std::size_t min_cn_tokens = cnforge::kMinTrainableCnTokens;
  std::string split = "test";
  std::string out;
};

/// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw Error("output", "cannot write " + path);
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

cnforge::QueryConfig config_of(const std::string& name) {
  auto c = cnforge::parse_query_config(name);
  if (!c) throw Error("query", "unknown query config " + name);
  return *c;
}

cnforge::Split split_of(const std::string& name) {
  auto s = cnforge::parse_split(name);
  if (!s) throw Error("ingest", "unknown split " + name);
  return *s;
}

cnforge::PipelineOptions pipeline_options(const Options& o) {
  cnforge::PipelineOptions p;
  p.top_articles = o.top_articles;
  p.select.top_sentences = o.top_sentences;
  p.select.min_sentence_tokens = o.min_sentence_tokens;
  p.max_keyphrases = o.max_keyphrases;
  return p;
}

void require(const std::string& value, const char* flag, const char* stage) {
  if (value.empty()) throw Error(stage, std::string(flag) + " is required");
}

/// Loads the corpus and either the saved index or an in-memory build.
cnforge::Pipeline load_pipeline(const Options& o) {
  require(o.corpus, "--corpus", "ingest");
  auto articles = cnforge::load_articles(o.corpus);
  std::optional<cnforge::Bm25Index> index;
  if (!o.index_dir.empty() && fs::exists(fs::path(o.index_dir) / "manifest.json")) {
    index = cnforge::Bm25Index::load(o.index_dir);
    bool matches = index->n_docs() == articles.size();
    for (const auto& a : articles.items()) matches = matches && index->doc_of(a.article_id).has_value();
    if (!matches) throw Error("index", "index in " + o.index_dir + " does not match corpus " + o.corpus);
  } else if (!articles.empty()) {
    index = cnforge::Bm25Index::build(articles);
  }
  return cnforge::Pipeline(std::move(articles), std::move(index), pipeline_options(o));
}

cnforge::PairSet load_filtered_pairs(const Options& o) {
  require(o.pairs, "--pairs", "ingest");
  auto pairs = cnforge::load_pairs(o.pairs);
  return o.min_cn_tokens > 0 ? cnforge::filter_trainable_pairs(pairs, o.min_cn_tokens) : pairs;
}

std::unique_ptr<cnforge::Backend> backend_of(const Options& o) {
  return cnforge::make_backend(o.backend_url.empty() ? std::nullopt : std::optional<std::string>(o.backend_url));
}

cnforge::RetrieveInput retrieve_input(const cnforge::HsCnPair& pair, cnforge::QueryConfig config, const Options& o) {
  cnforge::RetrieveInput in;
  in.hs = pair.hs;
  in.cn = pair.cn;
  in.config = config;
  in.request_id = pair.pair_id;
  in.seed = o.seed;
  return in;
}

int run_ingest(const Options& o) {
  require(o.corpus, "--corpus", "ingest");
  require(o.out, "--out", "ingest");
  auto articles = cnforge::load_articles(o.corpus);
  cnforge::PairSet pairs;
  if (!o.pairs.empty()) pairs = cnforge::load_pairs(o.pairs);
  cnforge::write_snapshot(o.out, articles, pairs);
  std::cout << "articles\t" << articles.size() << "\twiki=" << articles.count(cnforge::Source::wiki)
            << "\tnews=" << articles.count(cnforge::Source::news) << "\tother=" << articles.count(cnforge::Source::other)
            << "\n";
  std::cout << "pairs\t" << pairs.size() << "\ttrain=" << pairs.count(cnforge::Split::train)
            << "\tdev=" << pairs.count(cnforge::Split::dev) << "\ttest=" << pairs.count(cnforge::Split::test) << "\n";
  return 0;
}

int run_index(const Options& o) {
  require(o.corpus, "--corpus", "ingest");
  require(o.index_dir, "--index-dir", "index");
  const auto articles = cnforge::load_articles(o.corpus);
  const auto index = cnforge::Bm25Index::build(articles);
  index.save(o.index_dir);
  std::cout << "docs\t" << index.n_docs() << "\tterms\t" << index.n_terms() << "\tavg_doc_len\t"
            << index.avg_doc_len() << "\n";
  return 0;
}

int run_retrieve(const Options& o, const std::string& hs, const std::vector<std::string>& overrides) {
  const auto pipeline = load_pipeline(o);
  auto backend = backend_of(o);
  const auto config = config_of(o.config);
  Output out(o.out);
  auto emit = [&](const std::string& pair_id, const cnforge::RetrieveInput& in) {
    auto j = cnforge::to_json(pipeline.retrieve(in, *backend));
    nlohmann::ordered_json line;
    line["pair_id"] = pair_id;
    line["hs"] = in.hs;
    for (auto& [k, v] : j.items()) line[k] = v;
    out.stream() << line.dump() << '\n';
  };
  if (!hs.empty()) {
    cnforge::RetrieveInput in;
    in.hs = hs;
    in.config = config;
    in.seed = o.seed;
    if (!overrides.empty()) in.overrides = overrides;
    emit("adhoc", in);
    return 0;
  }
  const auto pairs = load_filtered_pairs(o);
  for (const auto& p : pairs.in_split(split_of(o.split))) {
    auto in = retrieve_input(p, config, o);
    if (!overrides.empty()) in.overrides = overrides;
    emit(p.pair_id, in);
  }
  return 0;
}

int run_dataset_build(const Options& o, const std::string& kind_name) {
  require(o.out, "--out", "dataset");
  const auto kind = cnforge::parse_prompt_kind(kind_name);
  if (!kind || (*kind != cnforge::PromptKind::cn_train && *kind != cnforge::PromptKind::kp_train))
    throw Error("dataset", "--kind must be cn_train or kp_train");
  const auto pairs = load_filtered_pairs(o);
  std::optional<cnforge::Pipeline> pipeline;
  if (*kind == cnforge::PromptKind::cn_train) pipeline = load_pipeline(o);
  auto backend = backend_of(o);
  const auto config = config_of(o.config);
  Output prompts(o.out);
  Output sidecar(o.out + ".segments.jsonl");
  std::size_t n = 0;
  for (const auto& p : pairs.in_split(split_of(o.split))) {
    cnforge::PromptSequence seq;
    if (*kind == cnforge::PromptKind::cn_train) {
      const auto result = pipeline->retrieve(retrieve_input(p, config, o), *backend);
      seq = cnforge::assemble_cn(p.hs, result.knowledge.texts(), p.cn, pipeline->options().truncation);
    } else {
      std::vector<std::string> kps;
      for (const auto& kp : cnforge::extract_keyphrases(p.cn, o.max_keyphrases, cnforge::KeyphraseSource::cn))
        kps.push_back(kp.text);
      if (kps.empty()) continue;
      seq = cnforge::assemble_kp(p.hs, kps);
    }
    prompts.stream() << seq.text << '\n';
    auto meta = cnforge::to_json(seq);
    meta.erase("text");
    nlohmann::ordered_json line{{"pair_id", p.pair_id}};
    for (auto& [k, v] : meta.items()) line[k] = v;
    sidecar.stream() << line.dump() << '\n';
    ++n;
  }
  std::cerr << "wrote " << n << " " << kind_name << " sequences to " << o.out << "\n";
  return 0;
}

cnforge::DecodingParams decoding_of(const std::string& strategy, double p, int beam_width, int max_new_tokens,
                                    const std::optional<std::int64_t>& seed) {
  cnforge::DecodingParams d;
  if (strategy == "nucleus") {
    d = cnforge::DecodingParams::nucleus(p, max_new_tokens);
  } else if (strategy == "beam") {
    d = cnforge::DecodingParams::beam(beam_width, max_new_tokens);
  } else {
    throw Error("gateway", "unknown decoding strategy " + strategy);
  }
  d.seed = seed;
  d.validate();
  return d;
}

int run_generate(const Options& o, const std::string& journal_path, const cnforge::DecodingParams& decoding) {
  require(o.out, "--out", "generate");
  const auto pipeline = load_pipeline(o);
  const auto pairs = load_filtered_pairs(o);
  auto backend = backend_of(o);
  const auto config = config_of(o.config);
  const std::string journal_file = journal_path.empty() ? o.out + ".journal.jsonl" : journal_path;
  cnforge::RunJournal journal(fs::path(journal_file), o.seed ? cnforge::logical_clock() : cnforge::system_clock());
  Output out(o.out);
  for (const auto& p : pairs.in_split(split_of(o.split))) {
    const auto run_id = journal.next_run_id();
    nlohmann::ordered_json record;
    record["run_id"] = run_id;
    record["pair_id"] = p.pair_id;
    record["status"] = "completed";
    record["hs"] = p.hs;
    record["config"] = cnforge::to_string(config);
    record["decoding"] = cnforge::to_json(decoding);
    record["started_at"] = journal.now();
    try {
      auto in = retrieve_input(p, config, o);
      in.request_id = run_id;
      const auto retrieval = pipeline.retrieve(in, *backend);
      record["retrieval"] = cnforge::to_json(retrieval);
      const auto knowledge = retrieval.knowledge.texts();
      const auto outcome = pipeline.generate(p.hs, knowledge, decoding, run_id + ":cn", *backend);
      record["prompt"] = cnforge::to_json(outcome.prompt);
      auto gen = cnforge::to_json(outcome.result);
      gen["cn"] = outcome.cn.text;
      gen["unterminated"] = !outcome.cn.terminated;
      record["generation"] = std::move(gen);
      record["completed_at"] = journal.now();
      journal.append(record);
      out.stream() << cnforge::to_json(cnforge::Prediction{p.pair_id, outcome.cn.text, knowledge}).dump() << '\n';
    } catch (const Error& e) {
      record["status"] = "failed";
      record["error"] = cnforge::error_body(e);
      record["completed_at"] = journal.now();
      journal.append(record);
      throw;
    }
  }
  return 0;
}

int run_eval(const Options& o, const std::vector<std::string>& prediction_files, std::vector<std::string> models,
             const std::string& format) {
  if (prediction_files.empty()) throw Error("eval", "--predictions is required");
  if (!models.empty() && models.size() != prediction_files.size())
    throw Error("eval", "--model must be given once per --predictions file");
  const auto pairs = load_filtered_pairs(o);
  const auto split = split_of(o.split);
  cnforge::EvalReport report;
  report.query_config = o.config;
  report.split = o.split;
  for (std::size_t i = 0; i < prediction_files.size(); ++i) {
    std::ifstream in(prediction_files[i]);
    if (!in) throw Error("eval", "cannot open " + prediction_files[i]);
    const auto predictions = cnforge::read_predictions(in);
    const auto name = models.empty() ? fs::path(prediction_files[i]).stem().string() : models[i];
    report.rows.push_back(cnforge::evaluate_predictions(pairs, predictions, split, name));
    report.n_items = report.rows.back().n_items;
    for (const auto& w : report.rows.back().warnings) std::cerr << "warning: " << name << ": " << w << "\n";
  }
  Output out(o.out);
  if (format == "json") {
    out.stream() << cnforge::to_json(report).dump(2) << '\n';
  } else if (format == "tsv") {
    out.stream() << cnforge::to_tsv(report);
  } else {
    throw Error("eval", "unknown --format " + format);
  }
  return 0;
}

/// Deterministic Fisher-Yates sample over mt19937_64.
std::vector<cnforge::HsCnPair> sample(std::vector<cnforge::HsCnPair> items, std::size_t n, std::int64_t seed) {
  if (n == 0 || n >= items.size()) return items;
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  for (std::size_t i = items.size() - 1; i > 0; --i) std::swap(items[i], items[rng() % (i + 1)]);
  items.resize(n);
  return items;
}

int run_compare_configs(const Options& o, const std::vector<std::string>& config_names, std::size_t sample_size) {
  const auto pipeline = load_pipeline(o);
  const auto pairs = sample(load_filtered_pairs(o).in_split(split_of(o.split)), sample_size, o.seed.value_or(0));
  if (pairs.empty()) throw Error("compare", "no pairs in split " + o.split);
  auto backend = backend_of(o);
  struct Row {
    std::string config;
    double mean_score = 0.0;
    double hs_relevance = 0.0;
    double sentences = 0.0;
  };
  std::vector<Row> rows;
  for (const auto& name : config_names) {
    const auto config = config_of(name);
    Row row{std::string(cnforge::to_string(config))};
    std::size_t scored = 0;
    for (const auto& p : pairs) {
      const auto result = pipeline.retrieve(retrieve_input(p, config, o), *backend);
      const auto hs_tokens = cnforge::tokenize(p.hs);
      for (const auto& s : result.knowledge.sentences) {
        row.mean_score += s.score;
        row.hs_relevance += cnforge::rouge_l_f1(s.sentence.tokens, hs_tokens);
        ++scored;
      }
      row.sentences += static_cast<double>(result.knowledge.sentences.size());
    }
    if (scored > 0) {
      row.mean_score /= static_cast<double>(scored);
      row.hs_relevance /= static_cast<double>(scored);
    }
    row.sentences /= static_cast<double>(pairs.size());
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.mean_score > b.mean_score; });
  Output out(o.out);
  auto& os = out.stream();
  os << "# Query configuration comparison over " << pairs.size() << " " << o.split << " pair(s).\n"
     << "# mean_score is the mean ROUGE-L F1 of each distilled knowledge sentence against its own query; it stands\n"
     << "# in for a 1-5 human relevance rating, which cannot be computed. hs_relevance scores the same sentences\n"
     << "# against the HS tokens. Rows are ordered by mean_score.\n";
  os << "rank\tconfig\tmean_score\ths_relevance\tsentences_per_pair\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << (i + 1) << '\t' << rows[i].config << '\t' << cnforge::detail::fixed(rows[i].mean_score, 6) << '\t'
       << cnforge::detail::fixed(rows[i].hs_relevance, 6) << '\t' << cnforge::detail::fixed(rows[i].sentences, 2)
       << '\n';
  }
  return 0;
}

int run_serve(const Options& o, const std::string& host, int port, const std::string& journal_path,
              const std::string& data_dir) {
  std::optional<cnforge::Pipeline> pipeline;
  if (!o.corpus.empty()) pipeline = load_pipeline(o);
  cnforge::RunJournal journal(journal_path.empty() ? std::nullopt : std::optional<fs::path>(journal_path));
  cnforge::PipelineService service(std::move(pipeline), backend_of(o), journal, cnforge::ServiceConfig{data_dir});
  httplib::Server server;
  cnforge::mount(server, service);
  std::cerr << "listening on http://" << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw Error("serve", "cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cnforge: knowledge retrieval, prompt assembly and evaluation for counter-narrative generation"};
  app.require_subcommand(1);
  Options o;
  std::int64_t seed_value = 0;

  auto add_corpus = [&](CLI::App* c) {
    c->add_option("--corpus", o.corpus, "Articles JSONL or snapshot directory");
    c->add_option("--index-dir", o.index_dir, "Saved index directory (built in memory when absent)");
  };
  auto add_pairs = [&](CLI::App* c) {
    c->add_option("--pairs", o.pairs, "Pairs TSV or snapshot directory");
    c->add_option("--split", o.split, "Split to process")->check(CLI::IsMember({"train", "dev", "test"}));
    c->add_option("--min-cn-tokens", o.min_cn_tokens, "Drop pairs whose CN is shorter (0 keeps all)");
  };
  auto add_retrieval = [&](CLI::App* c) {
    c->add_option("--config", o.config, "Query configuration")
        ->check(CLI::IsMember({"q_hs", "q_gen", "q_hs_gen", "q_hs_cn", "q_cn"}));
    c->add_option("--backend-url", o.backend_url, "Generation backend (default: $CNFORGE_BACKEND_URL, else stub)");
    c->add_option("--seed", seed_value, "Seed pinning every stochastic choice");
    c->add_option("--top-articles", o.top_articles, "Articles retrieved per query")->check(CLI::PositiveNumber);
    c->add_option("--top-sentences", o.top_sentences, "Knowledge sentences kept per query")->check(CLI::PositiveNumber);
    c->add_option("--min-sentence-tokens", o.min_sentence_tokens, "Shortest admissible knowledge sentence");
    c->add_option("--max-keyphrases", o.max_keyphrases, "Keyphrases extracted per text")->check(CLI::PositiveNumber);
  };

  auto* ingest = app.add_subcommand("ingest", "Validate articles/pairs and write a snapshot directory");
  ingest->add_option("--corpus", o.corpus, "Articles JSONL")->required();
  ingest->add_option("--pairs", o.pairs, "Pairs TSV");
  ingest->add_option("--out", o.out, "Snapshot directory")->required();

  auto* index = app.add_subcommand("index", "Build and save the BM25 index");
  index->add_option("--corpus", o.corpus, "Articles JSONL or snapshot directory")->required();
  index->add_option("--index-dir", o.index_dir, "Output directory")->required();

  auto* retrieve = app.add_subcommand("retrieve", "Retrieve knowledge per pair (or for one --hs)");
  add_corpus(retrieve);
  add_pairs(retrieve);
  add_retrieval(retrieve);
  std::string adhoc_hs;
  std::vector<std::string> overrides;
  retrieve->add_option("--hs", adhoc_hs, "Retrieve for this HS instead of --pairs");
  retrieve->add_option("--override", overrides, "Keyphrase overriding the extracted/generated ones");
  retrieve->add_option("--out", o.out, "Output JSONL (default stdout)");

  auto* dataset = app.add_subcommand("dataset-build", "Assemble training sequences");
  add_corpus(dataset);
  add_pairs(dataset);
  add_retrieval(dataset);
  std::string kind = "cn_train";
  dataset->add_option("--kind", kind, "cn_train or kp_train")->check(CLI::IsMember({"cn_train", "kp_train"}));
  dataset->add_option("--out", o.out, "Prompt file; segment sidecar goes to <out>.segments.jsonl")->required();

  auto* generate = app.add_subcommand("generate", "Retrieve and generate a CN per pair");
  add_corpus(generate);
  add_pairs(generate);
  add_retrieval(generate);
  std::string journal_path;
  std::string strategy = "nucleus";
  double top_p = 0.9;
  int beam_width = 3;
  int max_new_tokens = 256;
  generate->add_option("--journal", journal_path, "Run journal (default <out>.journal.jsonl)");
  generate->add_option("--strategy", strategy, "nucleus or beam")->check(CLI::IsMember({"nucleus", "beam"}));
  generate->add_option("--p", top_p, "Nucleus p");
  generate->add_option("--beam-width", beam_width, "Beam width");
  generate->add_option("--max-new-tokens", max_new_tokens, "Generation budget");
  generate->add_option("--out", o.out, "Predictions JSONL")->required();

  auto* eval = app.add_subcommand("eval", "Score prediction files");
  add_pairs(eval);
  std::vector<std::string> prediction_files;
  std::vector<std::string> models;
  std::string format = "tsv";
  eval->add_option("--predictions", prediction_files, "Predictions JSONL (repeatable, one row each)")->required();
  eval->add_option("--model", models, "Row names, one per --predictions");
  eval->add_option("--config", o.config, "Query configuration label for the report");
  eval->add_option("--format", format, "tsv or json")->check(CLI::IsMember({"tsv", "json"}));
  eval->add_option("--out", o.out, "Report file (default stdout)");

  auto* compare = app.add_subcommand("compare-configs", "Compare knowledge relevance across query configurations");
  add_corpus(compare);
  add_pairs(compare);
  add_retrieval(compare);
  std::vector<std::string> configs{"q_hs", "q_cn", "q_hs_cn"};
  std::size_t sample_size = 0;
  compare->add_option("--configs", configs, "Configurations to compare")
      ->check(CLI::IsMember({"q_hs", "q_gen", "q_hs_gen", "q_hs_cn", "q_cn"}));
  compare->add_option("--sample", sample_size, "Random sample of pairs (0 = all), drawn with --seed");
  compare->add_option("--out", o.out, "Table file (default stdout)");

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  add_corpus(serve);
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = ".";
  serve->add_option("--backend-url", o.backend_url, "Generation backend (default: $CNFORGE_BACKEND_URL, else stub)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--journal", journal_path, "Run journal JSONL (in memory when absent)");
  serve->add_option("--data-dir", data_dir, "Root for dataset/output references in /v1/eval");

  CLI11_PARSE(app, argc, argv);
  for (auto* c : {retrieve, dataset, generate, compare}) {
    if (c->parsed() && c->count("--seed") > 0) o.seed = seed_value;
  }
  if (dataset->parsed() && dataset->count("--config") == 0) o.config = "q_hs_cn";
  if (dataset->parsed() && dataset->count("--split") == 0) o.split = "train";

  try {
    if (ingest->parsed()) return run_ingest(o);
    if (index->parsed()) return run_index(o);
    if (retrieve->parsed()) return run_retrieve(o, adhoc_hs, overrides);
    if (dataset->parsed()) return run_dataset_build(o, kind);
    if (generate->parsed())
      return run_generate(o, journal_path, decoding_of(strategy, top_p, beam_width, max_new_tokens, o.seed));
    if (eval->parsed()) return run_eval(o, prediction_files, models, format);
    if (compare->parsed()) return run_compare_configs(o, configs, sample_size);
    if (serve->parsed()) return run_serve(o, host, port, journal_path, data_dir);
  } catch (const cnforge::IngestError& e) {
    std::cerr << "cnforge: " << e.stage() << ": " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "cnforge: " << e.stage() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "cnforge: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
