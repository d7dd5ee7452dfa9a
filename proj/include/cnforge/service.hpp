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

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cnforge/evaluation.hpp"
#include "cnforge/gateway.hpp"
#include "cnforge/journal.hpp"
#include "cnforge/pipeline.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cnforge {

/// An error with an HTTP status and a machine-readable code.
class ServiceError : public Error {
 public:
  ServiceError(int status, std::string code, std::string stage, const std::string& message)
      : Error(std::move(stage), message), status_(status), code_(std::move(code)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

/// Error body shared by every endpoint: {"code", "message", "stage"}, plus
/// "attempts" and "retryable" for backend failures.
inline nlohmann::ordered_json error_body(const std::exception& e, int* status = nullptr) {
  nlohmann::ordered_json j;
  int http = 500;
  if (const auto* s = dynamic_cast<const ServiceError*>(&e)) {
    http = s->status();
    j = {{"code", s->code()}, {"message", s->what()}, {"stage", s->stage()}};
  } else if (const auto* g = dynamic_cast<const GatewayError*>(&e)) {
    http = g->kind() == GatewayError::Kind::invalid_request ? 400 : 502;
    j = {{"code", std::string("gateway_") + std::string(to_string(g->kind()))},
         {"message", g->what()},
         {"stage", g->stage()},
         {"attempts", g->attempts()},
         {"retryable", g->retryable()}};
  } else if (const auto* c = dynamic_cast<const Error*>(&e)) {
    http = 400;
    j = {{"code", "invalid_input"}, {"message", c->what()}, {"stage", c->stage()}};
  } else {
    j = {{"code", "internal"}, {"message", e.what()}, {"stage", "service"}};
  }
  if (status) *status = http;
  return j;
}

struct ServiceConfig {
  /// Relative dataset and output references resolve against this directory.
  std::filesystem::path data_dir = ".";
};

/// Request handlers behind the HTTP API. The pipeline is read-only and the
/// journal is the only shared mutable state, so handlers may run
/// concurrently.
class PipelineService {
 public:
  /// `pipeline` is empty when no corpus/index has been loaded; retrieval
  /// then fails with 409 while generation and evaluation keep working.
  PipelineService(std::optional<Pipeline> pipeline, std::unique_ptr<Backend> backend, RunJournal& journal,
                  ServiceConfig config = {})
      : loaded_(pipeline.has_value()),
        pipeline_(pipeline ? std::move(*pipeline) : Pipeline(ArticleSet{}, std::nullopt)),
        backend_(std::move(backend)),
        journal_(journal),
        config_(std::move(config)) {}

  nlohmann::ordered_json healthz() const {
    return {{"status", "ok"},
            {"index_loaded", loaded_},
            {"n_docs", pipeline_.index() ? pipeline_.index()->n_docs() : 0},
            {"backend", backend_->id()}};
  }

  /// {"hs", "config"?, "cn"?, "overrides"?, "seed"?} -> run record with query,
  /// scored articles and knowledge.
  nlohmann::ordered_json handle_retrieve(const nlohmann::json& body) {
    if (!loaded_) throw ServiceError(409, "no_index", "retrieve", "no corpus index is loaded");
    RetrieveInput in;
    in.hs = require_string(body, "hs", "retrieve");
    const auto config_name = body.value("config", std::string("q_hs"));
    auto config = parse_query_config(config_name);
    if (!config) throw ServiceError(400, "invalid_input", "query", "unknown query config " + config_name);
    in.config = *config;
    if (auto cn = body.find("cn"); cn != body.end() && cn->is_string()) in.cn = cn->get<std::string>();
    if (auto ov = body.find("overrides"); ov != body.end() && !ov->is_null()) {
      if (!ov->is_array()) throw ServiceError(400, "invalid_input", "query", "overrides must be a list of strings");
      in.overrides = ov->get<std::vector<std::string>>();
    }
    if (auto seed = body.find("seed"); seed != body.end() && seed->is_number_integer())
      in.seed = seed->get<std::int64_t>();

    const auto run_id = journal_.next_run_id();
    in.request_id = run_id;
    nlohmann::ordered_json record;
    record["run_id"] = run_id;
    record["status"] = "retrieved";
    record["hs"] = in.hs;
    record["config"] = to_string(in.config);
    record["started_at"] = journal_.now();
    try {
      const auto result = pipeline_.retrieve(in, *backend_);
      record["retrieval"] = to_json(result);
    } catch (const GatewayError& e) {
      fail(record, e);
      throw;
    }
    record["completed_at"] = journal_.now();
    journal_.append(record);
    return record;
  }

  /// {"run_id"} or {"hs", "knowledge"}, plus optional "decoding" and "seed".
  nlohmann::ordered_json handle_generate(const nlohmann::json& body) {
    std::string hs;
    std::vector<std::string> knowledge;
    nlohmann::ordered_json provenance;
    std::optional<std::string> parent;
    if (auto id = body.find("run_id"); id != body.end() && id->is_string()) {
      parent = id->get<std::string>();
      auto prior = journal_.find(*parent);
      if (!prior) throw ServiceError(404, "unknown_run", "generate", "no run " + *parent);
      hs = prior->at("hs").get<std::string>();
      provenance = prior->contains("retrieval") ? (*prior)["retrieval"]["knowledge"] : (*prior)["knowledge"];
      knowledge = knowledge_from_json(provenance).texts();
    } else {
      hs = require_string(body, "hs", "generate");
      if (auto kn = body.find("knowledge"); kn != body.end() && !kn->is_null()) {
        if (kn->is_array()) {
          nlohmann::json wrapped = {{"sentences", *kn}};
          provenance = to_json(knowledge_from_json(wrapped));
          provenance.erase("query");
        } else {
          provenance = to_json(knowledge_from_json(*kn));
        }
        knowledge = knowledge_from_json(provenance).texts();
      } else {
        provenance = {{"sentences", nlohmann::ordered_json::array()}};
      }
    }
    auto decoding = default_decoding(GenerationMode::cn);
    if (auto d = body.find("decoding"); d != body.end() && !d->is_null()) decoding = decoding_from_json(*d);
    if (auto seed = body.find("seed"); seed != body.end() && seed->is_number_integer())
      decoding.seed = seed->get<std::int64_t>();

    const auto run_id = journal_.next_run_id();
    nlohmann::ordered_json record;
    record["run_id"] = run_id;
    if (parent) record["parent_run_id"] = *parent;
    record["status"] = "completed";
    record["hs"] = hs;
    record["knowledge"] = provenance;
    record["decoding"] = to_json(decoding);
    record["started_at"] = journal_.now();
    try {
      const auto outcome = pipeline_.generate(hs, knowledge, decoding, run_id + ":cn", *backend_);
      record["prompt"] = to_json(outcome.prompt);
      auto gen = to_json(outcome.result);
      gen["cn"] = outcome.cn.text;
      gen["unterminated"] = !outcome.cn.terminated;
      record["generation"] = std::move(gen);
    } catch (const GatewayError& e) {
      fail(record, e);
      throw;
    }
    record["completed_at"] = journal_.now();
    journal_.append(record);
    return record;
  }

  /// {"dataset": path | {"pairs": [...]}, "outputs": path | [...],
  ///  "split"?, "model"?, "query_config"?} -> EvalReport JSON.
  nlohmann::ordered_json handle_eval(const nlohmann::json& body) const {
    const auto pairs = resolve_pairs(body.value("dataset", nlohmann::json()));
    const auto predictions = resolve_outputs(body.value("outputs", nlohmann::json()));
    const auto split_name = body.value("split", std::string("test"));
    auto split = parse_split(split_name);
    if (!split) throw ServiceError(400, "invalid_input", "eval", "unknown split " + split_name);
    if (predictions.empty()) throw ServiceError(400, "empty_outputs", "eval", "no outputs to evaluate");
    if (predictions.size() != pairs.count(*split)) {
      throw ServiceError(400, "ref_mismatch", "eval",
                         std::to_string(predictions.size()) + " outputs but " + std::to_string(pairs.count(*split)) +
                             " " + split_name + " pairs");
    }
    EvalReport report;
    report.query_config = body.value("query_config", std::string());
    report.split = split_name;
    report.n_items = predictions.size();
    report.rows.push_back(evaluate_predictions(pairs, predictions, *split, body.value("model", std::string("model"))));
    return to_json(report);
  }

  /// {"candidate", "knowledge", "n"?}: overlap scores for n = 1..3 and the
  /// candidate token positions covered by shared n-grams of order `n`.
  nlohmann::ordered_json handle_kn_overlap(const nlohmann::json& body) const {
    const auto candidate = tokenize(require_string(body, "candidate", "eval"));
    std::string knowledge;
    if (auto kn = body.find("knowledge"); kn != body.end() && kn->is_array()) {
      for (const auto& s : *kn) knowledge += (knowledge.empty() ? "" : " ") + s.get<std::string>();
    } else {
      knowledge = require_string(body, "knowledge", "eval");
    }
    const auto kn_tokens = tokenize(knowledge);
    const auto n = body.value("n", 1);
    if (n < 1 || n > 3) throw ServiceError(400, "invalid_input", "eval", "n must be 1, 2 or 3");
    nlohmann::ordered_json j;
    j["tokens"] = candidate;
    for (int k = 1; k <= 3; ++k) j["kn_overlap_" + std::to_string(k)] = kn_overlap(candidate, kn_tokens, k);
    std::set<std::size_t> covered;
    std::set<std::vector<std::string>> kn_grams;
    for (std::size_t i = 0; i + n <= kn_tokens.size(); ++i)
      kn_grams.emplace(kn_tokens.begin() + static_cast<std::ptrdiff_t>(i), kn_tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    for (std::size_t i = 0; i + n <= candidate.size(); ++i) {
      std::vector<std::string> gram(candidate.begin() + static_cast<std::ptrdiff_t>(i),
                                    candidate.begin() + static_cast<std::ptrdiff_t>(i + n));
      if (kn_grams.count(gram))
        for (int k = 0; k < n; ++k) covered.insert(i + static_cast<std::size_t>(k));
    }
    j["highlight"] = std::vector<std::size_t>(covered.begin(), covered.end());
    return j;
  }

  nlohmann::ordered_json get_run(const std::string& run_id) const {
    auto record = journal_.find(run_id);
    if (!record) throw ServiceError(404, "unknown_run", "journal", "no run " + run_id);
    return *record;
  }

 private:
  static std::string require_string(const nlohmann::json& body, const char* key, const char* stage) {
    auto it = body.find(key);
    if (it == body.end() || !it->is_string() || trim(it->get<std::string>()).empty())
      throw ServiceError(400, "invalid_input", stage, std::string("field \"") + key + "\" must be a non-empty string");
    return it->get<std::string>();
  }

  void fail(nlohmann::ordered_json& record, const GatewayError& e) {
    record["status"] = "failed";
    record["error"] = error_body(e);
    record["completed_at"] = journal_.now();
    journal_.append(record);
  }

  std::filesystem::path resolve(const std::string& ref) const {
    std::filesystem::path p(ref);
    if (p.is_relative()) p = config_.data_dir / p;
    if (!std::filesystem::exists(p)) throw ServiceError(404, "unknown_ref", "eval", "cannot resolve " + ref);
    return p;
  }

  PairSet resolve_pairs(const nlohmann::json& ref) const {
    if (ref.is_string()) return load_pairs(resolve(ref.get<std::string>()));
    if (ref.is_object() && ref.contains("pairs")) {
      std::vector<HsCnPair> items;
      for (const auto& p : ref.at("pairs")) {
        HsCnPair pair;
        pair.pair_id = p.value("pair_id", std::string());
        pair.hs = p.value("hs", std::string());
        pair.cn = p.value("cn", std::string());
        auto split = parse_split(p.value("split", std::string("test")));
        if (!split) throw ServiceError(400, "invalid_input", "eval", "unknown split in inline dataset");
        pair.split = *split;
        pair.target = p.value("target", std::string());
        items.push_back(std::move(pair));
      }
      return PairSet(std::move(items));
    }
    throw ServiceError(400, "invalid_input", "eval", "dataset must be a path or {\"pairs\": [...]}");
  }

  std::vector<Prediction> resolve_outputs(const nlohmann::json& ref) const {
    if (ref.is_string()) {
      std::ifstream in(resolve(ref.get<std::string>()));
      return read_predictions(in);
    }
    if (ref.is_array()) {
      std::vector<Prediction> out;
      for (const auto& p : ref) out.push_back(prediction_from_json(p));
      return out;
    }
    throw ServiceError(400, "invalid_input", "eval", "outputs must be a path or a list");
  }

  bool loaded_;
  Pipeline pipeline_;
  std::unique_ptr<Backend> backend_;
  RunJournal& journal_;
  ServiceConfig config_;
};

/// Registers POST /v1/retrieve, /v1/generate, /v1/eval, /v1/kn_overlap and
/// GET /v1/runs/{id}, /v1/healthz on `server`.
inline void mount(httplib::Server& server, PipelineService& service) {
  auto reply = [](httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(body.dump(), "application/json");
  };
  auto post = [&server, reply](const std::string& path, auto handler) {
    server.Post(path, [reply, handler](const httplib::Request& req, httplib::Response& res) {
      try {
        auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object())
          throw ServiceError(400, "invalid_json", "service", "request body must be a JSON object");
        reply(res, 200, handler(body));
      } catch (const std::exception& e) {
        int status = 500;
        auto err = error_body(e, &status);
        reply(res, status, err);
      }
    });
  };
  post("/v1/retrieve", [&service](const nlohmann::json& b) { return service.handle_retrieve(b); });
  post("/v1/generate", [&service](const nlohmann::json& b) { return service.handle_generate(b); });
  post("/v1/eval", [&service](const nlohmann::json& b) { return service.handle_eval(b); });
  post("/v1/kn_overlap", [&service](const nlohmann::json& b) { return service.handle_kn_overlap(b); });
  server.Get(R"(/v1/runs/([A-Za-z0-9_.:-]+))", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, 200, service.get_run(req.matches[1]));
    } catch (const std::exception& e) {
      int status = 500;
      auto err = error_body(e, &status);
      reply(res, status, err);
    }
  });
  server.Get("/v1/healthz", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, service.healthz());
  });
  server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

}  // namespace cnforge
