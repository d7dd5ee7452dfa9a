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
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "cnforge/error.hpp"
#include "cnforge/prompt.hpp"
#include "cnforge/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cnforge {

enum class GenerationMode { cn, keyphrases };

inline std::string_view to_string(GenerationMode m) { return m == GenerationMode::cn ? "cn" : "keyphrases"; }

inline std::optional<GenerationMode> parse_generation_mode(std::string_view s) {
  if (s == "cn") return GenerationMode::cn;
  if (s == "keyphrases") return GenerationMode::keyphrases;
  return std::nullopt;
}

enum class DecodingStrategy { nucleus, beam };

class GatewayError : public Error {
 public:
  enum class Kind { invalid_request, timeout, protocol };

  GatewayError(Kind kind, const std::string& message, int attempts = 0, std::string raw_payload = {})
      : Error("gateway", message), kind_(kind), attempts_(attempts), raw_payload_(std::move(raw_payload)) {}

  Kind kind() const { return kind_; }
  bool retryable() const { return kind_ == Kind::timeout; }
  int attempts() const { return attempts_; }
  const std::string& raw_payload() const { return raw_payload_; }

 private:
  Kind kind_;
  int attempts_;
  std::string raw_payload_;
};

inline std::string_view to_string(GatewayError::Kind k) {
  switch (k) {
    case GatewayError::Kind::invalid_request: return "invalid_request";
    case GatewayError::Kind::timeout: return "timeout";
    case GatewayError::Kind::protocol: return "protocol";
  }
  return "protocol";
}

/// Decoding knobs passed through to the backend. Nucleus sampling carries
/// `p`, beam search carries `beam_width`; never both.
struct DecodingParams {
  DecodingStrategy strategy = DecodingStrategy::nucleus;
  std::optional<double> p = 0.9;
  std::optional<int> beam_width;
  int max_new_tokens = 256;
  std::optional<std::int64_t> seed;

  static DecodingParams nucleus(double p = 0.9, int max_new_tokens = 256) {
    return {DecodingStrategy::nucleus, p, std::nullopt, max_new_tokens, std::nullopt};
  }
  static DecodingParams beam(int width = 3, int max_new_tokens = 256) {
    return {DecodingStrategy::beam, std::nullopt, width, max_new_tokens, std::nullopt};
  }

  void validate() const {
    if (max_new_tokens <= 0) throw GatewayError(GatewayError::Kind::invalid_request, "max_new_tokens must be positive");
    if (strategy == DecodingStrategy::nucleus) {
      if (!p || !(*p > 0.0 && *p <= 1.0))
        throw GatewayError(GatewayError::Kind::invalid_request, "nucleus decoding needs p in (0, 1]");
      if (beam_width) throw GatewayError(GatewayError::Kind::invalid_request, "nucleus decoding takes no beam_width");
    } else {
      if (!beam_width || *beam_width <= 0)
        throw GatewayError(GatewayError::Kind::invalid_request, "beam decoding needs a positive beam_width");
      if (p) throw GatewayError(GatewayError::Kind::invalid_request, "beam decoding takes no p");
    }
  }

  friend bool operator==(const DecodingParams&, const DecodingParams&) = default;
};

/// Defaults per mode: nucleus sampling with p = 0.9 for both CN and
/// keyphrase generation.
inline DecodingParams default_decoding(GenerationMode mode) {
  return mode == GenerationMode::cn ? DecodingParams::nucleus(0.9, 256) : DecodingParams::nucleus(0.9, 32);
}

inline nlohmann::ordered_json to_json(const DecodingParams& d) {
  nlohmann::ordered_json j;
  j["strategy"] = d.strategy == DecodingStrategy::nucleus ? "nucleus" : "beam";
  if (d.p) j["p"] = *d.p;
  if (d.beam_width) j["beam_width"] = *d.beam_width;
  j["max_new_tokens"] = d.max_new_tokens;
  if (d.seed) j["seed"] = *d.seed;
  return j;
}

inline DecodingParams decoding_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& m) { return GatewayError(GatewayError::Kind::invalid_request, "decoding: " + m); };
  if (!j.is_object()) throw bad("expected an object");
  DecodingParams d;
  const auto strategy = j.value("strategy", std::string());
  if (strategy == "nucleus") {
    d.strategy = DecodingStrategy::nucleus;
  } else if (strategy == "beam") {
    d.strategy = DecodingStrategy::beam;
  } else {
    throw bad("unknown strategy \"" + strategy + "\"");
  }
  d.p.reset();
  try {
    if (j.contains("p")) d.p = j.at("p").get<double>();
    if (j.contains("beam_width")) d.beam_width = j.at("beam_width").get<int>();
    if (j.contains("max_new_tokens")) d.max_new_tokens = j.at("max_new_tokens").get<int>();
    if (j.contains("seed") && !j.at("seed").is_null()) d.seed = j.at("seed").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw bad(e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "strategy" && key != "p" && key != "beam_width" && key != "max_new_tokens" && key != "seed")
      throw bad("unknown field \"" + key + "\"");
  }
  d.validate();
  return d;
}

struct GenerationRequest {
  GenerationMode mode = GenerationMode::cn;
  std::string prompt;
  DecodingParams decoding;
  std::string request_id;

  /// The prompt must stop right at the boundary token its mode continues from.
  void validate() const {
    const auto expected = mode == GenerationMode::cn ? kKnEnd : kHsEnd;
    const auto body = trim(prompt);
    if (body.size() < expected.size() || body.substr(body.size() - expected.size()) != expected) {
      throw GatewayError(GatewayError::Kind::invalid_request,
                         std::string(to_string(mode)) + " prompt must end with " + std::string(expected));
    }
    if (request_id.empty()) throw GatewayError(GatewayError::Kind::invalid_request, "request_id must be non-empty");
    decoding.validate();
  }
};

inline nlohmann::ordered_json to_json(const GenerationRequest& r) {
  return {{"mode", to_string(r.mode)}, {"prompt", r.prompt}, {"decoding", to_json(r.decoding)},
          {"request_id", r.request_id}};
}

struct GenerationResult {
  std::string text;
  std::string backend_id;
  std::int64_t latency_ms = 0;
  std::optional<std::string> warning;
  int attempts = 1;
};

inline nlohmann::ordered_json to_json(const GenerationResult& r) {
  nlohmann::ordered_json j;
  j["text"] = r.text;
  j["backend_id"] = r.backend_id;
  j["latency_ms"] = r.latency_ms;
  j["attempts"] = r.attempts;
  j["warning"] = r.warning ? nlohmann::ordered_json(*r.warning) : nlohmann::ordered_json();
  return j;
}

/// A text-generation service. Implementations must be safe to call from
/// several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual GenerationResult generate(const GenerationRequest& req) = 0;
};

/// Deterministic in-process backend for tests and offline runs.
///
///   cn          "Counter: <first KN sentence> [CN_end_token]", or
///               "Counter: No evidence provided. [CN_end_token]" when the
///               KN segment is empty.
///   keyphrases  the three most frequent non-stopword HS tokens (ties by
///               first occurrence), comma-joined, then [KP_end_token].
///
/// The output depends on the prompt only; the seed is accepted and ignored.
class StubBackend : public Backend {
 public:
  std::string id() const override { return "stub"; }

  GenerationResult generate(const GenerationRequest& req) override {
    GenerationResult out;
    out.backend_id = id();
    try {
      if (req.mode == GenerationMode::cn) {
        const auto parsed = parse_prompt(req.prompt, PromptKind::cn_infer);
        const auto sentences = segment_sentences(parsed.at("kn"));
        out.text = "Counter: " + (sentences.empty() ? std::string("No evidence provided.") : sentences.front()) + " " +
                   std::string(kCnEnd);
      } else {
        const auto parsed = parse_prompt(req.prompt, PromptKind::kp_infer);
        out.text = top_tokens(parsed.at("hs")) + " " + std::string(kKpEnd);
      }
    } catch (const PromptError& e) {
      throw GatewayError(GatewayError::Kind::invalid_request, std::string("stub cannot parse prompt: ") + e.what());
    }
    return out;
  }

 private:
  static std::string top_tokens(std::string_view hs) {
    struct Count {
      std::size_t n = 0;
      std::size_t first = 0;
    };
    std::map<std::string, Count> counts;
    const auto tokens = tokenize(hs);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (default_stopwords().contains(tokens[i])) continue;
      auto [it, fresh] = counts.try_emplace(tokens[i], Count{0, i});
      ++it->second.n;
    }
    std::vector<std::pair<std::string, Count>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second.n != b.second.n) return a.second.n > b.second.n;
      return a.second.first < b.second.first;
    });
    std::string out;
    for (std::size_t i = 0; i < ranked.size() && i < 3; ++i) out += (i ? ", " : "") + ranked[i].first;
    return out;
  }
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds connect_timeout{2000};
  std::chrono::milliseconds read_timeout{60000};
};

/// Talks to a remote backend: POST <base>/v1/generate with the JSON form of
/// the request, expecting {"text", "backend_id"} back. Transport failures,
/// 429 and 5xx are retried with exponential backoff under the same
/// request_id; any other status or a malformed body is a protocol error.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(std::string url, RetryPolicy policy = {}) : url_(std::move(url)), policy_(policy) {
    const auto scheme = url_.find("://");
    const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = url_.find('/', host_start);
    origin_ = slash == std::string::npos ? url_ : url_.substr(0, slash);
    base_path_ = slash == std::string::npos ? "" : url_.substr(slash);
    while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
    if (origin_.empty() || host_start == origin_.size())
      throw GatewayError(GatewayError::Kind::invalid_request, "invalid backend url " + url_);
  }

  std::string id() const override { return url_; }

  GenerationResult generate(const GenerationRequest& req) override {
    const std::string body = to_json(req).dump();
    auto backoff = policy_.initial_backoff;
    std::string last_failure;
    for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
      const auto started = std::chrono::steady_clock::now();
      httplib::Client client(origin_);
      client.set_connection_timeout(policy_.connect_timeout);
      client.set_read_timeout(policy_.read_timeout);
      client.set_write_timeout(policy_.read_timeout);
      httplib::Headers headers{{"Idempotency-Key", req.request_id}};
      auto res = client.Post(base_path_ + "/v1/generate", headers, body, "application/json");
      if (!res) {
        last_failure = "transport error: " + httplib::to_string(res.error());
      } else if (res->status == 429 || res->status >= 500) {
        last_failure = "HTTP " + std::to_string(res->status);
      } else if (res->status != 200) {
        throw GatewayError(GatewayError::Kind::protocol, "backend replied HTTP " + std::to_string(res->status), attempt,
                           res->body);
      } else {
        auto result = decode(res->body, attempt);
        result.latency_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
        result.attempts = attempt;
        return result;
      }
      if (attempt < policy_.max_attempts) {
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<std::chrono::milliseconds::rep>(static_cast<double>(backoff.count()) * policy_.backoff_multiplier));
      }
    }
    throw GatewayError(GatewayError::Kind::timeout,
                       "backend " + url_ + " failed after " + std::to_string(policy_.max_attempts) +
                           " attempt(s): " + last_failure,
                       policy_.max_attempts);
  }

 private:
  static GenerationResult decode(const std::string& payload, int attempt) {
    auto j = nlohmann::json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw GatewayError(GatewayError::Kind::protocol, "backend reply is not a JSON object", attempt, payload);
    auto text = j.find("text");
    auto backend_id = j.find("backend_id");
    if (text == j.end() || !text->is_string() || backend_id == j.end() || !backend_id->is_string())
      throw GatewayError(GatewayError::Kind::protocol, "backend reply lacks string fields text/backend_id", attempt,
                         payload);
    GenerationResult out;
    out.text = text->get<std::string>();
    out.backend_id = backend_id->get<std::string>();
    if (auto w = j.find("warning"); w != j.end() && w->is_string()) out.warning = w->get<std::string>();
    return out;
  }

  std::string url_;
  std::string origin_;
  std::string base_path_;
  RetryPolicy policy_;
};

/// Sends one request. The reply text is returned verbatim apart from
/// trailing whitespace; an empty reply always carries a warning.
inline GenerationResult request_generation(const GenerationRequest& req, Backend& backend) {
  req.validate();
  auto result = backend.generate(req);
  while (!result.text.empty() && is_space(result.text.back())) result.text.pop_back();
  if (result.text.empty() && !result.warning) result.warning = "backend returned empty text";
  return result;
}

inline constexpr const char* kBackendUrlEnv = "CNFORGE_BACKEND_URL";

/// An explicit URL wins; otherwise CNFORGE_BACKEND_URL; otherwise the stub.
inline std::unique_ptr<Backend> make_backend(const std::optional<std::string>& url = std::nullopt,
                                             RetryPolicy policy = {}) {
  std::string chosen = url.value_or("");
  if (chosen.empty()) {
    if (const char* env = std::getenv(kBackendUrlEnv)) chosen = env;
  }
  if (chosen.empty()) return std::make_unique<StubBackend>();
  return std::make_unique<HttpBackend>(chosen, policy);
}

}  // namespace cnforge
