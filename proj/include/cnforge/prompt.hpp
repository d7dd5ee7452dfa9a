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

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cnforge/error.hpp"
#include "cnforge/text.hpp"
#include "json.hpp"

namespace cnforge {

inline constexpr std::string_view kHsEnd = "[HS_end_token]";
inline constexpr std::string_view kKnEnd = "[KN_end_token]";
inline constexpr std::string_view kCnEnd = "[CN_end_token]";
inline constexpr std::string_view kKpEnd = "[KP_end_token]";
inline constexpr std::array<std::string_view, 4> kBoundaryTokens{kHsEnd, kKnEnd, kCnEnd, kKpEnd};

/// cn_train: HS [HS_end_token] KN [KN_end_token] CN [CN_end_token]
/// cn_infer: HS [HS_end_token] KN [KN_end_token]
/// kp_train: HS [HS_end_token] KP [KP_end_token]
/// kp_infer: HS [HS_end_token]
enum class PromptKind { cn_train, cn_infer, kp_train, kp_infer };

inline std::string_view to_string(PromptKind k) {
  switch (k) {
    case PromptKind::cn_train: return "cn_train";
    case PromptKind::cn_infer: return "cn_infer";
    case PromptKind::kp_train: return "kp_train";
    case PromptKind::kp_infer: return "kp_infer";
  }
  return "cn_train";
}

inline std::optional<PromptKind> parse_prompt_kind(std::string_view s) {
  for (auto k : {PromptKind::cn_train, PromptKind::cn_infer, PromptKind::kp_train, PromptKind::kp_infer})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

/// Segment limits in toolkit tokens. The keyphrase target shares cn_max.
struct TruncationPolicy {
  std::size_t hs_max = 70;
  std::size_t kn_max = 256;
  std::size_t cn_max = 256;
};

/// Byte range [begin, end) of a named segment inside PromptSequence::text.
struct PromptSegment {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t tokens = 0;
};

struct PromptSequence {
  PromptKind kind = PromptKind::cn_infer;
  std::string text;
  std::vector<PromptSegment> segments;

  std::string_view segment(std::string_view name) const {
    for (const auto& s : segments)
      if (s.name == name) return std::string_view(text).substr(s.begin, s.end - s.begin);
    return {};
  }
};

class PromptError : public Error {
 public:
  explicit PromptError(const std::string& message, std::string token = {})
      : Error("prompt", message), token_(std::move(token)) {}

  /// The boundary token the error is about, if any.
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

/// Whitespace-normalizes `text` and keeps its first `max_tokens` toolkit
/// tokens, cutting right after the last kept token's surface form.
inline std::string truncate_tokens(std::string_view text, std::size_t max_tokens) {
  std::string normalized = normalize_whitespace(text);
  const auto spans = tokenize_spans(normalized);
  if (spans.size() <= max_tokens) return normalized;
  if (max_tokens == 0) return {};
  normalized.resize(spans[max_tokens - 1].end);
  return normalized;
}

namespace detail {

inline void reject_boundary_literals(std::string_view segment, std::string_view name) {
  for (auto token : kBoundaryTokens) {
    if (segment.find(token) != std::string_view::npos)
      throw PromptError(std::string(name) + " segment contains the reserved literal " + std::string(token),
                        std::string(token));
  }
}

class PromptBuilder {
 public:
  explicit PromptBuilder(PromptKind kind) { seq_.kind = kind; }

  void segment(std::string_view name, std::string_view body) {
    if (!body.empty()) {
      separate();
      const auto begin = seq_.text.size();
      seq_.text.append(body);
      seq_.segments.push_back({std::string(name), begin, seq_.text.size(), tokenize_spans(body).size()});
    } else {
      seq_.segments.push_back({std::string(name), seq_.text.size(), seq_.text.size(), 0});
    }
  }

  void boundary(std::string_view token) {
    separate();
    seq_.text.append(token);
  }

  PromptSequence finish() && { return std::move(seq_); }

 private:
  void separate() {
    if (!seq_.text.empty()) seq_.text.push_back(' ');
  }
  PromptSequence seq_;
};

inline void check_policy(const TruncationPolicy& policy) {
  if (policy.hs_max == 0 || policy.kn_max == 0 || policy.cn_max == 0)
    throw PromptError("truncation limits must be positive");
}

}  // namespace detail

/// HS [HS_end_token] KN [KN_end_token] (CN [CN_end_token] when `cn` is
/// given). KN sentences are joined by single spaces in rank order; each
/// segment is head-truncated to its policy limit.
inline PromptSequence assemble_cn(std::string_view hs, std::span<const std::string> kn_sentences,
                                  const std::optional<std::string>& cn = std::nullopt,
                                  const TruncationPolicy& policy = {}) {
  detail::check_policy(policy);
  if (trim(hs).empty()) throw PromptError("hs must be non-empty");
  detail::reject_boundary_literals(hs, "hs");
  std::string kn;
  for (const auto& s : kn_sentences) {
    detail::reject_boundary_literals(s, "kn");
    auto normalized = normalize_whitespace(s);
    if (normalized.empty()) continue;
    if (!kn.empty()) kn.push_back(' ');
    kn += normalized;
  }
  detail::PromptBuilder b(cn ? PromptKind::cn_train : PromptKind::cn_infer);
  b.segment("hs", truncate_tokens(hs, policy.hs_max));
  b.boundary(kHsEnd);
  b.segment("kn", truncate_tokens(kn, policy.kn_max));
  b.boundary(kKnEnd);
  if (cn) {
    detail::reject_boundary_literals(*cn, "cn");
    b.segment("cn", truncate_tokens(*cn, policy.cn_max));
    b.boundary(kCnEnd);
  }
  return std::move(b).finish();
}

/// HS [HS_end_token] kp1, kp2, ... [KP_end_token]
inline PromptSequence assemble_kp(std::string_view hs, std::span<const std::string> keyphrases,
                                  const TruncationPolicy& policy = {}) {
  detail::check_policy(policy);
  if (trim(hs).empty()) throw PromptError("hs must be non-empty");
  if (keyphrases.empty()) throw PromptError("keyphrase list must be non-empty");
  detail::reject_boundary_literals(hs, "hs");
  std::string kp;
  for (const auto& k : keyphrases) {
    detail::reject_boundary_literals(k, "kp");
    auto normalized = normalize_whitespace(k);
    if (normalized.empty()) throw PromptError("empty keyphrase");
    if (normalized.find(',') != std::string::npos) throw PromptError("keyphrase contains a comma: " + normalized);
    if (!kp.empty()) kp += ", ";
    kp += normalized;
  }
  detail::PromptBuilder b(PromptKind::kp_train);
  b.segment("hs", truncate_tokens(hs, policy.hs_max));
  b.boundary(kHsEnd);
  b.segment("kp", truncate_tokens(kp, policy.cn_max));
  b.boundary(kKpEnd);
  return std::move(b).finish();
}

/// HS [HS_end_token], the input to a keyphrase generator.
inline PromptSequence assemble_kp_infer(std::string_view hs, const TruncationPolicy& policy = {}) {
  detail::check_policy(policy);
  if (trim(hs).empty()) throw PromptError("hs must be non-empty");
  detail::reject_boundary_literals(hs, "hs");
  detail::PromptBuilder b(PromptKind::kp_infer);
  b.segment("hs", truncate_tokens(hs, policy.hs_max));
  b.boundary(kHsEnd);
  return std::move(b).finish();
}

/// Segments recovered from a serialized sequence. `unterminated` is set when
/// the final target segment (CN or KP) has no closing boundary token.
struct ParsedPrompt {
  std::map<std::string, std::string> segments;
  bool unterminated = false;

  const std::string& at(const std::string& name) const { return segments.at(name); }
};

/// Inverse of the assemble_* functions. Missing, duplicated, misplaced or
/// foreign boundary tokens raise a PromptError naming the token. A missing
/// final target token is tolerated and reported via `unterminated`.
inline ParsedPrompt parse_prompt(std::string_view text, PromptKind kind) {
  struct Part {
    std::string_view token;
    std::string name;  // segment closed by this token
    bool optional_end;
  };
  std::vector<Part> parts;
  switch (kind) {
    case PromptKind::cn_train: parts = {{kHsEnd, "hs", false}, {kKnEnd, "kn", false}, {kCnEnd, "cn", true}}; break;
    case PromptKind::cn_infer: parts = {{kHsEnd, "hs", false}, {kKnEnd, "kn", false}}; break;
    case PromptKind::kp_train: parts = {{kHsEnd, "hs", false}, {kKpEnd, "kp", true}}; break;
    case PromptKind::kp_infer: parts = {{kHsEnd, "hs", false}}; break;
  }
  for (auto token : kBoundaryTokens) {
    const auto first = text.find(token);
    if (first == std::string_view::npos) continue;
    const bool expected = std::any_of(parts.begin(), parts.end(), [&](const Part& p) { return p.token == token; });
    if (!expected)
      throw PromptError(std::string(token) + " is not valid in a " + std::string(to_string(kind)) + " sequence",
                        std::string(token));
    if (text.find(token, first + token.size()) != std::string_view::npos)
      throw PromptError("duplicated boundary token " + std::string(token), std::string(token));
  }
  ParsedPrompt out;
  std::size_t pos = 0;
  for (const auto& part : parts) {
    const auto at = text.find(part.token, pos);
    if (at == std::string_view::npos) {
      if (part.optional_end && text.find(part.token) == std::string_view::npos) {
        out.segments[part.name] = std::string(trim(text.substr(pos)));
        out.unterminated = true;
        return out;
      }
      throw PromptError(text.find(part.token) == std::string_view::npos
                            ? "missing boundary token " + std::string(part.token)
                            : "boundary token " + std::string(part.token) + " is out of order",
                        std::string(part.token));
    }
    out.segments[part.name] = std::string(trim(text.substr(pos, at - pos)));
    pos = at + part.token.size();
  }
  if (!trim(text.substr(pos)).empty())
    throw PromptError("unexpected text after " + std::string(parts.back().token), std::string(parts.back().token));
  return out;
}

/// A generated continuation with its end token stripped.
struct Continuation {
  std::string text;
  bool terminated = false;
};

/// Cuts a backend reply at `end_token`. Without the token the whole reply
/// is kept and flagged unterminated.
inline Continuation parse_continuation(std::string_view reply, std::string_view end_token) {
  const auto at = reply.find(end_token);
  if (at == std::string_view::npos) return {std::string(trim(reply)), false};
  return {std::string(trim(reply.substr(0, at))), true};
}

inline nlohmann::ordered_json to_json(const PromptSequence& seq) {
  nlohmann::ordered_json segments = nlohmann::ordered_json::object();
  for (const auto& s : seq.segments) {
    segments[s.name] = {{"begin", s.begin}, {"end", s.end}, {"tokens", s.tokens}};
  }
  return {{"kind", to_string(seq.kind)}, {"text", seq.text}, {"segments", std::move(segments)}};
}

}  // namespace cnforge
