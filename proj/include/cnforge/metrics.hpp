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
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cnforge/error.hpp"
#include "cnforge/text.hpp"
#include "json.hpp"

namespace cnforge {

class MetricError : public Error {
 public:
  explicit MetricError(const std::string& message) : Error("eval", message) {}
};

using TokenSpanView = std::span<const std::string>;

/// Token-level longest common subsequence length, O(|a|·|b|) time and
/// O(min(|a|,|b|)) memory.
inline std::size_t lcs_length(TokenSpanView a, TokenSpanView b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (const auto& x : a) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = (x == b[j - 1]) ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[b.size()];
}

/// ROUGE-L F1. Zero when either side is empty or nothing is shared. This is
/// the single kernel behind both sentence selection and output evaluation.
inline double rouge_l_f1(TokenSpanView candidate, TokenSpanView reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const auto lcs = lcs_length(candidate, reference);
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

namespace detail {

inline constexpr char kGramSep = '\x1f';

inline std::string ngram_key(TokenSpanView tokens, std::size_t start, std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) key.push_back(kGramSep);
    key += tokens[start + i];
  }
  return key;
}

inline std::unordered_map<std::string, std::size_t> ngram_counts(TokenSpanView tokens, std::size_t n) {
  std::unordered_map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[ngram_key(tokens, i, n)];
  return counts;
}

inline std::unordered_set<std::string> ngram_set(TokenSpanView tokens, std::size_t n) {
  std::unordered_set<std::string> set;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) set.insert(ngram_key(tokens, i, n));
  return set;
}

}  // namespace detail

/// Corpus-level BLEU with unigram and bigram precision, no smoothing:
/// sqrt(p1 · p2) · exp(min(0, 1 − r/c)) with clipped counts pooled over all
/// pairs. Zero when no bigram matches anywhere.
inline double bleu2(std::span<const Tokens> candidates, std::span<const Tokens> references) {
  if (candidates.size() != references.size())
    throw MetricError("bleu2: " + std::to_string(candidates.size()) + " candidates vs " +
                      std::to_string(references.size()) + " references");
  if (candidates.empty()) throw MetricError("bleu2: empty corpus");
  std::size_t matches[2] = {0, 0};
  std::size_t totals[2] = {0, 0};
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += candidates[i].size();
    ref_len += references[i].size();
    for (std::size_t n = 1; n <= 2; ++n) {
      if (candidates[i].size() < n) continue;
      totals[n - 1] += candidates[i].size() - n + 1;
      const auto ref = detail::ngram_counts(references[i], n);
      for (const auto& [gram, count] : detail::ngram_counts(candidates[i], n)) {
        auto it = ref.find(gram);
        if (it != ref.end()) matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (totals[0] == 0 || totals[1] == 0 || matches[1] == 0) return 0.0;
  const double p1 = static_cast<double>(matches[0]) / static_cast<double>(totals[0]);
  const double p2 = static_cast<double>(matches[1]) / static_cast<double>(totals[1]);
  const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)));
  return bp * std::sqrt(p1 * p2);
}

/// Token-set Jaccard similarity; two empty sets count as identical.
inline double jaccard(const std::vector<std::string>& sorted_a, const std::vector<std::string>& sorted_b) {
  if (sorted_a.empty() && sorted_b.empty()) return 1.0;
  std::size_t common = 0;
  auto i = sorted_a.begin();
  auto j = sorted_b.begin();
  while (i != sorted_a.end() && j != sorted_b.end()) {
    if (*i == *j) {
      ++common;
      ++i;
      ++j;
    } else if (*i < *j) {
      ++i;
    } else {
      ++j;
    }
  }
  const auto uni = sorted_a.size() + sorted_b.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

inline std::vector<std::string> token_set(TokenSpanView tokens) {
  std::vector<std::string> set(tokens.begin(), tokens.end());
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
  return set;
}

/// Training CNs pre-reduced to sorted token sets for novelty scoring.
class NoveltyReference {
 public:
  explicit NoveltyReference(std::span<const Tokens> training_cns) {
    if (training_cns.empty()) throw MetricError("novelty: empty training set");
    sets_.reserve(training_cns.size());
    for (const auto& cn : training_cns) sets_.push_back(token_set(cn));
  }

  /// 1 − max Jaccard(candidate, training CN).
  double novelty(TokenSpanView candidate) const {
    const auto cand = token_set(candidate);
    double best = 0.0;
    for (const auto& s : sets_) best = std::max(best, jaccard(cand, s));
    return 1.0 - best;
  }

 private:
  std::vector<std::vector<std::string>> sets_;
};

inline double novelty(TokenSpanView candidate, std::span<const Tokens> training_cns) {
  return NoveltyReference(training_cns).novelty(candidate);
}

inline constexpr std::size_t kRepetitionWindow = 1000;

/// Repetition rate of a generated corpus. The texts are concatenated and cut
/// into non-overlapping windows (the last may be partial). Per window and
/// order n = 1..4, r_n is the share of n-gram types seen more than once;
/// r_n is averaged over the windows that contain any n-gram of that order.
/// RR = 100 · (r_1 · r_2 · r_3 · r_4)^(1/4).
inline double repetition_rate(std::span<const Tokens> texts, std::size_t window = kRepetitionWindow) {
  if (window == 0) throw MetricError("repetition_rate: window must be positive");
  Tokens all;
  for (const auto& t : texts) all.insert(all.end(), t.begin(), t.end());
  if (all.empty()) throw MetricError("repetition_rate: empty corpus");
  double product = 1.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    double sum = 0.0;
    std::size_t windows = 0;
    for (std::size_t start = 0; start < all.size(); start += window) {
      const auto len = std::min(window, all.size() - start);
      const auto counts = detail::ngram_counts(TokenSpanView(all).subspan(start, len), n);
      if (counts.empty()) continue;
      std::size_t repeated = 0;
      for (const auto& [gram, c] : counts)
        if (c > 1) ++repeated;
      sum += static_cast<double>(repeated) / static_cast<double>(counts.size());
      ++windows;
    }
    product *= windows == 0 ? 0.0 : sum / static_cast<double>(windows);
  }
  return 100.0 * std::pow(product, 0.25);
}

/// Share of the candidate's distinct n-grams that also occur in the
/// knowledge. Candidates shorter than n score 0.
inline double kn_overlap(TokenSpanView candidate, TokenSpanView knowledge, std::size_t n) {
  if (n < 1 || n > 3) throw MetricError("kn_overlap: n must be 1, 2 or 3");
  if (candidate.size() < n) return 0.0;
  const auto cand = detail::ngram_set(candidate, n);
  const auto kn = detail::ngram_set(knowledge, n);
  std::size_t shared = 0;
  for (const auto& g : cand)
    if (kn.count(g)) ++shared;
  return static_cast<double>(shared) / static_cast<double>(cand.size());
}

/// Kendall tau-b over all item pairs: (C − D) / sqrt(U_a · U_b), where U_a
/// and U_b count the pairs left untied by each ranking. Each factor equals
/// C + D plus the pairs tied only on the other side.
inline double kendall_tau_b(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw MetricError("kendall_tau_b: rankings differ in length");
  if (a.size() < 2) throw MetricError("kendall_tau_b: need at least two items");
  long long concordant = 0;
  long long discordant = 0;
  long long untied_a = 0;
  long long untied_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const int sa = (a[i] < a[j]) - (a[i] > a[j]);
      const int sb = (b[i] < b[j]) - (b[i] > b[j]);
      if (sa != 0) ++untied_a;
      if (sb != 0) ++untied_b;
      if (sa * sb > 0) ++concordant;
      if (sa * sb < 0) ++discordant;
    }
  }
  if (untied_a == 0 || untied_b == 0) throw MetricError("kendall_tau_b: undefined for an all-tied ranking");
  return static_cast<double>(concordant - discordant) /
         std::sqrt(static_cast<double>(untied_a) * static_cast<double>(untied_b));
}

// ---------------------------------------------------------------------------
// Reports

/// One generated output to evaluate.
struct EvalItem {
  std::string id;
  std::string hs;
  std::string generated;
  std::string knowledge;
  std::optional<std::string> reference;
};

/// One model's row of an evaluation report.
struct EvalRow {
  std::string model;
  double novelty = 0.0;
  double rr = 0.0;
  std::optional<double> bleu2;
  std::optional<double> rouge_l;
  double avg_words = 0.0;
  double avg_sents = 0.0;
  double kn_overlap_1 = 0.0;
  double kn_overlap_2 = 0.0;
  double kn_overlap_3 = 0.0;
  std::size_t n_items = 0;
  std::vector<std::string> warnings;
};

struct EvalReport {
  std::string query_config;
  std::string split;
  std::size_t n_items = 0;
  std::vector<EvalRow> rows;
};

struct EvalOptions {
  bool reference_metrics = true;
};

inline EvalRow eval_row(std::string model, std::span<const EvalItem> items, const NoveltyReference& training,
                        EvalOptions options = {}) {
  if (items.empty()) throw MetricError("eval: no outputs to evaluate");
  EvalRow row;
  row.model = std::move(model);
  row.n_items = items.size();
  std::vector<Tokens> generated;
  std::vector<Tokens> references;
  generated.reserve(items.size());
  double novelty_sum = 0.0;
  double rouge_sum = 0.0;
  double words = 0.0;
  double sents = 0.0;
  double overlap[3] = {0.0, 0.0, 0.0};
  std::size_t short_items[3] = {0, 0, 0};
  for (const auto& item : items) {
    generated.push_back(tokenize(item.generated));
    const Tokens& cand = generated.back();
    const Tokens kn = tokenize(item.knowledge);
    novelty_sum += training.novelty(cand);
    words += static_cast<double>(cand.size());
    sents += static_cast<double>(segment_sentences(item.generated).size());
    for (std::size_t n = 1; n <= 3; ++n) {
      if (cand.size() < n) ++short_items[n - 1];
      overlap[n - 1] += kn_overlap(cand, kn, n);
    }
    if (options.reference_metrics) {
      if (!item.reference) throw MetricError("eval: missing reference for item " + item.id);
      references.push_back(tokenize(*item.reference));
      rouge_sum += rouge_l_f1(cand, references.back());
    }
  }
  const double n = static_cast<double>(items.size());
  row.novelty = novelty_sum / n;
  bool any_tokens = false;
  for (const auto& g : generated) any_tokens = any_tokens || !g.empty();
  if (any_tokens) {
    row.rr = repetition_rate(generated);
  } else {
    row.warnings.push_back("all outputs are empty; rr reported as 0");
  }
  if (options.reference_metrics) {
    row.bleu2 = bleu2(generated, references);
    row.rouge_l = rouge_sum / n;
  }
  row.avg_words = words / n;
  row.avg_sents = sents / n;
  row.kn_overlap_1 = overlap[0] / n;
  row.kn_overlap_2 = overlap[1] / n;
  row.kn_overlap_3 = overlap[2] / n;
  for (std::size_t k = 0; k < 3; ++k) {
    if (short_items[k] > 0) {
      row.warnings.push_back(std::to_string(short_items[k]) + " output(s) shorter than " + std::to_string(k + 1) +
                             " token(s); kn_overlap_" + std::to_string(k + 1) + " counted as 0");
    }
  }
  return row;
}

inline EvalRow eval_row(std::string model, std::span<const EvalItem> items, std::span<const Tokens> training_cns,
                        EvalOptions options = {}) {
  return eval_row(std::move(model), items, NoveltyReference(training_cns), options);
}

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

}  // namespace detail

/// TSV with a provenance comment line followed by a header row.
inline std::string to_tsv(const EvalReport& report) {
  std::ostringstream os;
  os << "# query_config=" << report.query_config << "\tsplit=" << report.split << "\tn_items=" << report.n_items
     << '\n';
  os << "model\tnovelty\trr\tbleu2\trouge_l\tavg_words\tavg_sents\tkn_overlap_1\tkn_overlap_2\tkn_overlap_3\n";
  for (const auto& r : report.rows) {
    os << r.model << '\t' << detail::fixed(r.novelty) << '\t' << detail::fixed(r.rr, 2) << '\t'
       << (r.bleu2 ? detail::fixed(*r.bleu2) : "NA") << '\t' << (r.rouge_l ? detail::fixed(*r.rouge_l) : "NA")
       << '\t' << detail::fixed(r.avg_words, 2) << '\t' << detail::fixed(r.avg_sents, 2) << '\t'
       << detail::fixed(r.kn_overlap_1) << '\t' << detail::fixed(r.kn_overlap_2) << '\t'
       << detail::fixed(r.kn_overlap_3) << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json to_json(const EvalRow& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["novelty"] = r.novelty;
  j["rr"] = r.rr;
  j["bleu2"] = r.bleu2 ? nlohmann::ordered_json(*r.bleu2) : nlohmann::ordered_json();
  j["rouge_l"] = r.rouge_l ? nlohmann::ordered_json(*r.rouge_l) : nlohmann::ordered_json();
  j["avg_words"] = r.avg_words;
  j["avg_sents"] = r.avg_sents;
  j["kn_overlap_1"] = r.kn_overlap_1;
  j["kn_overlap_2"] = r.kn_overlap_2;
  j["kn_overlap_3"] = r.kn_overlap_3;
  j["n_items"] = r.n_items;
  j["warnings"] = r.warnings;
  return j;
}

inline nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) rows.push_back(to_json(r));
  nlohmann::ordered_json j;
  j["metadata"] = {{"query_config", report.query_config}, {"split", report.split}, {"n_items", report.n_items}};
  j["rows"] = std::move(rows);
  return j;
}

}  // namespace cnforge
