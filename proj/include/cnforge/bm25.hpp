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
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cnforge/checksum.hpp"
#include "cnforge/corpus.hpp"
#include "cnforge/error.hpp"
#include "cnforge/query.hpp"
#include "cnforge/text.hpp"
#include "json.hpp"

namespace cnforge {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  friend bool operator==(const Bm25Params&, const Bm25Params&) = default;
};

struct Posting {
  std::uint32_t doc = 0;
  std::uint32_t tf = 0;

  friend bool operator==(const Posting&, const Posting&) = default;
};

struct ScoredArticle {
  std::string article_id;
  double score = 0.0;
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& message) : Error("index", message) {}
};

inline constexpr std::uint32_t kIndexFormatVersion = 1;
inline constexpr std::size_t kDefaultTopArticles = 25;

/// Okapi BM25 over a single field (title tokens followed by body tokens).
///
/// Documents are numbered by ascending article_id, so the index (and its
/// serialized form) depends only on the article contents, not on the order
/// they were ingested in. Immutable after build; concurrent search/score
/// calls are safe.
class Bm25Index {
 public:
  static Bm25Index build(const ArticleSet& articles, Bm25Params params = {}) {
    if (articles.empty()) throw IndexError("cannot build an index over an empty article set");
    if (!(params.k1 >= 0.0) || !(params.b >= 0.0 && params.b <= 1.0))
      throw IndexError("invalid BM25 parameters: need k1 >= 0 and 0 <= b <= 1");
    std::vector<const Article*> sorted;
    sorted.reserve(articles.size());
    for (const auto& a : articles.items()) sorted.push_back(&a);
    std::sort(sorted.begin(), sorted.end(),
              [](const Article* x, const Article* y) { return x->article_id < y->article_id; });

    Bm25Index index;
    index.params_ = params;
    std::uint64_t total = 0;
    for (std::uint32_t doc = 0; doc < sorted.size(); ++doc) {
      const Article& a = *sorted[doc];
      Tokens tokens = tokenize(a.title);
      for (auto& t : tokenize(a.body)) tokens.push_back(std::move(t));
      std::unordered_map<std::string, std::uint32_t> tf;
      for (const auto& t : tokens) ++tf[t];
      for (auto& [term, f] : tf) index.postings_[term].push_back({doc, f});
      index.doc_ids_.push_back(a.article_id);
      index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
      total += tokens.size();
    }
    index.finish(total);
    return index;
  }

  std::size_t n_docs() const { return doc_ids_.size(); }
  double avg_doc_len() const { return avg_doc_len_; }
  const Bm25Params& params() const { return params_; }
  std::size_t n_terms() const { return postings_.size(); }

  /// Postings of `term`, ordered by document number. Empty for unknown terms.
  std::span<const Posting> postings(const std::string& term) const {
    auto it = postings_.find(term);
    if (it == postings_.end()) return {};
    return it->second;
  }

  const std::string& article_id(std::uint32_t doc) const { return doc_ids_.at(doc); }
  std::uint32_t doc_length(std::uint32_t doc) const { return doc_lengths_.at(doc); }

  std::optional<std::uint32_t> doc_of(std::string_view article_id) const {
    auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), article_id);
    if (it == doc_ids_.end() || *it != article_id) return std::nullopt;
    return static_cast<std::uint32_t>(it - doc_ids_.begin());
  }

  /// ln(1 + (N - df + 0.5) / (df + 0.5)); never negative.
  double idf(std::size_t df) const {
    const double n = static_cast<double>(n_docs());
    const double d = static_cast<double>(df);
    return std::log1p((n - d + 0.5) / (d + 0.5));
  }

  /// Contribution of one query term occurrence to a document.
  double term_score(std::size_t df, std::uint32_t tf, std::uint32_t doc_len) const {
    const double f = static_cast<double>(tf);
    const double norm = avg_doc_len_ > 0.0 ? static_cast<double>(doc_len) / avg_doc_len_ : 0.0;
    return idf(df) * f * (params_.k1 + 1.0) / (f + params_.k1 * (1.0 - params_.b + params_.b * norm));
  }

  /// BM25 score of one article. Repeated query terms count once per repeat.
  double score(std::span<const std::string> query_terms, std::string_view article_id) const {
    auto doc = doc_of(article_id);
    if (!doc) throw IndexError("unknown article_id " + std::string(article_id));
    double total = 0.0;
    for (const auto& term : query_terms) {
      auto list = postings(term);
      auto it = std::lower_bound(list.begin(), list.end(), *doc,
                                 [](const Posting& p, std::uint32_t d) { return p.doc < d; });
      if (it == list.end() || it->doc != *doc) continue;
      total += term_score(list.size(), it->tf, doc_lengths_[*doc]);
    }
    return total;
  }

  /// Top-k articles with a positive score, by score descending then
  /// article_id ascending. Scores accumulate term by term in query order,
  /// so each reported score equals score() for the same article exactly.
  std::vector<ScoredArticle> search(std::span<const std::string> query_terms,
                                    std::size_t k = kDefaultTopArticles) const {
    if (k == 0) throw IndexError("k must be positive");
    std::vector<double> acc(n_docs(), 0.0);
    std::vector<std::uint32_t> touched;
    for (const auto& term : query_terms) {
      auto list = postings(term);
      for (const auto& p : list) {
        if (acc[p.doc] == 0.0) touched.push_back(p.doc);
        acc[p.doc] += term_score(list.size(), p.tf, doc_lengths_[p.doc]);
      }
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    std::vector<std::uint32_t> hits;
    for (auto d : touched)
      if (acc[d] > 0.0) hits.push_back(d);
    // Doc numbers follow article_id order, so comparing them breaks ties by id.
    auto better = [&acc](std::uint32_t x, std::uint32_t y) {
      if (acc[x] != acc[y]) return acc[x] > acc[y];
      return x < y;
    };
    const std::size_t n = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), better);
    std::vector<ScoredArticle> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({doc_ids_[hits[i]], acc[hits[i]]});
    return out;
  }

  std::vector<ScoredArticle> search(const Query& query, std::size_t k = kDefaultTopArticles) const {
    const Tokens terms = query_terms(query);
    return search(terms, k);
  }

  // On-disk layout: manifest.json, postings.bin, docs.bin. Integers and
  // doubles are stored little-endian; terms are written in byte order.

  struct Serialized {
    std::string postings;
    std::string docs;
  };

  Serialized serialize() const {
    Serialized out;
    Writer pw(out.postings);
    pw.bytes("CNFP");
    pw.u32(kIndexFormatVersion);
    std::vector<const std::string*> terms;
    terms.reserve(postings_.size());
    for (const auto& [term, list] : postings_) terms.push_back(&term);
    std::sort(terms.begin(), terms.end(), [](const std::string* a, const std::string* b) { return *a < *b; });
    pw.u64(terms.size());
    for (const auto* term : terms) {
      const auto& list = postings_.at(*term);
      pw.str(*term);
      pw.u64(list.size());
      for (const auto& p : list) {
        pw.u32(p.doc);
        pw.u32(p.tf);
      }
    }
    Writer dw(out.docs);
    dw.bytes("CNFD");
    dw.u32(kIndexFormatVersion);
    dw.f64(params_.k1);
    dw.f64(params_.b);
    dw.u64(doc_ids_.size());
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
      dw.str(doc_ids_[i]);
      dw.u32(doc_lengths_[i]);
    }
    return out;
  }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    const auto bin = serialize();
    Fnv1a64 h;
    h.update(bin.postings);
    h.update(bin.docs);
    nlohmann::ordered_json manifest;
    manifest["format_version"] = kIndexFormatVersion;
    manifest["n_docs"] = n_docs();
    manifest["n_terms"] = n_terms();
    manifest["k1"] = params_.k1;
    manifest["b"] = params_.b;
    manifest["checksum"] = "fnv1a64:" + h.hex();
    detail::write_file(dir / "postings.bin", bin.postings, "index");
    detail::write_file(dir / "docs.bin", bin.docs, "index");
    detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n", "index");
  }

  static Bm25Index load(const std::filesystem::path& dir) {
    auto manifest = nlohmann::json::parse(detail::read_file(dir / "manifest.json", "index"), nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object()) throw IndexError("malformed index manifest");
    const auto version = manifest.value("format_version", 0U);
    if (version != kIndexFormatVersion) {
      throw IndexError("index format_version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kIndexFormatVersion) + ")");
    }
    Serialized bin{detail::read_file(dir / "postings.bin", "index"), detail::read_file(dir / "docs.bin", "index")};
    Fnv1a64 h;
    h.update(bin.postings);
    h.update(bin.docs);
    if (manifest.value("checksum", std::string()) != "fnv1a64:" + h.hex())
      throw IndexError("index checksum mismatch in " + dir.string());
    return deserialize(bin);
  }

  static Bm25Index deserialize(const Serialized& bin) {
    Bm25Index index;
    Reader dr(bin.docs);
    dr.magic("CNFD");
    dr.version();
    index.params_.k1 = dr.f64();
    index.params_.b = dr.f64();
    const auto n_docs = dr.u64();
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < n_docs; ++i) {
      index.doc_ids_.push_back(dr.str());
      index.doc_lengths_.push_back(dr.u32());
      total += index.doc_lengths_.back();
      if (i > 0 && !(index.doc_ids_[i - 1] < index.doc_ids_[i])) throw IndexError("doc table is not sorted");
    }
    dr.end();
    Reader pr(bin.postings);
    pr.magic("CNFP");
    pr.version();
    const auto n_terms = pr.u64();
    for (std::uint64_t i = 0; i < n_terms; ++i) {
      auto term = pr.str();
      const auto n = pr.u64();
      std::vector<Posting> list;
      list.reserve(n);
      for (std::uint64_t j = 0; j < n; ++j) {
        Posting p{pr.u32(), pr.u32()};
        if (p.doc >= n_docs) throw IndexError("posting references unknown document");
        list.push_back(p);
      }
      index.postings_.emplace(std::move(term), std::move(list));
    }
    pr.end();
    index.finish(total);
    return index;
  }

 private:
  void finish(std::uint64_t total_len) {
    avg_doc_len_ = doc_ids_.empty() ? 0.0 : static_cast<double>(total_len) / static_cast<double>(doc_ids_.size());
  }

  class Writer {
   public:
    explicit Writer(std::string& out) : out_(out) {}
    void bytes(std::string_view b) { out_.append(b); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
      u32(static_cast<std::uint32_t>(s.size()));
      bytes(s);
    }

   private:
    void le(std::uint64_t v, int n) {
      for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::string& out_;
  };

  class Reader {
   public:
    explicit Reader(std::string_view in) : in_(in) {}
    void magic(std::string_view m) {
      if (take(m.size()) != m) throw IndexError("bad index file magic");
    }
    void version() {
      const auto v = u32();
      if (v != kIndexFormatVersion) throw IndexError("index file format_version " + std::to_string(v) + " is not supported");
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() { return std::string(take(u32())); }
    void end() const {
      if (pos_ != in_.size()) throw IndexError("trailing bytes in index file");
    }

   private:
    std::string_view take(std::size_t n) {
      if (in_.size() - pos_ < n) throw IndexError("truncated index file");
      auto s = in_.substr(pos_, n);
      pos_ += n;
      return s;
    }
    std::uint64_t le(int n) {
      auto s = take(static_cast<std::size_t>(n));
      std::uint64_t v = 0;
      for (int i = n - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
      return v;
    }
    std::string_view in_;
    std::size_t pos_ = 0;
  };

  Bm25Params params_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_len_ = 0.0;
};

}  // namespace cnforge
