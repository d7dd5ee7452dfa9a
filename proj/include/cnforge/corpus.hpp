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
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cnforge/checksum.hpp"
#include "cnforge/error.hpp"
#include "cnforge/text.hpp"
#include "json.hpp"

namespace cnforge {

enum class Source { wiki, news, other };
enum class Split { train, dev, test };
enum class Origin { original, paraphrase, translated };

inline constexpr std::array<Source, 3> kSources{Source::wiki, Source::news, Source::other};
inline constexpr std::array<Split, 3> kSplits{Split::train, Split::dev, Split::test};

inline std::string_view to_string(Source s) {
  switch (s) {
    case Source::wiki: return "wiki";
    case Source::news: return "news";
    case Source::other: return "other";
  }
  return "other";
}

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

inline std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::original: return "original";
    case Origin::paraphrase: return "paraphrase";
    case Origin::translated: return "translated";
  }
  return "original";
}

inline std::optional<Source> parse_source(std::string_view s) {
  for (auto v : kSources)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

inline std::optional<Split> parse_split(std::string_view s) {
  for (auto v : kSplits)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

inline std::optional<Origin> parse_origin(std::string_view s) {
  for (auto v : {Origin::original, Origin::paraphrase, Origin::translated})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

struct Article {
  std::string article_id;
  std::string title;
  std::string body;
  Source source = Source::other;

  friend bool operator==(const Article&, const Article&) = default;
};

struct Sentence {
  std::string article_id;
  std::size_t sent_index = 0;
  std::string text;
  Tokens tokens;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct HsCnPair {
  std::string pair_id;
  std::string hs;
  std::string cn;
  Split split = Split::train;
  Origin origin = Origin::original;
  std::string target;

  friend bool operator==(const HsCnPair&, const HsCnPair&) = default;
};

/// One rejected input record. `line` is 1-based.
struct RecordError {
  std::size_t line = 0;
  std::string message;
};

/// Raised when any record of a stream fails validation. Every offending
/// record is listed, not just the first.
class IngestError : public Error {
 public:
  explicit IngestError(std::vector<RecordError> records)
      : Error("ingest", summarize(records)), records_(std::move(records)) {}

  const std::vector<RecordError>& records() const { return records_; }

 private:
  static std::string summarize(const std::vector<RecordError>& records) {
    std::ostringstream os;
    os << records.size() << " invalid record(s)";
    for (const auto& r : records) os << "\n  line " << r.line << ": " << r.message;
    return os.str();
  }

  std::vector<RecordError> records_;
};

/// Immutable once built; safe to share across threads.
class ArticleSet {
 public:
  ArticleSet() = default;

  /// Throws IngestError on a duplicate id or an empty body.
  explicit ArticleSet(std::vector<Article> items) {
    std::vector<RecordError> errors;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (auto msg = check(items[i]); !msg.empty()) {
        errors.push_back({i + 1, msg});
      } else {
        insert(std::move(items[i]));
      }
    }
    if (!errors.empty()) throw IngestError(std::move(errors));
  }

  const std::vector<Article>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t count(Source s) const { return counts_[static_cast<std::size_t>(s)]; }

  const Article* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &items_[it->second];
  }

  friend bool operator==(const ArticleSet& a, const ArticleSet& b) { return a.items_ == b.items_; }

 private:
  friend ArticleSet ingest_articles(std::istream& in);

  std::string check(const Article& a) const {
    if (a.article_id.empty()) return "empty article id";
    if (trim(a.body).empty()) return "empty body for article " + a.article_id;
    if (by_id_.count(a.article_id)) return "duplicate article_id " + a.article_id;
    return {};
  }

  void insert(Article a) {
    by_id_.emplace(a.article_id, items_.size());
    ++counts_[static_cast<std::size_t>(a.source)];
    items_.push_back(std::move(a));
  }

  std::vector<Article> items_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::array<std::size_t, 3> counts_{};
};

/// HS-CN pairs in input order. Immutable once built.
class PairSet {
 public:
  PairSet() = default;
  explicit PairSet(std::vector<HsCnPair> items) : items_(std::move(items)) {
    for (const auto& p : items_) ++counts_[static_cast<std::size_t>(p.split)];
  }

  const std::vector<HsCnPair>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t count(Split s) const { return counts_[static_cast<std::size_t>(s)]; }

  std::vector<HsCnPair> in_split(Split s) const {
    std::vector<HsCnPair> out;
    for (const auto& p : items_)
      if (p.split == s) out.push_back(p);
    return out;
  }

  friend bool operator==(const PairSet& a, const PairSet& b) { return a.items_ == b.items_; }

 private:
  std::vector<HsCnPair> items_;
  std::array<std::size_t, 3> counts_{};
};

/// Reads one JSON object per line: {"id", "title", "body", "source"}.
/// "title" defaults to "" and "source" to "other". Blank lines are skipped.
inline ArticleSet ingest_articles(std::istream& in) {
  ArticleSet set;
  std::vector<RecordError> errors;
  std::map<std::string, std::vector<std::size_t>> duplicates;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      errors.push_back({line_no, "not a JSON object"});
      continue;
    }
    Article a;
    auto text_field = [&](const char* key, std::string& dst, bool required) -> bool {
      auto it = record.find(key);
      if (it == record.end() || it->is_null()) {
        if (required) errors.push_back({line_no, std::string("missing field \"") + key + "\""});
        return !required;
      }
      if (!it->is_string()) {
        errors.push_back({line_no, std::string("field \"") + key + "\" is not a string"});
        return false;
      }
      dst = it->get<std::string>();
      return true;
    };
    if (!text_field("id", a.article_id, true)) continue;
    if (!text_field("body", a.body, true)) continue;
    if (!text_field("title", a.title, false)) continue;
    std::string source = "other";
    if (!text_field("source", source, false)) continue;
    if (auto s = parse_source(source)) {
      a.source = *s;
    } else {
      errors.push_back({line_no, "unknown source \"" + source + "\""});
      continue;
    }
    if (a.article_id.empty()) {
      errors.push_back({line_no, "empty article id"});
      continue;
    }
    if (trim(a.body).empty()) {
      errors.push_back({line_no, "empty body for article " + a.article_id});
      continue;
    }
    if (set.find(a.article_id)) {
      duplicates[a.article_id].push_back(line_no);
      continue;
    }
    set.insert(std::move(a));
  }
  for (const auto& [id, lines] : duplicates) {
    std::string where;
    for (auto l : lines) where += (where.empty() ? "" : ", ") + std::to_string(l);
    errors.push_back({lines.front(), "duplicate article_id " + id + " (lines " + where + ")"});
  }
  if (!errors.empty()) {
    std::stable_sort(errors.begin(), errors.end(),
                     [](const RecordError& a, const RecordError& b) { return a.line < b.line; });
    throw IngestError(std::move(errors));
  }
  return set;
}

inline void write_articles(std::ostream& out, const ArticleSet& set) {
  for (const auto& a : set.items()) {
    nlohmann::ordered_json j;
    j["id"] = a.article_id;
    j["title"] = a.title;
    j["body"] = a.body;
    j["source"] = to_string(a.source);
    out << j.dump() << '\n';
  }
}

namespace detail {

inline std::string tsv_escape(std::string_view field) {
  std::string out;
  for (char c : field) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string tsv_unescape(std::string_view field) {
  std::string out;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field[i] != '\\' || i + 1 == field.size()) {
      out.push_back(field[i]);
      continue;
    }
    switch (field[++i]) {
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      case '\\': out.push_back('\\'); break;
      default:
        out.push_back('\\');
        out.push_back(field[i]);
    }
  }
  return out;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace detail

inline constexpr std::string_view kPairHeader = "pair_id\ths\tcn\tsplit\torigin\ttarget";

/// Reads the pair TSV. The first non-empty line must be the header.
/// Backslash escapes \t \n \r \\ are decoded inside fields.
inline PairSet ingest_pairs(std::istream& in) {
  std::vector<HsCnPair> items;
  std::vector<RecordError> errors;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!header_seen) {
      if (line != kPairHeader) {
        errors.push_back({line_no, "expected header \"pair_id\\ths\\tcn\\tsplit\\torigin\\ttarget\""});
        break;
      }
      header_seen = true;
      continue;
    }
    auto fields = detail::split_tabs(line);
    if (fields.size() != 6) {
      errors.push_back({line_no, "expected 6 tab-separated fields, got " + std::to_string(fields.size())});
      continue;
    }
    HsCnPair p;
    p.pair_id = detail::tsv_unescape(fields[0]);
    p.hs = detail::tsv_unescape(fields[1]);
    p.cn = detail::tsv_unescape(fields[2]);
    p.target = detail::tsv_unescape(fields[5]);
    auto split = parse_split(fields[3]);
    auto origin = parse_origin(fields[4]);
    if (p.pair_id.empty()) {
      errors.push_back({line_no, "empty pair_id"});
    } else if (trim(p.hs).empty() || trim(p.cn).empty()) {
      errors.push_back({line_no, "empty hs or cn in pair " + p.pair_id});
    } else if (!split) {
      errors.push_back({line_no, "unknown split \"" + std::string(fields[3]) + "\""});
    } else if (!origin) {
      errors.push_back({line_no, "unknown origin \"" + std::string(fields[4]) + "\""});
    } else if (auto [it, fresh] = seen.emplace(p.pair_id, line_no); !fresh) {
      errors.push_back({line_no, "duplicate pair_id " + p.pair_id + " (first on line " +
                                     std::to_string(it->second) + ")"});
    } else {
      p.split = *split;
      p.origin = *origin;
      items.push_back(std::move(p));
    }
  }
  if (!errors.empty()) throw IngestError(std::move(errors));
  return PairSet(std::move(items));
}

inline void write_pairs(std::ostream& out, const PairSet& set) {
  out << kPairHeader << '\n';
  for (const auto& p : set.items()) {
    out << detail::tsv_escape(p.pair_id) << '\t' << detail::tsv_escape(p.hs) << '\t'
        << detail::tsv_escape(p.cn) << '\t' << to_string(p.split) << '\t' << to_string(p.origin)
        << '\t' << detail::tsv_escape(p.target) << '\n';
  }
}

/// Segments an article body and tokenizes every sentence.
inline std::vector<Sentence> sentences_of(const Article& article,
                                          const WordList& abbreviations = default_abbreviations()) {
  std::vector<Sentence> out;
  auto texts = segment_sentences(article.body, abbreviations);
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Tokens tokens = tokenize(texts[i]);
    out.push_back(Sentence{article.article_id, i, std::move(texts[i]), std::move(tokens)});
  }
  return out;
}

// Snapshot directory: manifest.json, articles.jsonl and (optionally) pairs.tsv.

inline constexpr int kSnapshotFormatVersion = 1;

struct Snapshot {
  ArticleSet articles;
  PairSet pairs;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path, const char* stage) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(stage, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes, const char* stage) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(stage, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(stage, "short write to " + path.string());
}

}  // namespace detail

inline void write_snapshot(const std::filesystem::path& dir, const ArticleSet& articles,
                           const PairSet& pairs = {}) {
  std::filesystem::create_directories(dir);
  std::ostringstream a;
  write_articles(a, articles);
  std::ostringstream p;
  write_pairs(p, pairs);
  Fnv1a64 h;
  h.update(a.str());
  h.update(p.str());
  nlohmann::ordered_json manifest;
  manifest["format_version"] = kSnapshotFormatVersion;
  manifest["article_count"] = articles.size();
  manifest["pair_count"] = pairs.size();
  manifest["checksum"] = "fnv1a64:" + h.hex();
  detail::write_file(dir / "articles.jsonl", a.str(), "ingest");
  detail::write_file(dir / "pairs.tsv", p.str(), "ingest");
  detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n", "ingest");
}

inline Snapshot read_snapshot(const std::filesystem::path& dir) {
  auto manifest = nlohmann::json::parse(detail::read_file(dir / "manifest.json", "ingest"), nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) throw Error("ingest", "malformed snapshot manifest");
  const int version = manifest.value("format_version", 0);
  if (version != kSnapshotFormatVersion) {
    throw Error("ingest", "snapshot format_version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kSnapshotFormatVersion) + ")");
  }
  const auto a = detail::read_file(dir / "articles.jsonl", "ingest");
  const auto p = detail::read_file(dir / "pairs.tsv", "ingest");
  Fnv1a64 h;
  h.update(a);
  h.update(p);
  if (manifest.value("checksum", std::string()) != "fnv1a64:" + h.hex())
    throw Error("ingest", "snapshot checksum mismatch in " + dir.string());
  std::istringstream as(a);
  std::istringstream ps(p);
  Snapshot snap{ingest_articles(as), ingest_pairs(ps)};
  if (manifest.value("article_count", std::size_t{0}) != snap.articles.size())
    throw Error("ingest", "snapshot article_count does not match articles.jsonl");
  return snap;
}

/// Loads articles from either a snapshot directory or a JSONL file.
inline ArticleSet load_articles(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return read_snapshot(path).articles;
  std::ifstream in(path);
  if (!in) throw Error("ingest", "cannot open " + path.string());
  return ingest_articles(in);
}

inline PairSet load_pairs(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return read_snapshot(path).pairs;
  std::ifstream in(path);
  if (!in) throw Error("ingest", "cannot open " + path.string());
  return ingest_pairs(in);
}

}  // namespace cnforge
