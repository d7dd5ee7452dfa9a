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

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "cnforge/error.hpp"
#include "json.hpp"

namespace cnforge {

/// Produces the timestamps stamped on run records.
using Clock = std::function<std::string()>;

/// ISO-8601 UTC wall-clock time with millisecond precision.
inline Clock system_clock() {
  return [] {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return std::string(buf);
  };
}

/// Deterministic tick counter ("tick-000001", ...) for reproducible runs.
inline Clock logical_clock() {
  auto counter = std::make_shared<std::size_t>(0);
  auto mutex = std::make_shared<std::mutex>();
  return [counter, mutex] {
    std::lock_guard lock(*mutex);
    char buf[32];
    std::snprintf(buf, sizeof buf, "tick-%06zu", ++*counter);
    return std::string(buf);
  };
}

/// Append-only JSONL store of pipeline run records keyed by run_id. A
/// record is immutable once appended. All operations take one lock, so
/// reads and writes are linearizable.
class RunJournal {
 public:
  explicit RunJournal(std::optional<std::filesystem::path> path = std::nullopt, Clock clock = system_clock())
      : path_(std::move(path)), clock_(std::move(clock)) {
    if (!path_) return;
    if (std::filesystem::exists(*path_)) {
      std::ifstream in(*path_);
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto record = nlohmann::ordered_json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.contains("run_id"))
          throw Error("journal", "malformed journal line " + std::to_string(line_no) + " in " + path_->string());
        remember(std::move(record));
      }
    }
    out_.open(*path_, std::ios::app);
    if (!out_) throw Error("journal", "cannot open journal " + path_->string());
  }

  std::string now() {
    std::lock_guard lock(mutex_);
    return clock_();
  }

  std::string next_run_id() {
    std::lock_guard lock(mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "run-%06zu", ++last_id_);
    return buf;
  }

  void append(const nlohmann::ordered_json& record) {
    std::lock_guard lock(mutex_);
    const auto id = record.at("run_id").get<std::string>();
    if (records_.count(id)) throw Error("journal", "run " + id + " is already recorded");
    if (out_.is_open()) {
      out_ << record.dump() << '\n';
      out_.flush();
      if (!out_) throw Error("journal", "journal write failed");
    }
    remember(record);
  }

  std::optional<nlohmann::ordered_json> find(const std::string& run_id) const {
    std::lock_guard lock(mutex_);
    auto it = records_.find(run_id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
  }

 private:
  void remember(nlohmann::ordered_json record) {
    const auto id = record.at("run_id").get<std::string>();
    unsigned long n = 0;
    if (std::sscanf(id.c_str(), "run-%lu", &n) == 1 && n > last_id_) last_id_ = n;
    records_[id] = std::move(record);
  }

  std::optional<std::filesystem::path> path_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::ofstream out_;
  std::map<std::string, nlohmann::ordered_json> records_;
  std::size_t last_id_ = 0;
};

}  // namespace cnforge
