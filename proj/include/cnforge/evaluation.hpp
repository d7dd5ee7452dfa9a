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

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cnforge/corpus.hpp"
#include "cnforge/metrics.hpp"
#include "json.hpp"

namespace cnforge {

/// One model output, as written by `cnforge generate`:
/// {"pair_id", "prediction", "knowledge": [sentence, ...]}.
struct Prediction {
  std::string pair_id;
  std::string prediction;
  std::vector<std::string> knowledge;
};

inline nlohmann::ordered_json to_json(const Prediction& p) {
  return {{"pair_id", p.pair_id}, {"prediction", p.prediction}, {"knowledge", p.knowledge}};
}

inline Prediction prediction_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("pair_id") || !j.contains("prediction"))
    throw MetricError("prediction record needs pair_id and prediction");
  Prediction p;
  p.pair_id = j.at("pair_id").get<std::string>();
  p.prediction = j.at("prediction").get<std::string>();
  if (auto kn = j.find("knowledge"); kn != j.end()) {
    if (kn->is_string()) {
      p.knowledge.push_back(kn->get<std::string>());
    } else {
      p.knowledge = kn->get<std::vector<std::string>>();
    }
  }
  return p;
}

inline std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw MetricError("predictions line " + std::to_string(line_no) + " is not JSON");
    try {
      out.push_back(prediction_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw MetricError("predictions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// Joins predictions to the pairs of `split` by pair_id and scores them
/// against the reference CNs; novelty is measured against the train split.
inline EvalRow evaluate_predictions(const PairSet& pairs, std::span<const Prediction> predictions, Split split,
                                    std::string model, EvalOptions options = {}) {
  const auto refs = pairs.in_split(split);
  if (predictions.empty()) throw MetricError("eval: no outputs to evaluate");
  if (refs.size() != predictions.size()) {
    throw MetricError("eval: " + std::to_string(predictions.size()) + " outputs but " + std::to_string(refs.size()) +
                      " " + std::string(to_string(split)) + " pairs");
  }
  std::map<std::string, const HsCnPair*> by_id;
  for (const auto& p : refs) by_id[p.pair_id] = &p;
  std::vector<EvalItem> items;
  items.reserve(predictions.size());
  for (const auto& pred : predictions) {
    auto it = by_id.find(pred.pair_id);
    if (it == by_id.end())
      throw MetricError("eval: output for unknown or duplicate " + std::string(to_string(split)) + " pair " + pred.pair_id);
    EvalItem item;
    item.id = pred.pair_id;
    item.hs = it->second->hs;
    item.generated = pred.prediction;
    for (const auto& s : pred.knowledge) item.knowledge += (item.knowledge.empty() ? "" : " ") + s;
    item.reference = it->second->cn;
    items.push_back(std::move(item));
    by_id.erase(it);
  }
  std::vector<Tokens> training;
  for (const auto& p : pairs.in_split(Split::train)) training.push_back(tokenize(p.cn));
  if (training.empty()) throw MetricError("eval: novelty needs train-split CNs in the dataset");
  return eval_row(std::move(model), items, NoveltyReference(training), options);
}

}  // namespace cnforge
