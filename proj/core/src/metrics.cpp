// Copyright 2026 The ielab Authors.
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

#include "ielab/metrics.hpp"

#include <set>
#include <tuple>

#include "ielab/docstream.hpp"
#include "ielab/error.hpp"

namespace ielab {

std::vector<EntitySpan> decode_iob(std::span<const std::string> tags) {
  std::vector<EntitySpan> spans;
  bool open = false;
  EntitySpan cur;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    if (!is_valid_label(tag)) {
      throw ValidationError("malformed IOB tag '" + tag + "' at index " + std::to_string(i));
    }
    if (tag == "O") {
      if (open) spans.push_back(cur);
      open = false;
      continue;
    }
    const std::string cls = tag.substr(2);
    if (tag[0] == 'I' && open && cur.cls == cls) {
      cur.end = i + 1;
      continue;
    }
    if (open) spans.push_back(cur);
    cur = {i, i + 1, cls};
    open = true;
  }
  if (open) spans.push_back(cur);
  return spans;
}

std::vector<std::string> encode_iob(std::span<const EntitySpan> spans, std::size_t length) {
  std::vector<std::string> tags(length, "O");
  for (const EntitySpan& s : spans) {
    if (s.start >= s.end || s.end > length) {
      throw IndexError("span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                       ") outside a sequence of " + std::to_string(length));
    }
    for (std::size_t i = s.start; i < s.end; ++i) {
      if (tags[i] != "O") throw ValidationError("overlapping spans at index " + std::to_string(i));
      tags[i] = (i == s.start ? "B-" : "I-") + s.cls;
    }
  }
  return tags;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

void finalize_report(ClassReport& report) {
  double weighted = 0.0;
  std::size_t total = 0;
  report.unsupported.clear();
  for (auto& [cls, s] : report.classes) {
    s.precision = ratio(s.tp, s.tp + s.fp);
    s.recall = ratio(s.tp, s.tp + s.fn);
    const double denom = s.precision + s.recall;
    s.f1 = denom == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
    if (s.support == 0) {
      report.unsupported.push_back(cls);
      continue;
    }
    weighted += static_cast<double>(s.support) * s.f1;
    total += s.support;
  }
  report.weighted_f1 = total == 0 ? 0.0 : weighted / static_cast<double>(total);
}

ClassReport entity_scores(const std::vector<std::vector<std::string>>& pred,
                          const std::vector<std::vector<std::string>>& gold) {
  if (pred.size() != gold.size()) {
    throw DimensionError("entity_scores: " + std::to_string(pred.size()) +
                         " predicted documents vs " + std::to_string(gold.size()) + " gold");
  }
  ClassReport report;
  using Key = std::tuple<std::size_t, std::size_t, std::string>;
  for (std::size_t d = 0; d < pred.size(); ++d) {
    if (pred[d].size() != gold[d].size()) {
      throw DimensionError("entity_scores: document " + std::to_string(d) + " has " +
                           std::to_string(pred[d].size()) + " predicted tags vs " +
                           std::to_string(gold[d].size()) + " gold");
    }
    std::set<Key> g, p;
    for (const auto& s : decode_iob(gold[d])) g.emplace(s.start, s.end, s.cls);
    for (const auto& s : decode_iob(pred[d])) p.emplace(s.start, s.end, s.cls);
    for (const Key& k : g) {
      ClassScore& c = report.classes[std::get<2>(k)];
      ++c.support;
      if (p.count(k)) ++c.tp; else ++c.fn;
    }
    for (const Key& k : p) {
      if (!g.count(k)) ++report.classes[std::get<2>(k)].fp;
    }
  }
  finalize_report(report);
  return report;
}

nlohmann::json ClassReport::to_json() const {
  nlohmann::json classes_json = nlohmann::json::object();
  for (const auto& [cls, s] : classes) {
    classes_json[cls] = {{"tp", s.tp},         {"fp", s.fp},     {"fn", s.fn},
                         {"support", s.support}, {"precision", s.precision},
                         {"recall", s.recall},   {"f1", s.f1}};
  }
  nlohmann::json j = {{"classes", classes_json}, {"weighted_f1", weighted_f1}};
  if (!unsupported.empty()) j["predicted_without_support"] = unsupported;
  if (classes.empty()) j["note"] = "no gold or predicted entity spans";
  return j;
}

}  // namespace ielab
