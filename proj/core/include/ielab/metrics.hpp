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

// IOB span decoding and strict entity-level scoring.

#ifndef IELAB_METRICS_HPP_
#define IELAB_METRICS_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ielab {

struct EntitySpan {
  std::size_t start = 0;  // half-open [start, end)
  std::size_t end = 0;
  std::string cls;
  bool operator==(const EntitySpan&) const = default;
};

// B-X opens a span, I-X extends an open X span, and an I-X that follows O or
// a span of another class opens a new one. Throws ValidationError naming the
// index of a malformed tag.
std::vector<EntitySpan> decode_iob(std::span<const std::string> tags);

// Inverse of decode_iob for non-overlapping spans; uncovered tokens are O.
std::vector<std::string> encode_iob(std::span<const EntitySpan> spans, std::size_t length);

struct ClassScore {
  std::size_t tp = 0, fp = 0, fn = 0;
  std::size_t support = 0;  // gold span count
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct ClassReport {
  std::map<std::string, ClassScore> classes;
  // Support-weighted mean of per-class F1 over classes with gold support.
  double weighted_f1 = 0.0;
  // Classes that were predicted but never appear in the gold spans.
  std::vector<std::string> unsupported;

  nlohmann::json to_json() const;
};

// Per-class counts accumulated over all documents. Throws DimensionError when
// document or token counts differ.
ClassReport entity_scores(const std::vector<std::vector<std::string>>& pred,
                          const std::vector<std::vector<std::string>>& gold);

// Recomputes ratios and the weighted average from tp/fp/fn/support.
void finalize_report(ClassReport& report);

}  // namespace ielab

#endif  // IELAB_METRICS_HPP_
