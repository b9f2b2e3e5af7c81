/*
 * Copyright 2026 The steer Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "steer/core_model.hpp"

namespace steer {

// Tally of levels chosen by the personas that rated one case.
struct DecisionDistribution {
  std::vector<long> counts;  // counts[k-1] = raters choosing level k
  long total = 0;

  double probability(int level) const {
    return static_cast<double>(counts.at(static_cast<std::size_t>(level - 1))) /
           static_cast<double>(total);
  }
};

inline DecisionDistribution case_distribution(const RatingMatrix& ratings,
                                              std::string_view case_id,
                                              const OrdinalScale& scale) {
  const std::size_t ci = ratings.require_case(case_id);
  DecisionDistribution d{std::vector<long>(static_cast<std::size_t>(scale.k_levels), 0), 0};
  for (std::size_t pj = 0; pj < ratings.persona_count(); ++pj)
    if (auto r = ratings.at(ci, pj)) {
      require_level(scale, *r);
      ++d.counts[static_cast<std::size_t>(*r - 1)];
      ++d.total;
    }
  if (d.total == 0)
    throw DomainError("case '" + std::string(case_id) + "' has no ratings");
  return d;
}

// Shannon entropy divided by log K, so the result lies in [0, 1].
inline double normalized_entropy(const DecisionDistribution& dist, int k_levels) {
  if (k_levels < 2) throw DomainError("entropy needs K >= 2");
  if (dist.total <= 0) throw DomainError("entropy of an empty distribution");
  long support = 0, first = 0;
  bool equal_counts = true;
  for (long c : dist.counts) {
    if (c < 0) throw DomainError("negative count in distribution");
    if (c == 0) continue;
    if (support++ == 0) first = c;
    equal_counts = equal_counts && c == first;
  }
  const double log_k = std::log(static_cast<double>(k_levels));
  // m equally likely outcomes: H = log m exactly, so uniform tallies give 1.
  if (equal_counts) return std::log(static_cast<double>(support)) / log_k;

  double h = 0.0;
  for (long c : dist.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(dist.total);
    h -= p * std::log(p);
  }
  return std::clamp(h / log_k, 0.0, 1.0);
}

// Population diversity: mean normalized entropy over the ambiguous cases.
inline double mean_ambiguous_entropy(const RatingMatrix& ratings,
                                     std::span<const std::string> ambiguous_cases,
                                     const OrdinalScale& scale) {
  if (ambiguous_cases.empty()) throw DomainError("ambiguous case set is empty");
  double acc = 0.0;
  for (const auto& id : ambiguous_cases)
    acc += normalized_entropy(case_distribution(ratings, id, scale), scale.k_levels);
  return acc / static_cast<double>(ambiguous_cases.size());
}

}  // namespace steer
