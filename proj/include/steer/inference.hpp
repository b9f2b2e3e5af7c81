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

// The conservativeness dial: sort member outputs from least to most
// conservative and return the one at rank floor(P / 100 * (N - 1)).

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "steer/core_model.hpp"

namespace steer {

struct MemberOutput {
  std::string persona_id;
  double bias = 0.0;
  int level = 0;
  std::string rationale;
};

struct EnsembleOutput {
  std::string case_id;
  std::vector<MemberOutput> members;
};

struct PercentileSelection {
  int level = 0;
  std::size_t rank = 0;
  std::string persona_id;
};

// Rank index for percentile P over N outputs.
inline std::size_t percentile_rank_index(double percentile, std::size_t n) {
  if (n == 0) throw DomainError("percentile selection over zero outputs");
  if (!(percentile >= 0.0 && percentile <= 100.0))
    throw DomainError("percentile must lie in [0, 100]");
  // P * (N - 1) is exact for integer P, so the division rounds correctly.
  const double k = std::floor(percentile * static_cast<double>(n - 1) / 100.0);
  return std::min(static_cast<std::size_t>(k), n - 1);
}

// Least conservative first; equal levels by ascending bias, then id.
inline std::vector<MemberOutput> sort_by_conservativeness(std::span<const MemberOutput> outputs,
                                                          const OrdinalScale& scale) {
  std::vector<std::pair<int, MemberOutput>> keyed;
  keyed.reserve(outputs.size());
  for (const auto& o : outputs) keyed.emplace_back(conservativeness_rank(scale, o.level), o);
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    if (a.second.bias != b.second.bias) return a.second.bias < b.second.bias;
    return a.second.persona_id < b.second.persona_id;
  });
  std::vector<MemberOutput> out;
  out.reserve(keyed.size());
  for (auto& [rank, o] : keyed) out.push_back(std::move(o));
  return out;
}

inline PercentileSelection percentile_select(const EnsembleOutput& outputs, double percentile,
                                             const OrdinalScale& scale) {
  if (outputs.members.empty()) throw DomainError("percentile selection over zero outputs");
  const std::size_t k = percentile_rank_index(percentile, outputs.members.size());
  const auto sorted = sort_by_conservativeness(outputs.members, scale);
  return {sorted[k].level, k, sorted[k].persona_id};
}

// One selection per grid value; the grid must be ascending.
inline std::vector<std::pair<double, PercentileSelection>> sweep_percentiles(
    const EnsembleOutput& outputs, std::span<const double> grid, const OrdinalScale& scale) {
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw DomainError("percentile grid must be sorted ascending");
  if (outputs.members.empty()) throw DomainError("percentile selection over zero outputs");
  const auto sorted = sort_by_conservativeness(outputs.members, scale);
  std::vector<std::pair<double, PercentileSelection>> out;
  out.reserve(grid.size());
  for (double p : grid) {
    const std::size_t k = percentile_rank_index(p, sorted.size());
    out.push_back({p, {sorted[k].level, k, sorted[k].persona_id}});
  }
  return out;
}

// Per-level tally of the member outputs (index 0 is level 1).
inline std::vector<int> level_histogram(const EnsembleOutput& outputs, const OrdinalScale& scale) {
  std::vector<int> counts(static_cast<std::size_t>(scale.k_levels), 0);
  for (const auto& m : outputs.members) {
    require_level(scale, m.level);
    ++counts[static_cast<std::size_t>(m.level - 1)];
  }
  return counts;
}

}  // namespace steer
