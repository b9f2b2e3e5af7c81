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

// Planning of new personas: gap filling between bias neighbours and edge
// expansion past the current extremes, plus post-hoc targeting statistics.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "steer/core_model.hpp"
#include "steer/templates.hpp"

namespace steer {

enum class GenerationKind { gap_fill, edge_expand };
enum class EdgeDirection { conservative, lenient };

inline const char* to_string(GenerationKind k) noexcept {
  return k == GenerationKind::gap_fill ? "gap_fill" : "edge_expand";
}
inline const char* to_string(EdgeDirection d) noexcept {
  return d == EdgeDirection::conservative ? "conservative" : "lenient";
}

// Sign of a bias shift in `direction`: conservative points toward the most
// urgent level.
inline int bias_sign(EdgeDirection direction, const OrdinalScale& scale) noexcept {
  const int s = scale.urgency_sign();
  return direction == EdgeDirection::conservative ? s : -s;
}

struct PersonaRef {
  std::string id;
  std::string prompt_text;
  double bias = 0.0;
};

struct GenerationRequest {
  std::string id;
  GenerationKind kind = GenerationKind::gap_fill;
  double target_bias = 0.0;
  std::vector<PersonaRef> references;
  std::optional<EdgeDirection> direction;
  std::pair<double, double> reference_range{0.0, 0.0};  // pool (min, max) bias
  std::string rendered_prompt;
};

struct Gap {
  double left_bias = 0.0;
  double right_bias = 0.0;
  double width = 0.0;
  double target = 0.0;
  std::size_t left_index = 0;  // positions in the sorted input
  std::size_t right_index = 0;
};

struct GapReport {
  std::vector<Gap> gaps;  // widest first, ties leftmost first
};

inline GapReport find_gaps(std::span<const double> sorted_biases) {
  if (!std::is_sorted(sorted_biases.begin(), sorted_biases.end()))
    throw DomainError("find_gaps: biases must be sorted ascending");
  GapReport report;
  for (std::size_t i = 0; i + 1 < sorted_biases.size(); ++i) {
    const double lo = sorted_biases[i], hi = sorted_biases[i + 1];
    if (hi > lo) report.gaps.push_back({lo, hi, hi - lo, lo + (hi - lo) / 2.0, i, i + 1});
  }
  if (report.gaps.empty()) throw DomainError("find_gaps: need at least 2 distinct biases");
  std::stable_sort(report.gaps.begin(), report.gaps.end(),
                   [](const Gap& a, const Gap& b) { return a.width > b.width; });
  return report;
}

struct GenerationRatios {
  double gap_filling = 0.7;
  double edge_expansion = 0.3;

  void validate() const {
    if (gap_filling < 0.0 || edge_expansion < 0.0 ||
        std::abs(gap_filling + edge_expansion - 1.0) > 1e-9)
      throw DomainError("generation ratios must be non-negative and sum to 1");
  }
};

// Distance past the current extreme for edge targets: half the current range,
// never less than a quarter scale unit.
inline double edge_step(double min_bias, double max_bias) noexcept {
  return std::max(0.5 * (max_bias - min_bias), 0.25);
}

// `sorted_pool` is the evaluated pool sorted by ascending bias; `gaps` must
// index into it. Request ids are `<id_prefix><NNN>`.
inline std::vector<GenerationRequest> plan_generation(
    const GapReport& gaps, std::span<const PersonaRef> sorted_pool, int budget,
    const GenerationRatios& ratios, const OrdinalScale& scale,
    const std::string& id_prefix = "req-") {
  if (budget < 0) throw DomainError("generation budget must be >= 0");
  ratios.validate();
  if (budget == 0) return {};
  if (sorted_pool.empty()) throw DomainError("cannot plan generation for an empty pool");

  const double lo = sorted_pool.front().bias;
  const double hi = sorted_pool.back().bias;
  int n_gap = static_cast<int>(std::lround(ratios.gap_filling * budget));
  if (gaps.gaps.empty()) n_gap = 0;
  const int n_edge = budget - n_gap;

  std::vector<GenerationRequest> out;
  out.reserve(static_cast<std::size_t>(budget));
  auto next_id = [&] {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03zu", out.size() + 1);
    return id_prefix + buf;
  };

  for (int s = 0; s < n_gap; ++s) {
    const Gap& g = gaps.gaps[static_cast<std::size_t>(s) % gaps.gaps.size()];
    GenerationRequest r;
    r.id = next_id();
    r.kind = GenerationKind::gap_fill;
    r.target_bias = g.target;
    r.references = {sorted_pool[g.left_index], sorted_pool[g.right_index]};
    r.reference_range = {lo, hi};
    out.push_back(std::move(r));
  }

  const double step = edge_step(lo, hi);
  for (int s = 0; s < n_edge; ++s) {
    const auto dir = s % 2 == 0 ? EdgeDirection::conservative : EdgeDirection::lenient;
    const int sign = bias_sign(dir, scale);
    GenerationRequest r;
    r.id = next_id();
    r.kind = GenerationKind::edge_expand;
    r.direction = dir;
    r.target_bias = sign < 0 ? lo - step : hi + step;
    r.references = {sign < 0 ? sorted_pool.front() : sorted_pool.back()};
    r.reference_range = {lo, hi};
    out.push_back(std::move(r));
  }
  return out;
}

struct GenerationTemplates {
  PromptTemplate gap_fill{std::string(default_templates::kGapFill), "gap_fill"};
  PromptTemplate edge_expand{std::string(default_templates::kEdgeExpand), "edge_expand"};
  std::string role = "triage clinician";
  std::string setting = "emergency department";
  std::string conservative_guidance{default_templates::kConservativeGuidance};
  std::string lenient_guidance{default_templates::kLenientGuidance};
};

inline std::string render_request(const GenerationRequest& request,
                                  const GenerationTemplates& templates,
                                  const OrdinalScale& scale) {
  std::string refs;
  for (const auto& ref : request.references) {
    if (!refs.empty()) refs += "\n\n";
    refs += "Reference persona (offset " + format_fixed(ref.bias) + "):\n" + ref.prompt_text;
  }
  const bool urgent_low = scale.most_urgent_level == 1;
  static constexpr const char* kMoreUrgent =
      "the persona rates cases as more urgent than the panel does (the conservative side).";
  static constexpr const char* kLessUrgent =
      "the persona rates cases as less urgent than the panel does (the lenient side).";
  std::map<std::string, std::string, std::less<>> values{
      {"role", templates.role},
      {"setting", templates.setting},
      {"target_bias", format_fixed(request.target_bias)},
      {"reference_personas", refs},
      {"negative_meaning", urgent_low ? kMoreUrgent : kLessUrgent},
      {"positive_meaning", urgent_low ? kLessUrgent : kMoreUrgent},
  };

  if (request.kind == GenerationKind::gap_fill) {
    templates.gap_fill.require({"target_bias"});
    if (request.references.size() != 2)
      throw DomainError("gap-fill request '" + request.id + "' needs two references");
    values["start_bias"] = format_fixed(request.references[0].bias);
    values["end_bias"] = format_fixed(request.references[1].bias);
    return templates.gap_fill.render(values);
  }

  templates.edge_expand.require({"target_bias"});
  if (!request.direction || request.references.size() != 1)
    throw DomainError("edge request '" + request.id + "' needs a direction and one reference");
  const bool conservative = *request.direction == EdgeDirection::conservative;
  values["direction"] = to_string(*request.direction);
  values["extreme_bias"] = format_fixed(request.references[0].bias);
  values["direction_guidance"] =
      conservative ? templates.conservative_guidance : templates.lenient_guidance;
  return templates.edge_expand.render(values);
}

enum class TargetingCategory { excellent, good, acceptable, poor };

inline const char* to_string(TargetingCategory c) noexcept {
  switch (c) {
    case TargetingCategory::excellent: return "excellent";
    case TargetingCategory::good: return "good";
    case TargetingCategory::acceptable: return "acceptable";
    case TargetingCategory::poor: return "poor";
  }
  return "?";
}

// Boundaries belong to the upper band: 0.2 is good, 0.5 still good.
inline TargetingCategory categorize_targeting_error(double error) {
  if (!std::isfinite(error) || error < 0.0) throw DomainError("targeting error must be finite and >= 0");
  if (error < 0.2) return TargetingCategory::excellent;
  if (error <= 0.5) return TargetingCategory::good;
  if (error <= 1.0) return TargetingCategory::acceptable;
  return TargetingCategory::poor;
}

struct TargetingScore {
  double error = 0.0;
  TargetingCategory category = TargetingCategory::excellent;
};

inline TargetingScore score_targeting(double target, double actual) {
  if (!std::isfinite(target) || !std::isfinite(actual))
    throw DomainError("targeting scores need finite values");
  const double error = std::abs(actual - target);
  return {error, categorize_targeting_error(error)};
}

struct EdgeExpansionScore {
  bool reached_decile = false;
  double extension = 0.0;
};

// `previous_range` is the pool (min, max) bias when the request was made.
inline EdgeExpansionScore score_edge_expansion(std::pair<double, double> previous_range,
                                               EdgeDirection direction, double actual,
                                               const OrdinalScale& scale) {
  const auto [lo, hi] = previous_range;
  if (!(hi > lo)) throw DomainError("edge expansion needs a non-degenerate previous range");
  const double decile = 0.1 * (hi - lo);
  if (bias_sign(direction, scale) < 0)
    return {actual <= lo + decile, std::max(0.0, lo - actual)};
  return {actual >= hi - decile, std::max(0.0, actual - hi)};
}

}  // namespace steer
