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

// Distils an evaluated pool into an N-member team: the two bias extremes as
// anchors, then one persona per equal-width bucket of the interior range.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "steer/core_model.hpp"
#include "steer/templates.hpp"

namespace steer {

enum class SlotKind { anchor_min, anchor_max, bucket, fallback };

inline const char* to_string(SlotKind k) noexcept {
  switch (k) {
    case SlotKind::anchor_min: return "anchor_min";
    case SlotKind::anchor_max: return "anchor_max";
    case SlotKind::bucket: return "bucket";
    case SlotKind::fallback: return "fallback";
  }
  return "?";
}

struct TeamSlot {
  std::string persona_id;
  SlotKind kind = SlotKind::bucket;
  std::optional<int> bucket;  // index for bucket / fallback slots
  double bucket_lo = 0.0;
  double bucket_hi = 0.0;
  double bucket_center = 0.0;
};

struct Team {
  std::vector<Persona> members;      // ascending bias, then id
  int n = 0;
  std::vector<TeamSlot> provenance;  // anchors first, then bucket order
};

namespace detail {

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline const Descriptors& descriptors_of(const Persona& p) {
  if (!p.descriptors) throw DomainError("persona '" + p.id + "' has no descriptors");
  return *p.descriptors;
}

// Smaller is better: higher rounded safety, higher rounded coherence, lower
// variance, closer to `center`, then id.
inline auto quality_key(const Persona& p, double center) {
  const auto& d = descriptors_of(p);
  return std::make_tuple(-round2(d.safety), -round2(d.coherence), d.variance,
                         std::abs(d.bias - center), std::cref(p.id));
}

}  // namespace detail

inline Team assemble_team(std::span<const Persona> pool, int n) {
  if (n < 2) throw DomainError("team size must be >= 2");
  if (pool.size() < static_cast<std::size_t>(n))
    throw DomainError("pool has " + std::to_string(pool.size()) + " personas; team size " +
                      std::to_string(n) + " is too large");

  std::vector<const Persona*> sorted;
  for (const auto& p : pool) {
    detail::descriptors_of(p);
    sorted.push_back(&p);
  }
  std::sort(sorted.begin(), sorted.end(), [](const Persona* a, const Persona* b) {
    if (a->descriptors->bias != b->descriptors->bias)
      return a->descriptors->bias < b->descriptors->bias;
    return a->id < b->id;
  });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i]->id == sorted[i - 1]->id)
      throw DomainError("duplicate persona id '" + sorted[i]->id + "' in pool");

  const double lo = sorted.front()->descriptors->bias;
  const double hi = sorted.back()->descriptors->bias;
  if (!(hi > lo))
    throw DomainError("all personas share bias " + format_fixed(lo) +
                      "; the range is degenerate (reduce the team size or accept "
                      "members that differ only by id)");

  std::vector<bool> taken(sorted.size(), false);
  auto best_of = [&](auto&& eligible, double center) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (taken[i] || !eligible(i)) continue;
      if (!best || detail::quality_key(*sorted[i], center) <
                       detail::quality_key(*sorted[*best], center))
        best = i;
    }
    return best;
  };

  Team team;
  team.n = n;
  const auto a_min = *best_of([&](std::size_t i) { return sorted[i]->descriptors->bias == lo; }, lo);
  taken[a_min] = true;
  const auto a_max = *best_of([&](std::size_t i) { return sorted[i]->descriptors->bias == hi; }, hi);
  taken[a_max] = true;
  team.provenance.push_back({sorted[a_min]->id, SlotKind::anchor_min, std::nullopt, lo, lo, lo});
  team.provenance.push_back({sorted[a_max]->id, SlotKind::anchor_max, std::nullopt, hi, hi, hi});

  const int buckets = n - 2;
  if (buckets > 0) {
    const double width = (hi - lo) / buckets;
    auto bucket_of = [&](double b) {
      const auto k = static_cast<int>(std::floor((b - lo) / width));
      return std::clamp(k, 0, buckets - 1);
    };
    auto bounds = [&](int k) {
      const double b_lo = lo + width * k;
      const double b_hi = k == buckets - 1 ? hi : lo + width * (k + 1);
      return std::make_pair(b_lo, b_hi);
    };

    std::vector<std::optional<std::size_t>> pick(static_cast<std::size_t>(buckets));
    // Occupied buckets first; membership uses the original pool, so a bucket
    // is "occupied" regardless of what the anchors took.
    for (int k = 0; k < buckets; ++k) {
      const auto [b_lo, b_hi] = bounds(k);
      const double center = (b_lo + b_hi) / 2.0;
      pick[k] = best_of([&](std::size_t i) { return bucket_of(sorted[i]->descriptors->bias) == k; },
                        center);
      if (pick[k]) {
        taken[*pick[k]] = true;
        team.provenance.push_back({sorted[*pick[k]]->id, SlotKind::bucket, k, b_lo, b_hi, center});
      }
    }
    // Empty buckets, left to right: the nearest unselected persona, ties by
    // quality.
    for (int k = 0; k < buckets; ++k) {
      if (pick[k]) continue;
      const auto [b_lo, b_hi] = bounds(k);
      const double center = (b_lo + b_hi) / 2.0;
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < sorted.size(); ++i)
        if (!taken[i]) nearest = std::min(nearest, std::abs(sorted[i]->descriptors->bias - center));
      const auto chosen = best_of(
          [&](std::size_t i) {
            return std::abs(sorted[i]->descriptors->bias - center) == nearest;
          },
          center);
      taken[*chosen] = true;
      team.provenance.push_back({sorted[*chosen]->id, SlotKind::fallback, k, b_lo, b_hi, center});
    }
  }

  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (taken[i]) team.members.push_back(*sorted[i]);
  return team;
}

}  // namespace steer
