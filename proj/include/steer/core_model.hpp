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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "steer/error.hpp"

namespace steer {

// A K-level ordinal decision space. `most_urgent_level` fixes which numeric
// end is the conservative one; `midpoint` splits over- from undertriage.
struct OrdinalScale {
  int k_levels = 5;
  int most_urgent_level = 1;
  int midpoint = 3;

  static OrdinalScale make(int k_levels, int most_urgent_level,
                           std::optional<int> midpoint = std::nullopt) {
    OrdinalScale s{k_levels, most_urgent_level,
                   midpoint.value_or((k_levels + 1) / 2)};
    s.validate();
    return s;
  }

  void validate() const {
    if (k_levels < 2) throw DomainError("scale needs at least 2 levels");
    if (most_urgent_level != 1 && most_urgent_level != k_levels)
      throw DomainError("most_urgent_level must be 1 or K");
    if (midpoint < 1 || midpoint > k_levels)
      throw DomainError("midpoint must lie in [1, K]");
  }

  bool contains(int level) const noexcept {
    return level >= 1 && level <= k_levels;
  }

  // Real-valued centre of the scale; the synthetic rater anchors here and
  // persona biases are reported relative to it.
  double center() const noexcept { return (k_levels + 1) / 2.0; }

  // +1 when moving up the numeric scale is more conservative, -1 otherwise.
  int urgency_sign() const noexcept { return most_urgent_level == 1 ? -1 : 1; }

  friend bool operator==(const OrdinalScale&, const OrdinalScale&) = default;
};

inline void require_level(const OrdinalScale& scale, int level) {
  if (!scale.contains(level))
    throw DomainError("level " + std::to_string(level) + " outside [1, " +
                      std::to_string(scale.k_levels) + "]");
}

// Rank 0 is the least conservative level, rank K-1 the most urgent one.
inline int conservativeness_rank(const OrdinalScale& scale, int level) {
  require_level(scale, level);
  return scale.most_urgent_level == 1 ? scale.k_levels - level : level - 1;
}

inline int level_at_rank(const OrdinalScale& scale, int rank) {
  if (rank < 0 || rank >= scale.k_levels)
    throw DomainError("rank " + std::to_string(rank) + " outside [0, K-1]");
  return scale.most_urgent_level == 1 ? scale.k_levels - rank : rank + 1;
}

enum class Triage { overtriage, exact, undertriage };

inline const char* to_string(Triage t) noexcept {
  switch (t) {
    case Triage::overtriage: return "overtriage";
    case Triage::exact: return "exact";
    case Triage::undertriage: return "undertriage";
  }
  return "?";
}

// Overtriage = more urgent than the midpoint, in whichever direction the
// scale counts urgency.
inline Triage classify_triage(const OrdinalScale& scale, int predicted) {
  const int r = conservativeness_rank(scale, predicted);
  const int mid = conservativeness_rank(scale, scale.midpoint);
  if (r > mid) return Triage::overtriage;
  if (r < mid) return Triage::undertriage;
  return Triage::exact;
}

enum class CaseSplit { ambiguous, unambiguous };

struct Case {
  std::string id;
  std::string payload;
  CaseSplit split = CaseSplit::ambiguous;
  std::optional<int> ground_truth;

  void validate(const OrdinalScale& scale) const {
    if (id.empty()) throw DomainError("case id must not be empty");
    if (split == CaseSplit::unambiguous) {
      if (!ground_truth)
        throw DomainError("unambiguous case '" + id + "' lacks ground truth");
      require_level(scale, *ground_truth);
    } else if (ground_truth) {
      throw DomainError("ambiguous case '" + id + "' must not carry ground truth");
    }
  }
};

enum class PersonaOrigin { seed, gap_fill, edge_expand };

struct Descriptors {
  double bias = 0.0;      // scale units, relative to the scale centre
  double variance = 0.0;  // mean squared residual of the additive fit
  double safety = 0.0;    // exact accuracy on unambiguous cases
  double coherence = 0.0; // judge score, 0..4
};

struct Persona {
  std::string id;
  std::string prompt_text;
  PersonaOrigin origin = PersonaOrigin::seed;
  std::optional<double> target_bias;
  std::optional<Descriptors> descriptors;
  int generation_born = 0;

  void validate() const {
    if (id.empty()) throw DomainError("persona id must not be empty");
    if (origin != PersonaOrigin::seed && !target_bias)
      throw DomainError("generated persona '" + id + "' lacks a target bias");
    if (descriptors) {
      const auto& d = *descriptors;
      if (!(d.variance >= 0.0))
        throw DomainError("persona '" + id + "': variance must be >= 0");
      if (!(d.safety >= 0.0 && d.safety <= 1.0))
        throw DomainError("persona '" + id + "': safety must lie in [0, 1]");
      if (!(d.coherence >= 0.0 && d.coherence <= 4.0))
        throw DomainError("persona '" + id + "': coherence must lie in [0, 4]");
    }
  }
};

// Observed decisions over cases x personas. Missing cells are allowed.
class RatingMatrix {
 public:
  RatingMatrix() = default;

  RatingMatrix(std::vector<std::string> case_ids,
               std::vector<std::string> persona_ids, int k_levels)
      : case_ids_(std::move(case_ids)),
        persona_ids_(std::move(persona_ids)),
        k_levels_(k_levels),
        cells_(case_ids_.size() * persona_ids_.size(), 0) {
    if (k_levels_ < 2 || k_levels_ > 255)
      throw DomainError("k_levels must lie in [2, 255]");
    index_ids(case_ids_, case_index_, "case");
    index_ids(persona_ids_, persona_index_, "persona");
  }

  std::size_t case_count() const noexcept { return case_ids_.size(); }
  std::size_t persona_count() const noexcept { return persona_ids_.size(); }
  int k_levels() const noexcept { return k_levels_; }
  const std::vector<std::string>& case_ids() const noexcept { return case_ids_; }
  const std::vector<std::string>& persona_ids() const noexcept { return persona_ids_; }

  std::optional<std::size_t> case_index(std::string_view id) const {
    auto it = case_index_.find(std::string(id));
    if (it == case_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::size_t> persona_index(std::string_view id) const {
    auto it = persona_index_.find(std::string(id));
    if (it == persona_index_.end()) return std::nullopt;
    return it->second;
  }

  void set(std::size_t ci, std::size_t pj, int level) {
    check_indices(ci, pj);
    if (level < 1 || level > k_levels_)
      throw DomainError("rating " + std::to_string(level) + " outside [1, " +
                        std::to_string(k_levels_) + "]");
    cells_[ci * persona_ids_.size() + pj] = static_cast<std::uint8_t>(level);
  }

  void set(std::string_view case_id, std::string_view persona_id, int level) {
    set(require_case(case_id), require_persona(persona_id), level);
  }

  void erase(std::size_t ci, std::size_t pj) {
    check_indices(ci, pj);
    cells_[ci * persona_ids_.size() + pj] = 0;
  }

  std::optional<int> at(std::size_t ci, std::size_t pj) const {
    check_indices(ci, pj);
    const auto v = cells_[ci * persona_ids_.size() + pj];
    if (v == 0) return std::nullopt;
    return static_cast<int>(v);
  }

  std::optional<int> at(std::string_view case_id, std::string_view persona_id) const {
    return at(require_case(case_id), require_persona(persona_id));
  }

  std::size_t entry_count() const noexcept {
    std::size_t n = 0;
    for (auto v : cells_) n += (v != 0);
    return n;
  }

  std::size_t require_case(std::string_view id) const {
    auto i = case_index(id);
    if (!i) throw DomainError("unknown case '" + std::string(id) + "'");
    return *i;
  }
  std::size_t require_persona(std::string_view id) const {
    auto i = persona_index(id);
    if (!i) throw DomainError("unknown persona '" + std::string(id) + "'");
    return *i;
  }

  // Restriction to the listed cases (in the given order), all personas kept.
  RatingMatrix select_cases(std::span<const std::string> ids) const {
    RatingMatrix out(std::vector<std::string>(ids.begin(), ids.end()),
                     persona_ids_, k_levels_);
    for (std::size_t c = 0; c < ids.size(); ++c) {
      const std::size_t src = require_case(ids[c]);
      for (std::size_t p = 0; p < persona_ids_.size(); ++p)
        out.cells_[c * persona_ids_.size() + p] =
            cells_[src * persona_ids_.size() + p];
    }
    return out;
  }

  RatingMatrix select_personas(std::span<const std::string> ids) const {
    RatingMatrix out(case_ids_, std::vector<std::string>(ids.begin(), ids.end()),
                     k_levels_);
    for (std::size_t p = 0; p < ids.size(); ++p) {
      const std::size_t src = require_persona(ids[p]);
      for (std::size_t c = 0; c < case_ids_.size(); ++c)
        out.cells_[c * ids.size() + p] = cells_[c * persona_ids_.size() + src];
    }
    return out;
  }

  friend bool operator==(const RatingMatrix& a, const RatingMatrix& b) {
    return a.k_levels_ == b.k_levels_ && a.case_ids_ == b.case_ids_ &&
           a.persona_ids_ == b.persona_ids_ && a.cells_ == b.cells_;
  }

 private:
  static void index_ids(const std::vector<std::string>& ids,
                        std::unordered_map<std::string, std::size_t>& index,
                        const char* what) {
    index.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (!index.emplace(ids[i], i).second)
        throw DomainError(std::string("duplicate ") + what + " id '" + ids[i] + "'");
  }

  void check_indices(std::size_t ci, std::size_t pj) const {
    if (ci >= case_ids_.size() || pj >= persona_ids_.size())
      throw DomainError("rating cell index out of range");
  }

  std::vector<std::string> case_ids_;
  std::vector<std::string> persona_ids_;
  int k_levels_ = 5;
  std::vector<std::uint8_t> cells_;  // 0 marks a missing rating
  std::unordered_map<std::string, std::size_t> case_index_;
  std::unordered_map<std::string, std::size_t> persona_index_;
};

}  // namespace steer
