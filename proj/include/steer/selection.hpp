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

// Sequential feasibility cascade: safety, then coherence, then variance
// pruning inside clusters of similar bias.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "steer/core_model.hpp"

namespace steer {

struct SelectionConfig {
  double safety_percentile = 0.8;
  double safety_threshold = 0.9;
  double coherence_percentile = 0.85;
  double variance_percentile = 0.85;
  int min_cluster_size = 4;
  std::optional<double> cluster_delta;  // pre-frozen clustering threshold

  void validate() const {
    for (double p : {safety_percentile, coherence_percentile, variance_percentile})
      if (!(p > 0.0 && p <= 1.0)) throw DomainError("selection percentiles must lie in (0, 1]");
    if (min_cluster_size < 2) throw DomainError("min_cluster_size must be >= 2");
    if (cluster_delta && !(*cluster_delta > 0.0))
      throw DomainError("cluster_delta must be positive");
  }
};

enum class SelectionStage { evaluation, safety, coherence, variance };

inline const char* to_string(SelectionStage s) noexcept {
  switch (s) {
    case SelectionStage::evaluation: return "evaluation";
    case SelectionStage::safety: return "safety";
    case SelectionStage::coherence: return "coherence";
    case SelectionStage::variance: return "variance";
  }
  return "?";
}

struct Removal {
  std::string persona_id;
  SelectionStage stage = SelectionStage::safety;
  double metric = 0.0;     // the persona's score at that stage
  double threshold = 0.0;  // the cut it failed
  std::string reason;
};

// Descriptor values the cascade looks at.
struct PersonaScores {
  std::string id;
  double bias = 0.0;
  double safety = 0.0;
  double coherence = 0.0;
  double s2 = 0.0;
};

struct StageResult {
  std::vector<PersonaScores> kept;
  std::vector<Removal> removed;
};

// Nearest-rank empirical quantile: the ceil(q * n)-th smallest value.
inline double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in (0, 1]");
  std::sort(values.begin(), values.end());
  const double scaled = q * static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(scaled - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

// Fraction of `safety_cases` (which carry ground truth) rated exactly right.
inline double safety_score(const RatingMatrix& ratings, std::string_view persona,
                           std::span<const Case> safety_cases) {
  const std::size_t pj = ratings.require_persona(persona);
  std::size_t rated = 0, exact = 0;
  for (const auto& c : safety_cases) {
    if (!c.ground_truth) throw DomainError("safety case '" + c.id + "' lacks ground truth");
    const auto ci = ratings.case_index(c.id);
    if (!ci) continue;
    if (auto r = ratings.at(*ci, pj)) {
      ++rated;
      exact += (*r == *c.ground_truth);
    }
  }
  if (rated == 0)
    throw DomainError("persona '" + std::string(persona) + "' has no safety ratings");
  return static_cast<double>(exact) / static_cast<double>(rated);
}

// Keep a persona if it reaches the safety_percentile quantile of the pool OR
// the absolute threshold. The top scorer always survives.
inline StageResult filter_safety(std::span<const PersonaScores> pool,
                                 const SelectionConfig& config) {
  if (pool.empty()) throw DomainError("filter_safety: empty pool");
  std::vector<double> scores;
  for (const auto& p : pool) scores.push_back(p.safety);
  const double cut = nearest_rank_quantile(scores, config.safety_percentile);
  StageResult out;
  for (const auto& p : pool) {
    if (p.safety >= cut || p.safety >= config.safety_threshold)
      out.kept.push_back(p);
    else
      out.removed.push_back({p.id, SelectionStage::safety, p.safety,
                             std::min(cut, config.safety_threshold),
                             "below percentile cut and absolute threshold"});
  }
  return out;
}

// Culls the bottom (1 - coherence_percentile) share: with c = floor(share * n)
// the cut is the (c+1)-th smallest score and only scores strictly below it go.
inline StageResult filter_coherence(std::span<const PersonaScores> pool,
                                    const SelectionConfig& config) {
  if (pool.empty()) throw DomainError("filter_coherence: empty pool");
  std::vector<double> scores;
  for (const auto& p : pool) scores.push_back(p.coherence);
  std::sort(scores.begin(), scores.end());
  const auto cull = static_cast<std::size_t>(
      std::floor((1.0 - config.coherence_percentile) * static_cast<double>(pool.size()) + 1e-9));
  const double cut = scores[std::min(cull, scores.size() - 1)];
  StageResult out;
  for (const auto& p : pool) {
    if (p.coherence < cut)
      out.removed.push_back({p.id, SelectionStage::coherence, p.coherence, cut,
                             "in the bottom coherence tier"});
    else
      out.kept.push_back(p);
  }
  return out;
}

struct DeltaCalibration {
  double delta = 0.0;
  bool tightened = false;
  bool reused = false;  // came from a frozen value
};

struct Cluster {
  std::size_t begin = 0;  // [begin, end) into the sorted input
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

// Single pass over sorted biases; a gap >= delta starts a new cluster.
inline std::vector<Cluster> cluster_by_bias(std::span<const double> sorted_biases, double delta) {
  if (!std::is_sorted(sorted_biases.begin(), sorted_biases.end()))
    throw DomainError("cluster_by_bias: biases must be sorted ascending");
  std::vector<Cluster> out;
  if (sorted_biases.empty()) return out;
  out.push_back({0, 1});
  for (std::size_t i = 1; i < sorted_biases.size(); ++i) {
    if (std::abs(sorted_biases[i] - sorted_biases[i - 1]) < delta)
      out.back().end = i + 1;
    else
      out.push_back({i, i + 1});
  }
  return out;
}

inline DeltaCalibration calibrate_cluster_threshold_detailed(std::span<const double> sorted_biases,
                                                             std::optional<double> frozen) {
  if (frozen) return {*frozen, false, true};
  if (sorted_biases.size() < 2) throw DomainError("delta calibration needs >= 2 biases");
  if (!std::is_sorted(sorted_biases.begin(), sorted_biases.end()))
    throw DomainError("delta calibration: biases must be sorted ascending");
  const double range = sorted_biases.back() - sorted_biases.front();
  const double delta = std::clamp(0.25 * range, 0.05, 0.5);
  // Density check: the same sequential pass. One cluster over a wide range
  // means the threshold is too loose to separate anything.
  if (cluster_by_bias(sorted_biases, delta).size() <= 1 && range > 0.3)
    return {std::clamp(0.15 * range, 0.05, 0.5), true, false};
  return {delta, false, false};
}

// Once a value is frozen (generation >= 2 in a run) it is returned as-is.
inline double calibrate_cluster_threshold(std::span<const double> sorted_biases, int generation,
                                          std::optional<double> frozen) {
  if (generation < 1) throw DomainError("generation numbers start at 1");
  return calibrate_cluster_threshold_detailed(sorted_biases, frozen).delta;
}

// `members` holds the personas of one cluster each. Clusters smaller than
// min_cluster_size are exempt; otherwise members strictly above the local
// variance_percentile quantile of s2 are removed.
inline std::vector<Removal> prune_variance(std::span<const std::vector<PersonaScores>> clusters,
                                           const SelectionConfig& config) {
  std::vector<Removal> removed;
  for (const auto& cluster : clusters) {
    if (static_cast<int>(cluster.size()) < config.min_cluster_size) continue;
    std::vector<double> s2;
    for (const auto& p : cluster) {
      if (!std::isfinite(p.s2) || p.s2 < 0.0)
        throw DomainError("persona '" + p.id + "' has no valid residual variance");
      s2.push_back(p.s2);
    }
    const double cut = nearest_rank_quantile(s2, config.variance_percentile);
    for (const auto& p : cluster)
      if (p.s2 > cut)
        removed.push_back({p.id, SelectionStage::variance, p.s2, cut,
                           "residual variance above cluster quantile"});
  }
  return removed;
}

struct SelectionReport {
  std::vector<std::string> survivors;  // input order
  std::vector<Removal> removed;        // stage order, input order within a stage
  std::optional<double> frozen_delta;
  bool delta_tightened = false;
  std::vector<std::vector<std::string>> clusters;
  // The density validation is the sequential gap pass itself, not DBSCAN.
  std::string density_check = "sequential_gap";
};

inline SelectionReport apply_constraints(std::span<const PersonaScores> pool,
                                         const SelectionConfig& config,
                                         std::optional<double> frozen_delta = std::nullopt) {
  config.validate();
  if (pool.empty()) throw DomainError("apply_constraints: empty pool");
  SelectionReport report;

  auto safety = filter_safety(pool, config);
  report.removed = std::move(safety.removed);
  if (safety.kept.empty()) throw ExtinctionError("population extinct after safety stage");

  auto coherence = filter_coherence(safety.kept, config);
  report.removed.insert(report.removed.end(), coherence.removed.begin(), coherence.removed.end());
  if (coherence.kept.empty()) throw ExtinctionError("population extinct after coherence stage");

  auto sorted = coherence.kept;
  std::sort(sorted.begin(), sorted.end(), [](const PersonaScores& a, const PersonaScores& b) {
    return a.bias != b.bias ? a.bias < b.bias : a.id < b.id;
  });
  std::vector<double> biases;
  for (const auto& p : sorted) biases.push_back(p.bias);

  std::optional<double> frozen = config.cluster_delta ? config.cluster_delta : frozen_delta;
  if (frozen || biases.size() >= 2) {
    const auto cal = calibrate_cluster_threshold_detailed(biases, frozen);
    report.frozen_delta = cal.delta;
    report.delta_tightened = cal.tightened;

    std::vector<std::vector<PersonaScores>> groups;
    for (const auto& c : cluster_by_bias(biases, cal.delta)) {
      groups.emplace_back(sorted.begin() + static_cast<long>(c.begin),
                          sorted.begin() + static_cast<long>(c.end));
      auto& ids = report.clusters.emplace_back();
      for (const auto& p : groups.back()) ids.push_back(p.id);
    }
    auto var_removed = prune_variance(groups, config);
    // Report variance removals in input order.
    std::vector<Removal> ordered;
    for (const auto& p : coherence.kept)
      for (const auto& r : var_removed)
        if (r.persona_id == p.id) ordered.push_back(r);
    report.removed.insert(report.removed.end(), ordered.begin(), ordered.end());
  }

  for (const auto& p : pool) {
    const bool gone = std::any_of(report.removed.begin(), report.removed.end(),
                                  [&](const Removal& r) { return r.persona_id == p.id; });
    if (!gone) report.survivors.push_back(p.id);
  }
  if (report.survivors.empty()) throw ExtinctionError("population extinct after variance stage");
  return report;
}

}  // namespace steer
