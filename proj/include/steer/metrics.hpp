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

// Operating curves over the percentile dial, right-step ordinal AUC, and
// case-resampling bootstrap intervals.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "steer/backends.hpp"
#include "steer/inference.hpp"
#include "steer/parallel.hpp"
#include "steer/random.hpp"

namespace steer {

struct TriageRates {
  double overtriage = 0.0;
  double undertriage = 0.0;
  double exact = 0.0;
};

inline TriageRates triage_rates(std::span<const int> predictions, const OrdinalScale& scale) {
  if (predictions.empty()) throw DomainError("triage_rates: no predictions");
  std::size_t over = 0, under = 0, exact = 0;
  for (int p : predictions) {
    switch (classify_triage(scale, p)) {
      case Triage::overtriage: ++over; break;
      case Triage::undertriage: ++under; break;
      case Triage::exact: ++exact; break;
    }
  }
  const double n = static_cast<double>(predictions.size());
  return {over / n, under / n, exact / n};
}

struct CurveRow {
  double percentile = 0.0;
  double overtriage = 0.0;
  double safe_rate = 0.0;  // 1 - undertriage
};

struct CurvePoint {
  double x = 0.0;  // overtriage rate
  double y = 0.0;  // safe rate
  std::vector<double> percentiles;  // dial settings landing on this point
};

struct OperatingCurve {
  std::vector<CurveRow> rows;       // one per grid value, grid order
  std::vector<CurvePoint> points;   // ascending x, equal x collapsed to max y
};

inline std::vector<double> default_percentile_grid() {
  std::vector<double> grid(101);
  std::iota(grid.begin(), grid.end(), 0.0);
  return grid;
}

inline std::vector<CurvePoint> collapse_points(std::span<const CurveRow> rows) {
  std::vector<CurveRow> sorted(rows.begin(), rows.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const CurveRow& a, const CurveRow& b) { return a.overtriage < b.overtriage; });
  std::vector<CurvePoint> points;
  for (const auto& r : sorted) {
    if (!points.empty() && points.back().x == r.overtriage) {
      points.back().y = std::max(points.back().y, r.safe_rate);
      points.back().percentiles.push_back(r.percentile);
    } else {
      points.push_back({r.overtriage, r.safe_rate, {r.percentile}});
    }
  }
  return points;
}

// Curve from already-collected ensemble outputs (one entry per case).
inline OperatingCurve curve_from_outputs(std::span<const EnsembleOutput> per_case,
                                         std::span<const double> grid,
                                         const OrdinalScale& scale) {
  if (per_case.empty()) throw DomainError("operating curve over zero cases");
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()))
    throw DomainError("percentile grid must be non-empty and ascending");

  std::vector<std::vector<int>> predictions(grid.size(), std::vector<int>(per_case.size()));
  for (std::size_t c = 0; c < per_case.size(); ++c) {
    const auto sweep = sweep_percentiles(per_case[c], grid, scale);
    for (std::size_t g = 0; g < grid.size(); ++g) predictions[g][c] = sweep[g].second.level;
  }
  OperatingCurve curve;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto rates = triage_rates(predictions[g], scale);
    curve.rows.push_back({grid[g], rates.overtriage, 1.0 - rates.undertriage});
  }
  curve.points = collapse_points(curve.rows);
  return curve;
}

// Rates every team member on every case (concurrently), then sweeps the dial.
// Members' biases come from their descriptors (0 when absent).
inline std::vector<EnsembleOutput> collect_outputs(std::span<const Persona> team,
                                                   std::span<const Case> cases,
                                                   RaterBackend& rater, const OrdinalScale& scale,
                                                   int parallelism = 8) {
  if (team.empty()) throw DomainError("cannot collect outputs from an empty team");
  std::vector<EnsembleOutput> out(cases.size());
  for (std::size_t c = 0; c < cases.size(); ++c) {
    out[c].case_id = cases[c].id;
    out[c].members.resize(team.size());
  }
  parallel_for(cases.size() * team.size(), parallelism, [&](std::size_t task) {
    const std::size_t c = task / team.size(), m = task % team.size();
    const Rating r = rater.rate(team[m], cases[c], scale);
    require_level(scale, r.level);
    out[c].members[m] = {team[m].id, team[m].descriptors ? team[m].descriptors->bias : 0.0,
                         r.level, r.rationale};
  });
  return out;
}

inline OperatingCurve build_curve(std::span<const Persona> team, std::span<const Case> cases,
                                  RaterBackend& rater, std::span<const double> grid,
                                  const OrdinalScale& scale, int parallelism = 8) {
  if (grid.empty() || grid.front() != 0.0 || grid.back() != 100.0)
    throw DomainError("percentile grid must start at 0 and end at 100");
  const auto outputs = collect_outputs(team, cases, rater, scale, parallelism);
  return curve_from_outputs(outputs, grid, scale);
}

// Right-step sum: sum over consecutive points of (x[i+1] - x[i]) * y[i].
inline double ordinal_auc(std::span<const CurvePoint> points) {
  if (points.empty()) throw DomainError("ordinal_auc: empty curve");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].x < points[i - 1].x) throw DomainError("ordinal_auc: points must be sorted by x");
  double auc = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    auc += (points[i + 1].x - points[i].x) * points[i].y;
  return auc;
}

inline double ordinal_auc(const OperatingCurve& curve) { return ordinal_auc(curve.points); }

struct BootstrapInterval {
  double low = 0.0;
  double high = 0.0;
  double point = 0.0;
};

// Metric over a multiset of case indices (a resample of [0, n_cases)).
using CaseMetric = std::function<double(std::span<const std::size_t>)>;

// Percentile bootstrap over cases. Replicate r draws from a stream keyed by
// (seed, r), so the interval is independent of evaluation order.
inline BootstrapInterval bootstrap_ci(const CaseMetric& metric, std::size_t n_cases,
                                      int iterations = 2000, double level = 0.95,
                                      std::uint64_t seed = 0) {
  if (n_cases < 2) throw DomainError("bootstrap needs at least 2 cases");
  if (iterations < 1) throw DomainError("bootstrap needs at least 1 iteration");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");

  std::vector<std::size_t> all(n_cases);
  std::iota(all.begin(), all.end(), std::size_t{0});
  BootstrapInterval out;
  out.point = metric(all);

  std::vector<double> replicates(static_cast<std::size_t>(iterations));
  std::vector<std::size_t> sample(n_cases);
  for (int r = 0; r < iterations; ++r) {
    CounterRng rng(mix_key(seed, static_cast<std::uint64_t>(r)));
    for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n_cases));
    try {
      replicates[static_cast<std::size_t>(r)] = metric(sample);
    } catch (const std::exception& e) {
      throw DomainError("bootstrap replicate " + std::to_string(r) + " failed: " + e.what());
    }
  }
  std::sort(replicates.begin(), replicates.end());
  const double tail = (1.0 - level) / 2.0;
  const auto n = static_cast<double>(iterations);
  // Nearest-rank percentiles, so endpoints are always realized replicate values.
  auto at = [&](double q) {
    auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, replicates.size());
    return replicates[rank - 1];
  };
  out.low = at(tail);
  out.high = at(1.0 - tail);
  return out;
}

}  // namespace steer
