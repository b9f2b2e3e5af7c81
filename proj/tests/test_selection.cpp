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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_support.hpp"

using namespace steer;
using steer::testing::matrix_from_rows;

namespace {

PersonaScores ps(const std::string& id, double bias, double safety = 1.0, double coherence = 3.0,
                 double s2 = 0.1) {
  return {id, bias, safety, coherence, s2};
}

std::vector<std::string> ids(const std::vector<PersonaScores>& v) {
  std::vector<std::string> out;
  for (const auto& p : v) out.push_back(p.id);
  return out;
}

}  // namespace

TEST(SafetyScore, ExactMatchFraction) {
  std::vector<Case> cases;
  std::vector<int> row;
  for (int i = 0; i < 10; ++i) {
    cases.push_back({"c" + std::to_string(i), "", CaseSplit::unambiguous, 2});
    row.push_back(i == 0 ? 3 : 2);
  }
  std::vector<std::vector<int>> rows;
  for (int r : row) rows.push_back({2, r, 1});
  const auto m = matrix_from_rows(rows);
  EXPECT_DOUBLE_EQ(safety_score(m, "p0", cases), 1.0);
  EXPECT_DOUBLE_EQ(safety_score(m, "p1", cases), 0.9);
  EXPECT_DOUBLE_EQ(safety_score(m, "p2", cases), 0.0);
  EXPECT_THROW(safety_score(m, "nobody", cases), DomainError);
  const auto empty = matrix_from_rows({{0, 2}});
  EXPECT_THROW(safety_score(empty, "p0", std::span(cases).first(1)), DomainError);
}

TEST(NearestRankQuantile, NoInterpolation) {
  EXPECT_DOUBLE_EQ(nearest_rank_quantile({1, 2, 3, 4, 5}, 0.5), 3);
  EXPECT_DOUBLE_EQ(nearest_rank_quantile({1, 2, 3, 4, 5}, 1.0), 5);
  EXPECT_DOUBLE_EQ(nearest_rank_quantile({0.8, 0.85}, 0.8), 0.85);
  EXPECT_THROW(nearest_rank_quantile({}, 0.5), DomainError);
  EXPECT_THROW(nearest_rank_quantile({1.0}, 0.0), DomainError);
}

TEST(FilterSafety, OrRule) {
  const SelectionConfig cfg;
  std::vector<PersonaScores> pool{ps("a", 0, 0.95), ps("b", 0, 0.92), ps("c", 0, 0.50)};
  auto r = filter_safety(pool, cfg);
  EXPECT_EQ(ids(r.kept), (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0].stage, SelectionStage::safety);

  pool = {ps("a", 0, 1.0), ps("b", 0, 1.0), ps("c", 0, 1.0)};
  EXPECT_EQ(filter_safety(pool, cfg).kept.size(), 3u);

  pool = {ps("a", 0, 0.85), ps("b", 0, 0.80)};
  EXPECT_EQ(ids(filter_safety(pool, cfg).kept), std::vector<std::string>{"a"});
  EXPECT_THROW(filter_safety({}, cfg), DomainError);
}

TEST(FilterSafety, TopScorerAlwaysSurvives) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 0.85);
  for (int t = 0; t < 200; ++t) {
    std::vector<PersonaScores> pool;
    for (int i = 0; i < 1 + t % 17; ++i) pool.push_back(ps("p" + std::to_string(i), 0, u(rng)));
    const double best = std::max_element(pool.begin(), pool.end(), [](auto& a, auto& b) {
                          return a.safety < b.safety;
                        })->safety;
    const auto r = filter_safety(pool, SelectionConfig{});
    EXPECT_TRUE(std::any_of(r.kept.begin(), r.kept.end(),
                            [&](const auto& p) { return p.safety == best; }));
  }
}

TEST(FilterCoherence, CullsBottomFifteenPercent) {
  const SelectionConfig cfg;
  std::vector<PersonaScores> pool;
  for (int i = 0; i < 20; ++i) pool.push_back(ps("p" + std::to_string(i), 0, 1, 1.0 + 0.1 * i));
  const auto r = filter_coherence(pool, cfg);
  ASSERT_EQ(r.removed.size(), 3u);
  EXPECT_EQ(r.removed[0].persona_id, "p0");
  EXPECT_EQ(r.removed[2].persona_id, "p2");

  std::vector<PersonaScores> flat(20, ps("x", 0, 1, 2.5));
  EXPECT_TRUE(filter_coherence(flat, cfg).removed.empty());
  std::vector<PersonaScores> one{ps("solo", 0, 1, 0.0)};
  EXPECT_EQ(filter_coherence(one, cfg).kept.size(), 1u);
}

TEST(ClusterThreshold, QuarterRangeClampedAndTightened) {
  const std::vector<double> separated{0.0, 0.05, 0.95, 1.0};
  EXPECT_DOUBLE_EQ(calibrate_cluster_threshold(separated, 1, std::nullopt), 0.25);
  const std::vector<double> narrow{0.0, 0.04, 0.1};
  EXPECT_DOUBLE_EQ(calibrate_cluster_threshold(narrow, 1, std::nullopt), 0.05);
  const std::vector<double> wide{-3.0, -2.9, 3.0};
  EXPECT_DOUBLE_EQ(calibrate_cluster_threshold(wide, 1, std::nullopt), 0.5);

  std::vector<double> dense;
  for (int i = 0; i <= 8; ++i) dense.push_back(0.1 * i);
  const auto cal = calibrate_cluster_threshold_detailed(dense, std::nullopt);
  EXPECT_TRUE(cal.tightened);
  EXPECT_NEAR(cal.delta, 0.12, 1e-12);

  EXPECT_THROW(calibrate_cluster_threshold(std::vector<double>{0.0}, 1, std::nullopt), DomainError);
  EXPECT_THROW(calibrate_cluster_threshold(separated, 0, std::nullopt), DomainError);
}

TEST(ClusterThreshold, FrozenValueReturnedBitForBit) {
  const double frozen = 0.123456789012345;
  for (int g = 2; g < 10; ++g) {
    std::vector<double> b{-1.0 * g, 0.0, 0.5 * g};
    EXPECT_EQ(calibrate_cluster_threshold(b, g, frozen), frozen);
  }
}

TEST(ClusterByBias, SplitsAtGapsOfAtLeastDelta) {
  const std::vector<double> b{0.0, 0.1, 0.9, 1.0};
  const auto c = cluster_by_bias(b, 0.3);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].size(), 2u);
  EXPECT_EQ(c[1].begin, 2u);
  EXPECT_EQ(cluster_by_bias(b, 1.0).size(), 1u);
  const std::vector<double> pair{0.0, 0.25};
  EXPECT_EQ(cluster_by_bias(pair, 0.25).size(), 2u);
  EXPECT_THROW(cluster_by_bias(std::vector<double>{1.0, 0.0}, 0.3), DomainError);
}

TEST(PruneVariance, Examples) {
  const SelectionConfig cfg;
  std::vector<std::vector<PersonaScores>> small{{ps("a", 0, 1, 3, 5), ps("b", 0, 1, 3, 6),
                                                 ps("c", 0, 1, 3, 7)}};
  EXPECT_TRUE(prune_variance(small, cfg).empty());

  std::vector<std::vector<PersonaScores>> ten(1);
  for (int i = 0; i < 10; ++i) ten[0].push_back(ps("p" + std::to_string(i), 0, 1, 3, i == 4 ? 3.0 : 0.2));
  const auto removed = prune_variance(ten, cfg);
  ASSERT_EQ(removed.size(), 1u);
  EXPECT_EQ(removed[0].persona_id, "p4");

  std::vector<std::vector<PersonaScores>> flat{std::vector<PersonaScores>(8, ps("x", 0, 1, 3, 0.4))};
  EXPECT_TRUE(prune_variance(flat, cfg).empty());

  std::vector<std::vector<PersonaScores>> bad{std::vector<PersonaScores>(4, ps("x", 0, 1, 3, NAN))};
  EXPECT_THROW(prune_variance(bad, cfg), DomainError);
}

TEST(PruneVariance, RemovalIsMonotoneInVariance) {
  std::mt19937_64 rng(7);
  std::exponential_distribution<double> e(2.0);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::vector<PersonaScores>> c(1);
    const int n = 4 + t % 20;
    for (int i = 0; i < n; ++i) c[0].push_back(ps("p" + std::to_string(i), 0, 1, 3, e(rng)));
    const auto removed = prune_variance(c, SelectionConfig{});
    double min_removed = INFINITY;
    for (const auto& r : removed) min_removed = std::min(min_removed, r.metric);
    for (const auto& p : c[0]) {
      const bool gone = std::any_of(removed.begin(), removed.end(),
                                    [&](const Removal& r) { return r.persona_id == p.id; });
      if (p.s2 > min_removed) {
        EXPECT_TRUE(gone);
      }
    }
  }
}

TEST(ApplyConstraints, StageAttribution) {
  std::vector<PersonaScores> pool{ps("a", -1.0), ps("b", 0.0), ps("c", 1.0, 0.2)};
  const auto r = apply_constraints(pool, SelectionConfig{});
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0].persona_id, "c");
  EXPECT_EQ(r.removed[0].stage, SelectionStage::safety);
  EXPECT_EQ(r.survivors, (std::vector<std::string>{"a", "b"}));

  std::vector<PersonaScores> clean{ps("a", -1.0), ps("b", 0.0), ps("c", 1.0)};
  const auto all = apply_constraints(clean, SelectionConfig{});
  EXPECT_TRUE(all.removed.empty());
  EXPECT_EQ(all.survivors, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_THROW(apply_constraints({}, SelectionConfig{}), DomainError);
}

TEST(ApplyConstraints, PlantedMembersAreRecovered) {
  // Four well-separated clusters of 7-8; one planted failure per stage.
  std::vector<PersonaScores> pool;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 7; ++i)
      pool.push_back(ps("c" + std::to_string(c) + "-" + std::to_string(i), -1.5 + c + 0.01 * i));
  pool.push_back(ps("bad-safety", -1.455, 0.5, 3.0, 9.0));
  pool.push_back(ps("bad-coherence", 0.545, 1.0, 1.0));
  pool[10].s2 = 2.0;  // c1-3
  const auto r = apply_constraints(pool, SelectionConfig{});
  ASSERT_EQ(r.removed.size(), 3u);
  EXPECT_EQ(r.removed[0].persona_id, "bad-safety");
  EXPECT_EQ(r.removed[0].stage, SelectionStage::safety);
  EXPECT_EQ(r.removed[1].persona_id, "bad-coherence");
  EXPECT_EQ(r.removed[1].stage, SelectionStage::coherence);
  EXPECT_EQ(r.removed[2].persona_id, "c1-3");
  EXPECT_EQ(r.removed[2].stage, SelectionStage::variance);
  EXPECT_EQ(r.survivors.size(), 27u);
  EXPECT_EQ(r.clusters.size(), 4u);
  EXPECT_DOUBLE_EQ(*r.frozen_delta, 0.5);
}

TEST(ApplyConstraints, DeterministicAndPartitioning) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2, 2), s(0.5, 1.0), c(0, 4), v(0, 1);
  for (int t = 0; t < 100; ++t) {
    std::vector<PersonaScores> pool;
    for (int i = 0; i < 5 + t % 40; ++i)
      pool.push_back(ps("p" + std::to_string(i), u(rng), s(rng), c(rng), v(rng)));
    const auto a = apply_constraints(pool, SelectionConfig{});
    const auto b = apply_constraints(pool, SelectionConfig{});
    EXPECT_EQ(a.survivors, b.survivors);
    EXPECT_EQ(a.removed.size(), b.removed.size());
    EXPECT_EQ(a.frozen_delta, b.frozen_delta);
    std::vector<std::string> all = a.survivors;
    for (const auto& r : a.removed) all.push_back(r.persona_id);
    std::sort(all.begin(), all.end());
    EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
    EXPECT_EQ(all.size(), pool.size());
  }
}

TEST(ApplyConstraints, FrozenDeltaOverridesCalibration) {
  std::vector<PersonaScores> pool{ps("a", 0.0), ps("b", 0.1), ps("c", 0.9), ps("d", 1.0)};
  const auto r = apply_constraints(pool, SelectionConfig{}, 0.05);
  EXPECT_EQ(*r.frozen_delta, 0.05);
  EXPECT_EQ(r.clusters.size(), 4u);
}
