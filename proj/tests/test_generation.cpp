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

#include <random>

#include "test_support.hpp"

using namespace steer;

namespace {

std::vector<PersonaRef> refs_for(const std::vector<double>& biases) {
  std::vector<PersonaRef> refs;
  for (std::size_t i = 0; i < biases.size(); ++i)
    refs.push_back({"p" + std::to_string(i), "persona text " + std::to_string(i), biases[i]});
  return refs;
}

// Widest gap between neighbours inside [lo, hi].
double max_gap(std::vector<double> b, double lo = -INFINITY, double hi = INFINITY) {
  b.erase(std::remove_if(b.begin(), b.end(), [&](double x) { return x < lo || x > hi; }), b.end());
  std::sort(b.begin(), b.end());
  double m = 0.0;
  for (std::size_t i = 1; i < b.size(); ++i) m = std::max(m, b[i] - b[i - 1]);
  return m;
}

}  // namespace

TEST(FindGaps, MidpointsWidestFirst) {
  const std::vector<double> b{-1.0, 0.0, 0.2};
  const auto r = find_gaps(b);
  ASSERT_EQ(r.gaps.size(), 2u);
  EXPECT_DOUBLE_EQ(r.gaps[0].left_bias, -1.0);
  EXPECT_DOUBLE_EQ(r.gaps[0].right_bias, 0.0);
  EXPECT_DOUBLE_EQ(r.gaps[0].width, 1.0);
  EXPECT_DOUBLE_EQ(r.gaps[0].target, -0.5);
  EXPECT_DOUBLE_EQ(r.gaps[1].width, 0.2);
  EXPECT_DOUBLE_EQ(r.gaps[1].target, 0.1);
}

TEST(FindGaps, TiesLeftmostFirstAndDuplicatesSkipped) {
  const std::vector<double> even{0.0, 0.5, 1.0, 1.5};
  const auto r = find_gaps(even);
  ASSERT_EQ(r.gaps.size(), 3u);
  EXPECT_DOUBLE_EQ(r.gaps[0].left_bias, 0.0);
  EXPECT_DOUBLE_EQ(r.gaps[1].left_bias, 0.5);
  const std::vector<double> dup{0.0, 0.0, 1.0};
  EXPECT_EQ(find_gaps(dup).gaps.size(), 1u);
  EXPECT_THROW(find_gaps(std::vector<double>{0.3, 0.3}), DomainError);
  EXPECT_THROW(find_gaps(std::vector<double>{1.0, 0.0}), DomainError);
}

TEST(PlanGeneration, SplitsBudgetByRatio) {
  const OrdinalScale s;
  const auto refs = refs_for({-1.0, -0.2, 0.4, 1.0});
  std::vector<double> b;
  for (const auto& r : refs) b.push_back(r.bias);
  const auto plan = plan_generation(find_gaps(b), refs, 10, {}, s);
  ASSERT_EQ(plan.size(), 10u);
  int gap = 0, edge = 0;
  for (const auto& r : plan) (r.kind == GenerationKind::gap_fill ? gap : edge)++;
  EXPECT_EQ(gap, 7);
  EXPECT_EQ(edge, 3);
  EXPECT_EQ(plan.front().id, "req-001");
}

TEST(PlanGeneration, SingleSlotGoesToWidestGap) {
  const OrdinalScale s;
  const auto refs = refs_for({-1.0, 0.0, 0.2});
  const std::vector<double> b{-1.0, 0.0, 0.2};
  const auto plan = plan_generation(find_gaps(b), refs, 1, {}, s);
  ASSERT_EQ(plan.size(), 1u);
  EXPECT_EQ(plan[0].kind, GenerationKind::gap_fill);
  EXPECT_DOUBLE_EQ(plan[0].target_bias, -0.5);
  ASSERT_EQ(plan[0].references.size(), 2u);
  EXPECT_EQ(plan[0].references[0].id, "p0");
  EXPECT_EQ(plan[0].references[1].id, "p1");
}

TEST(PlanGeneration, NoGapsMeansEdgeOnlyAlternating) {
  const OrdinalScale s;
  const auto refs = refs_for({0.3});
  const auto plan = plan_generation(GapReport{}, refs, 3, {}, s);
  ASSERT_EQ(plan.size(), 3u);
  EXPECT_EQ(plan[0].direction, EdgeDirection::conservative);
  EXPECT_EQ(plan[1].direction, EdgeDirection::lenient);
  EXPECT_EQ(plan[2].direction, EdgeDirection::conservative);
  // ESI: conservative is the negative side; the step floor is 0.25.
  EXPECT_DOUBLE_EQ(plan[0].target_bias, 0.3 - 0.25);
  EXPECT_DOUBLE_EQ(plan[1].target_bias, 0.3 + 0.25);
}

TEST(PlanGeneration, ConservativeFollowsScaleDirection) {
  const auto up = OrdinalScale::make(5, 5);
  const auto refs = refs_for({-1.0, 1.0});
  const auto plan = plan_generation(GapReport{}, refs, 1, {}, up);
  EXPECT_DOUBLE_EQ(plan[0].target_bias, 2.0);  // 1 + 0.5 * range
}

TEST(PlanGeneration, CountsAndTargetsForAllBudgets) {
  const OrdinalScale s;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int budget = 1; budget <= 50; ++budget) {
    std::vector<double> b(2 + rng() % 8);
    for (auto& x : b) x = u(rng);
    std::sort(b.begin(), b.end());
    const auto refs = refs_for(b);
    const auto plan = plan_generation(find_gaps(b), refs, budget, {}, s);
    ASSERT_EQ(static_cast<int>(plan.size()), budget);
    for (const auto& r : plan) {
      if (r.kind == GenerationKind::gap_fill) {
        EXPECT_GT(r.target_bias, b.front());
        EXPECT_LT(r.target_bias, b.back());
      } else {
        EXPECT_TRUE(r.target_bias < b.front() || r.target_bias > b.back());
      }
    }
  }
  EXPECT_TRUE(plan_generation(GapReport{}, refs_for({0.0}), 0, {}, s).empty());
  EXPECT_THROW(plan_generation(GapReport{}, refs_for({0.0}), -1, {}, s), DomainError);
}

TEST(RenderRequest, GapPromptCarriesTargetAndBothReferences) {
  const OrdinalScale s;
  const auto refs = refs_for({-1.0, 0.0});
  const std::vector<double> b{-1.0, 0.0};
  auto plan = plan_generation(find_gaps(b), refs, 1, {}, s);
  const std::string text = render_request(plan[0], GenerationTemplates{}, s);
  EXPECT_NE(text.find("-0.500"), std::string::npos);
  EXPECT_NE(text.find("-1.000"), std::string::npos);
  EXPECT_NE(text.find("persona text 0"), std::string::npos);
  EXPECT_NE(text.find("persona text 1"), std::string::npos);
}

TEST(RenderRequest, EdgePromptUsesDirectionGuidance) {
  const OrdinalScale s;
  const auto refs = refs_for({-1.0, 1.0});
  const auto plan = plan_generation(GapReport{}, refs, 2, {}, s);
  const GenerationTemplates t;
  EXPECT_NE(render_request(plan[0], t, s).find(t.conservative_guidance), std::string::npos);
  EXPECT_NE(render_request(plan[1], t, s).find(t.lenient_guidance), std::string::npos);
}

TEST(RenderRequest, TemplateWithoutTargetSlotFails) {
  const OrdinalScale s;
  const auto refs = refs_for({-1.0, 0.0});
  const std::vector<double> b{-1.0, 0.0};
  auto plan = plan_generation(find_gaps(b), refs, 1, {}, s);
  GenerationTemplates t;
  t.gap_fill = PromptTemplate("no slots here", "broken");
  EXPECT_THROW(render_request(plan[0], t, s), TemplateError);
}

TEST(Targeting, CategoryBoundaries) {
  EXPECT_EQ(categorize_targeting_error(0.003), TargetingCategory::excellent);
  EXPECT_EQ(categorize_targeting_error(0.19), TargetingCategory::excellent);
  EXPECT_EQ(categorize_targeting_error(0.2), TargetingCategory::good);
  EXPECT_EQ(categorize_targeting_error(0.5), TargetingCategory::good);
  EXPECT_EQ(categorize_targeting_error(0.75), TargetingCategory::acceptable);
  EXPECT_EQ(categorize_targeting_error(1.0), TargetingCategory::acceptable);
  EXPECT_EQ(categorize_targeting_error(1.2), TargetingCategory::poor);
}

TEST(Targeting, ScoresAbsoluteError) {
  // -0.364 vs -0.366 differ by 0.002; the published 0.003 comes from
  // unrounded biases. Both land in the same category.
  const auto s = score_targeting(-0.366, -0.364);
  EXPECT_NEAR(s.error, 0.002, 1e-12);
  EXPECT_EQ(s.category, TargetingCategory::excellent);
  EXPECT_EQ(score_targeting(0.4, 0.4).error, 0.0);
  EXPECT_THROW(score_targeting(NAN, 0.0), DomainError);
}

TEST(EdgeExpansion, DecileRule) {
  const OrdinalScale s;
  auto r = score_edge_expansion({-1.0, 1.0}, EdgeDirection::conservative, -1.3, s);
  EXPECT_TRUE(r.reached_decile);
  EXPECT_NEAR(r.extension, 0.3, 1e-12);
  r = score_edge_expansion({-1.0, 1.0}, EdgeDirection::conservative, 0.0, s);
  EXPECT_FALSE(r.reached_decile);
  EXPECT_EQ(r.extension, 0.0);
  r = score_edge_expansion({-1.0, 1.0}, EdgeDirection::conservative, -0.95, s);
  EXPECT_TRUE(r.reached_decile);
  EXPECT_EQ(r.extension, 0.0);
  r = score_edge_expansion({-1.0, 1.0}, EdgeDirection::lenient, 0.85, s);
  EXPECT_TRUE(r.reached_decile);
  EXPECT_THROW(score_edge_expansion({1.0, 1.0}, EdgeDirection::lenient, 0.0, s), DomainError);
}

TEST(GenerationCycle, ExactGeneratorShrinksTheWidestGap) {
  const OrdinalScale s;
  SyntheticGenerator gen;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> b(3 + rng() % 6);
    for (auto& x : b) x = u(rng);
    std::sort(b.begin(), b.end());
    const auto gaps = find_gaps(b);
    if (gaps.gaps.size() > 1 && gaps.gaps[0].width == gaps.gaps[1].width) continue;
    const auto plan = plan_generation(gaps, refs_for(b), 1 + static_cast<int>(rng() % 5), {}, s);
    auto after = b;
    for (const auto& r : plan)
      after.push_back(*synthetic_attribute(gen.generate_persona(r), "latent_bias"));
    // Edge requests land outside the old range; the interior must tighten.
    EXPECT_LT(max_gap(after, b.front(), b.back()), max_gap(b));
  }
}
