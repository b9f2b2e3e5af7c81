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

#include "test_support.hpp"

using namespace steer;
using steer::testing::matrix_from_rows;

TEST(OrdinalScale, ConservativenessRankExamples) {
  const auto esi = OrdinalScale::make(5, 1);
  EXPECT_EQ(conservativeness_rank(esi, 1), 4);
  EXPECT_EQ(conservativeness_rank(esi, 5), 0);
  const auto up = OrdinalScale::make(5, 5);
  EXPECT_EQ(conservativeness_rank(up, 2), 1);
}

TEST(OrdinalScale, RankIsABijectionWithInverse) {
  for (int k = 2; k <= 10; ++k) {
    for (int mu : {1, k}) {
      const auto s = OrdinalScale::make(k, mu);
      std::vector<bool> seen(static_cast<std::size_t>(k), false);
      for (int level = 1; level <= k; ++level) {
        const int r = conservativeness_rank(s, level);
        ASSERT_GE(r, 0);
        ASSERT_LT(r, k);
        EXPECT_FALSE(seen[static_cast<std::size_t>(r)]);
        seen[static_cast<std::size_t>(r)] = true;
        EXPECT_EQ(level_at_rank(s, r), level);
      }
      EXPECT_EQ(conservativeness_rank(s, mu), k - 1);
    }
  }
}

TEST(OrdinalScale, RejectsBadConfigurationsAndLevels) {
  EXPECT_THROW(OrdinalScale::make(1, 1), DomainError);
  EXPECT_THROW(OrdinalScale::make(5, 3), DomainError);
  EXPECT_THROW(OrdinalScale::make(5, 1, 6), DomainError);
  const OrdinalScale s;
  EXPECT_THROW(conservativeness_rank(s, 0), DomainError);
  EXPECT_THROW(conservativeness_rank(s, 6), DomainError);
  EXPECT_EQ(OrdinalScale::make(7, 1).midpoint, 4);
}

TEST(Triage, MidpointExamples) {
  const OrdinalScale s;
  EXPECT_EQ(classify_triage(s, 2), Triage::overtriage);
  EXPECT_EQ(classify_triage(s, 3), Triage::exact);
  EXPECT_EQ(classify_triage(s, 4), Triage::undertriage);
}

TEST(Triage, InvertedScaleFlipsComparisons) {
  const auto s = OrdinalScale::make(5, 5, 3);
  EXPECT_EQ(classify_triage(s, 4), Triage::overtriage);
  EXPECT_EQ(classify_triage(s, 2), Triage::undertriage);
}

TEST(Triage, PartitionsEveryScale) {
  for (int k = 2; k <= 10; ++k)
    for (int mu : {1, k})
      for (int mid = 1; mid <= k; ++mid) {
        const auto s = OrdinalScale::make(k, mu, mid);
        int exact = 0;
        for (int level = 1; level <= k; ++level) exact += classify_triage(s, level) == Triage::exact;
        EXPECT_EQ(exact, 1);
      }
}

TEST(Case, SplitDeterminesGroundTruth) {
  const OrdinalScale s;
  EXPECT_NO_THROW((Case{"a", "x", CaseSplit::ambiguous, std::nullopt}.validate(s)));
  EXPECT_THROW((Case{"a", "x", CaseSplit::ambiguous, 2}.validate(s)), DomainError);
  EXPECT_THROW((Case{"u", "x", CaseSplit::unambiguous, std::nullopt}.validate(s)), DomainError);
  EXPECT_THROW((Case{"u", "x", CaseSplit::unambiguous, 9}.validate(s)), DomainError);
  EXPECT_NO_THROW((Case{"u", "x", CaseSplit::unambiguous, 1}.validate(s)));
}

TEST(Persona, DescriptorRangesAndTargets) {
  Persona p{"p", "text", PersonaOrigin::gap_fill, std::nullopt, std::nullopt, 1};
  EXPECT_THROW(p.validate(), DomainError);
  p.target_bias = 0.2;
  EXPECT_NO_THROW(p.validate());
  p.descriptors = Descriptors{0.0, -1.0, 0.5, 2.0};
  EXPECT_THROW(p.validate(), DomainError);
  p.descriptors = Descriptors{0.0, 0.1, 1.5, 2.0};
  EXPECT_THROW(p.validate(), DomainError);
  p.descriptors = Descriptors{0.0, 0.1, 0.5, 4.5};
  EXPECT_THROW(p.validate(), DomainError);
}

TEST(RatingMatrix, StoresSparseLevels) {
  RatingMatrix m({"c1", "c2"}, {"p1"}, 5);
  EXPECT_EQ(m.entry_count(), 0u);
  m.set("c2", "p1", 4);
  EXPECT_EQ(m.at("c2", "p1"), 4);
  EXPECT_FALSE(m.at("c1", "p1").has_value());
  EXPECT_THROW(m.set("c1", "p1", 6), DomainError);
  EXPECT_THROW(m.set("c1", "p1", 0), DomainError);
  EXPECT_THROW(m.set("zz", "p1", 1), DomainError);
  m.erase(1, 0);
  EXPECT_EQ(m.entry_count(), 0u);
}

TEST(RatingMatrix, RejectsDuplicateIds) {
  EXPECT_THROW(RatingMatrix({"c", "c"}, {"p"}, 5), DomainError);
  EXPECT_THROW(RatingMatrix({"c"}, {"p", "p"}, 5), DomainError);
}

TEST(RatingMatrix, SubmatricesKeepEntries) {
  const auto m = matrix_from_rows({{1, 2, 3}, {4, 5, 0}});
  const std::vector<std::string> cases{"c1"};
  const auto sub = m.select_cases(cases);
  EXPECT_EQ(sub.case_ids().size(), 1u);
  EXPECT_EQ(sub.at("c1", "p1"), 5);
  EXPECT_FALSE(sub.at("c1", "p2").has_value());
  const std::vector<std::string> personas{"p2", "p0"};
  const auto sp = m.select_personas(personas);
  EXPECT_EQ(sp.persona_ids(), personas);
  EXPECT_EQ(sp.at("c0", "p2"), 3);
}
