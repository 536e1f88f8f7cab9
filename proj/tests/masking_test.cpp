// Copyright 2026 The GraphMERT KG Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include "graphmert/masking.hpp"
#include "test_util.hpp"

namespace graphmert {
namespace {

struct PlanFixture {
  Vocabulary vocab = testing::word_vocab(40);
  std::vector<int> replaceable = replaceable_ids(vocab);
};

TEST(Masking, ReplaceableIdsExcludeSpecialTokens) {
  PlanFixture f;
  EXPECT_EQ(f.replaceable.size(), 40u);
  for (int id : f.replaceable) EXPECT_FALSE(f.vocab.is_special(id));
}

// Invariants over many random plans: spans are in range, disjoint, keep a
// non-PAD boundary on both sides; leaf masking is all-or-nothing.
TEST(Masking, PlanInvariantsOnRandomGraphs) {
  PlanFixture f;
  Rng rng(123);
  for (int i = 0; i < 300; ++i) {
    const ChainGraph g = testing::random_graph("g", f.vocab, 3, 15, rng);
    const MaskPlan plan = make_mask_plan(g, f.vocab, f.replaceable, rng);
    const auto& roots = g.roots.token_ids;
    std::vector<int> cover(kRootCount, 0);
    for (const auto& s : plan.syntactic_spans) {
      ASSERT_GE(s.span.start, 1);
      ASSERT_LT(s.span.end, kRootCount);
      EXPECT_LE(s.span.size(), 7);
      EXPECT_NE(roots[s.span.start - 1], f.vocab.pad_id());
      EXPECT_NE(roots[s.span.end], f.vocab.pad_id());
      for (int p = s.span.start; p < s.span.end; ++p) {
        EXPECT_NE(roots[p], f.vocab.pad_id());
        cover[p]++;
      }
    }
    for (const auto& s : plan.syntactic_spans) {
      EXPECT_EQ(cover[s.span.start - 1], 0);
      EXPECT_EQ(cover[s.span.end], 0);
    }
    EXPECT_LE(*std::max_element(cover.begin(), cover.end()), 1);
    for (const auto& leaf : plan.masked_leaves) {
      const LeafGroup& grp = g.leaves[leaf.root_index];
      ASSERT_TRUE(grp.has_relation());
      int non_pad = 0;
      for (int id : grp.leaf_token_ids) non_pad += id != f.vocab.pad_id();
      EXPECT_EQ(static_cast<int>(leaf.slots.size()), non_pad);
    }
    size_t expected_tokens = 0;
    for (const auto& s : plan.syntactic_spans) expected_tokens += s.span.size();
    for (const auto& l : plan.masked_leaves) expected_tokens += l.slots.size();
    EXPECT_EQ(plan.tokens.size(), expected_tokens);
    for (const auto& t : plan.tokens) {
      EXPECT_NE(t.original_id, f.vocab.pad_id());
      EXPECT_EQ(t.semantic, t.position >= kRootCount);
      if (t.corruption == Corruption::kMask) { EXPECT_EQ(t.input_id, f.vocab.mask_id()); }
      if (t.corruption == Corruption::kKeep) { EXPECT_EQ(t.input_id, t.original_id); }
      if (t.corruption == Corruption::kRandom) { EXPECT_FALSE(f.vocab.is_special(t.input_id)); }
    }
  }
}

TEST(Masking, SameSeedSamePlan) {
  PlanFixture f;
  Rng gr(5);
  const ChainGraph g = testing::random_graph("g", f.vocab, 2, 10, gr);
  Rng a(99), b(99), c(100);
  const std::string pa = to_json(make_mask_plan(g, f.vocab, f.replaceable, a)).dump();
  EXPECT_EQ(pa, to_json(make_mask_plan(g, f.vocab, f.replaceable, b)).dump());
  EXPECT_NE(pa, to_json(make_mask_plan(g, f.vocab, f.replaceable, c)).dump());
}

TEST(Masking, CorruptionMixMatchesTheConfiguredRates) {
  PlanFixture f;
  Rng rng(7);
  MaskingConfig cfg;
  int counts[3] = {0, 0, 0};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    counts[static_cast<int>(corrupt_token(0, 9, false, f.vocab.mask_id(), f.replaceable, rng, cfg).corruption)]++;
  }
  EXPECT_NEAR(counts[0] / double(n), 0.8, 0.01);
  EXPECT_NEAR(counts[1] / double(n), 0.1, 0.01);
  EXPECT_NEAR(counts[2] / double(n), 0.1, 0.01);
}

TEST(Masking, ShortOrEmptySequencesYieldNoRootSpans) {
  PlanFixture f;
  Rng rng(1);
  std::vector<int> roots(kRootCount, f.vocab.pad_id());
  EXPECT_TRUE(plan_syntactic(roots, f.vocab.pad_id(), rng).empty());
  roots[0] = roots[1] = 7;
  EXPECT_TRUE(plan_syntactic(roots, f.vocab.pad_id(), rng).empty());
}

TEST(Masking, GraphsWithoutInjectionsHaveNoSemanticTargets) {
  PlanFixture f;
  Rng rng(1);
  const ChainGraph g = empty_graph(testing::random_sequence("s", f.vocab, 100, rng), f.vocab.pad_id());
  MaskingConfig all;
  all.leaf_rate = 1.0;
  EXPECT_TRUE(plan_semantic(g, f.vocab.pad_id(), rng, all).empty());
}

}  // namespace
}  // namespace graphmert
