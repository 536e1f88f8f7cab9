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

#include "graphmert/injector.hpp"
#include "test_util.hpp"

namespace graphmert {
namespace {

MatchedTriple row(const std::string& seq, int start, const std::string& head, const std::string& rel,
                  const std::string& tail, double score, int len = 1) {
  const Span span{start, start + len};
  return {make_matched_head_id(seq, span), head, rel, tail, score, seq, span};
}

std::vector<MatchedTriple> random_rows(Rng& rng, int n) {
  std::vector<MatchedTriple> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(row("s" + std::to_string(rng.uniform_int(20)), static_cast<int>(rng.uniform_int(6)),
                      "h" + std::to_string(rng.uniform_int(15)), "r" + std::to_string(rng.uniform_int(4)),
                      "t" + std::to_string(rng.uniform_int(10)),
                      0.5 + 0.01 * static_cast<double>(rng.uniform_int(40))));
  }
  return out;
}

std::string dump(const std::vector<MatchedTriple>& rows) {
  std::string s;
  for (const auto& r : rows) s += to_json(r).dump() + "\n";
  return s;
}

TEST(Preprocess, ThresholdAndBestSequencePerTriple) {
  const std::vector<MatchedTriple> rows = {
      row("s1", 0, "h", "r", "t", 0.70), row("s2", 0, "h", "r", "t", 0.80),
      row("s3", 0, "h", "r", "t", 0.80), row("s1", 3, "h", "r", "u", 0.54),
      row("s1", 3, "h", "r", "v", 0.55)};
  const auto out = preprocess(rows, 0.55);
  ASSERT_EQ(out.size(), 2u);
  // Tie at 0.80 resolves to the smaller seq_id; 0.54 is below alpha; 0.55 is kept.
  EXPECT_EQ(out[0].seq_id, "s1");
  EXPECT_EQ(out[0].tail, "v");
  EXPECT_EQ(out[1].seq_id, "s2");
  EXPECT_EQ(out[1].tail, "t");
}

TEST(Select, OneTriplePerHeadHighestScoreFirst) {
  const std::vector<MatchedTriple> rows = {row("s1", 0, "h", "r1", "a", 0.90), row("s1", 0, "h", "r2", "b", 0.70),
                                           row("s2", 5, "g", "r1", "c", 0.60)};
  const auto out = select(rows);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].tail, "a");
  EXPECT_EQ(out[1].tail, "c");
}

TEST(Select, RarerRelationWinsInsideAScoreBucket) {
  const std::vector<MatchedTriple> rows = {
      row("s1", 0, "h1", "common", "x", 0.905), row("s1", 0, "h1", "rare", "y", 0.900),
      row("s2", 4, "h2", "common", "z", 0.800), row("s3", 2, "h3", "common", "w", 0.700)};
  InjectionConfig cfg;
  cfg.relation_bucket_size = 2.0;
  const auto out = select(preprocess(rows, cfg.alpha), cfg);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].relation, "rare");
  // With the default bucket size both relations share bucket 0: score decides.
  EXPECT_EQ(select(preprocess(rows, 0.55))[0].relation, "common");
}

TEST(Select, ScoreBucketOutranksRelationBucket) {
  // The rare relation sits one score bucket lower, so it loses.
  const std::vector<MatchedTriple> rows = {
      row("s1", 0, "h1", "common", "x", 0.95), row("s1", 0, "h1", "rare", "y", 0.93),
      row("s2", 4, "h2", "common", "z", 0.80), row("s3", 2, "h3", "common", "w", 0.70)};
  InjectionConfig cfg;
  cfg.relation_bucket_size = 2.0;
  EXPECT_EQ(select(rows, cfg)[0].relation, "common");
}

// Properties over random inputs.
TEST(Select, IdempotentShardInvariantAndOrderInvariant) {
  for (int seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    auto rows = random_rows(rng, 1 + static_cast<int>(rng.uniform_int(400)));
    InjectionConfig cfg;
    cfg.relation_bucket_size = 20;
    const auto pre = preprocess(rows, cfg.alpha);
    const auto out = select(pre, cfg);
    EXPECT_EQ(dump(preprocess(pre, cfg.alpha)), dump(pre));
    EXPECT_EQ(dump(select(out, InjectionConfig{cfg.alpha, cfg.score_bucket_size, 1e9})), dump(out));
    for (int shards : {1, 3, 16}) {
      EXPECT_EQ(dump(select_sharded(pre, cfg, shards, 2)), dump(out));
    }
    std::reverse(rows.begin(), rows.end());
    EXPECT_EQ(dump(select(preprocess(rows, cfg.alpha), cfg)), dump(out));
    // At most one row per head, all drawn from the input.
    std::set<std::string> heads;
    for (const auto& m : out) {
      EXPECT_TRUE(heads.insert(m.matched_head_id).second);
      EXPECT_NE(std::find(pre.begin(), pre.end(), m), pre.end());
    }
    EXPECT_TRUE(std::is_sorted(out.begin(), out.end(), matched_less));
  }
}

TEST(Select, RejectsNonPositiveBuckets) {
  EXPECT_THROW(select({row("s", 0, "h", "r", "t", 0.9)}, InjectionConfig{0.5, 0.0, 1.0}), Error);
  EXPECT_TRUE(select({}, InjectionConfig{}).empty());
}

TEST(MatchedTriple, JsonRoundTripAndSchemaCheck) {
  const MatchedTriple m = row("d#0", 3, "kidney", "cause_of", "anemia", 0.75, 2);
  EXPECT_EQ(matched_from_json(to_json(m)), m);
  json bad = to_json(m);
  bad["schema_version"] = 99;
  EXPECT_THROW(matched_from_json(bad), Error);
  bad = to_json(m);
  bad.erase("tail");
  try {
    matched_from_json(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchemaMismatch);
  }
}

class InjectSeedKg : public ::testing::Test {
 protected:
  Vocabulary vocab{{"[PAD]", "[UNK]", "[MASK]", "kidney", "disease", "anemia", "stone", "pain", "a", "b",
                    "c", "d", "e", "f", "g", "h"}};
  RelationSet relations{{"cause_of", "has_finding_site"}};
  std::vector<TokenSequence> seqs = {segment({"d1", "kidney disease a b c"}, vocab).front(),
                                     segment({"d2", "kidney stone d e"}, vocab).front()};
};

TEST_F(InjectSeedKg, ReportCountsMatchTheInjectedKg) {
  const std::vector<MatchedTriple> matches = {
      row("d1#0", 0, "kidney disease", "cause_of", "anemia", 0.9, 2),
      row("d1#0", 0, "kidney disease", "has_finding_site", "kidney", 0.8, 2),
      row("d1#0", 0, "kidney", "cause_of", "pain", 0.95, 1),  // same start slot, shorter head
      row("d2#0", 0, "kidney stone", "cause_of", "a b c d e f g h", 0.99, 2),  // 8 tokens
      row("d2#0", 0, "kidney stone", "cause_of", "pain", 0.7, 2),
      row("d2#0", 3, "e", "cause_of", "f", 0.4, 1)};  // below alpha
  const InjectionResult r = inject_seed_kg(seqs, matches, relations, vocab);
  EXPECT_EQ(r.report.input_matches, 6u);
  EXPECT_EQ(r.report.over_capacity, 1u);
  EXPECT_EQ(r.report.after_threshold, 4u);
  EXPECT_EQ(r.report.selected, 3u);
  EXPECT_EQ(r.report.slot_conflicts, 1u);
  EXPECT_EQ(r.report.injected, r.seed_kg.size());
  size_t per_rel = 0;
  for (const auto& [_, n] : r.report.per_relation) per_rel += n;
  EXPECT_EQ(per_rel, r.seed_kg.size());
  size_t in_graphs = 0;
  for (const auto& g : r.graphs) in_graphs += static_cast<size_t>(g.injected_count());
  EXPECT_EQ(in_graphs, r.seed_kg.size());
  // The longer head keeps the slot.
  EXPECT_EQ(r.graphs[0].leaves[0].head_span, (Span{0, 2}));
  EXPECT_EQ(r.graphs[0].leaves[0].leaf_token_ids[0], vocab.find("anemia"));
  const json table = to_json(r.report)["relations"];
  ASSERT_EQ(table.size(), 1u);
  EXPECT_EQ(table[0]["relation"], "cause_of");
  EXPECT_EQ(table[0]["injections"], 2);
}

TEST_F(InjectSeedKg, UnknownSequenceOrRelationIsRejected) {
  EXPECT_THROW(inject_seed_kg(seqs, {row("zz#0", 0, "kidney", "cause_of", "pain", 0.9)}, relations, vocab),
               Error);
  EXPECT_THROW(inject_seed_kg(seqs, {row("d1#0", 0, "kidney", "nope", "pain", 0.9)}, relations, vocab),
               Error);
}

TEST(RelationTable, SortedByCountThenName) {
  const json t = relation_table({{"b", 2}, {"a", 2}, {"c", 5}});
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0]["relation"], "c");
  EXPECT_EQ(t[1]["relation"], "a");
  EXPECT_EQ(t[2]["relation"], "b");
  EXPECT_EQ(t[2]["#"], 3);
}

}  // namespace
}  // namespace graphmert
