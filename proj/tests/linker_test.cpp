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

#include "graphmert/linker.hpp"
#include "graphmert/mock_clients.hpp"
#include "test_util.hpp"

namespace graphmert {
namespace {

TEST(Char3grams, EdgeCases) {
  EXPECT_TRUE(char3grams("").empty());
  EXPECT_EQ(char3grams("ab"), (std::set<std::string>{"ab"}));
  EXPECT_EQ(char3grams("ABC"), (std::set<std::string>{"abc"}));
  EXPECT_EQ(char3grams("aaaa"), (std::set<std::string>{"aaa"}));
  EXPECT_EQ(char3grams("kidney").size(), 4u);
}

TEST(Jaccard, WorkedExamples) {
  EXPECT_DOUBLE_EQ(jaccard(char3grams("kidney"), char3grams("kidneys")), 0.8);
  EXPECT_DOUBLE_EQ(jaccard(char3grams("kidney"), char3grams("KIDNEY")), 1.0);
  EXPECT_EQ(jaccard({}, {}), 0.0);
  EXPECT_EQ(jaccard(char3grams("abc"), char3grams("xyz")), 0.0);
}

// Property: symmetric, in [0, 1], one exactly on identical inputs.
TEST(Jaccard, MetricProperties) {
  Rng rng(3);
  auto word = [&]() {
    std::string s;
    for (int i = 0, n = 1 + static_cast<int>(rng.uniform_int(8)); i < n; ++i) s += "abcd"[rng.uniform_int(4)];
    return s;
  };
  for (int i = 0; i < 500; ++i) {
    const auto a = char3grams(word()), b = char3grams(word());
    const double j = jaccard(a, b);
    EXPECT_EQ(j, jaccard(b, a));
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, 1.0);
    EXPECT_EQ(jaccard(a, a), 1.0);
  }
}

// Concepts drawn around a few well-separated centres, so the clustered
// index can actually prune.
ConceptIndex clustered_concepts(int n, int centres, Rng& rng) {
  const int dim = 16;
  std::vector<std::vector<double>> c(centres, std::vector<double>(dim));
  for (auto& v : c) {
    for (double& x : v) x = rng.normal();
    normalize_unit(v);
  }
  std::vector<ConceptEntry> out;
  for (int i = 0; i < n; ++i) {
    std::vector<double> v = c[i % centres];
    for (double& x : v) x += 0.08 * rng.normal();
    char id[16];
    std::snprintf(id, sizeof id, "C%05d", i);
    out.push_back({id, "name" + std::to_string(i), v});
  }
  return ConceptIndex(std::move(out));
}

TEST(ClusteredIndex, EqualsExactScanAndPrunes) {
  Rng rng(9);
  const ConceptIndex index = clustered_concepts(2000, 20, rng);
  const ClusteredIndex fast(index, 20, 4);
  size_t total_scanned = 0;
  for (int q = 0; q < 100; ++q) {
    std::vector<double> v = index.concepts()[rng.uniform_int(2000)].embedding;
    for (double& x : v) x += 0.05 * rng.normal();
    normalize_unit(v);
    size_t scanned = 0;
    const auto a = index.search(v, 10);
    const auto b = fast.search(v, 10, &scanned);
    total_scanned += scanned;
    ASSERT_EQ(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].index, b[i].index);
  }
  EXPECT_LT(total_scanned, 100u * 2000u / 2);
}

TEST(ConceptIndex, TiesBreakByConceptId) {
  std::vector<ConceptEntry> cs = {{"C2", "b", {1, 0}}, {"C1", "a", {1, 0}}, {"C3", "c", {0, 1}}};
  const ConceptIndex index(cs);
  const auto r = index.search({1, 0}, 2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(index.concepts()[r[0].index].concept_id, "C1");
  EXPECT_EQ(index.concepts()[r[1].index].concept_id, "C2");
  EXPECT_THROW(ConceptIndex({{"C1", "a", {1, 0}}, {"C1", "b", {0, 1}}}), Error);
}

TEST(Link, FirstCandidatePassingTheStrictGateWins) {
  // Query closest to "kidney stone" (jaccard with "kidneys" below 0.5), then
  // "kidney" (0.8).
  std::vector<ConceptEntry> cs = {{"C1", "kidney stone", {1.0, 0.1, 0}},
                                  {"C2", "kidney", {0.9, 0.4, 0}},
                                  {"C3", "kidneys", {0, 0, 1}}};
  const ConceptIndex index(cs);
  const Mention m{"s#0", "kidneys", {0, 1}};
  const auto got = link(m, {1, 0, 0}, index);
  ASSERT_TRUE(got.has_value());
  EXPECT_EQ(got->concept_id, "C2");
  EXPECT_DOUBLE_EQ(got->jaccard, 0.8);
  // With top_k = 1 only "kidney stone" is considered and it fails the gate.
  EXPECT_FALSE(link(m, {1, 0, 0}, index, LinkerConfig{1, 0.5}).has_value());
  // The gate is strict: J("abc", "abcab") = 1/3 does not clear a 1/3 threshold.
  EXPECT_FALSE(link({"s", "abc", {0, 1}}, {1, 0, 0},
                    ConceptIndex({{"X", "abcab", {1, 0, 0}}}), LinkerConfig{1, 1.0 / 3.0})
                   .has_value());
}

TEST(Mentions, ResolveAgainstTheSequence) {
  const Vocabulary v({"[PAD]", "[UNK]", "[MASK]", "the", "kidney", "stone", "liver", "##s"});
  const TokenSequence seq = segment({"d", "the kidney stone the kidneys"}, v).front();
  const auto ms = resolve_mentions(seq, {"Kidney Stone", "liver", "kidney", "kidney", "kidneys", "zebra"}, v);
  ASSERT_EQ(ms.size(), 3u);
  EXPECT_EQ(ms[0].surface, "kidney");
  EXPECT_EQ(ms[0].root_span, (Span{1, 2}));
  EXPECT_EQ(ms[1].surface, "kidney stone");
  EXPECT_EQ(ms[1].root_span, (Span{1, 3}));
  EXPECT_EQ(ms[2].surface, "kidneys");
  EXPECT_EQ(ms[2].root_span, (Span{4, 6}));
}

TEST(Mentions, ChatDiscoveryIsValidatedAgainstTheText) {
  const Vocabulary v({"[PAD]", "[UNK]", "[MASK]", "the", "kidney", "liver"});
  const TokenSequence seq = segment({"d", "the kidney"}, v).front();
  MockChatClient chat([](const ChatRequest&) {
    return std::optional<std::string>("<think>hmm</think> [\"kidney\", \"liver\"]");
  });
  const auto ms = discover_mentions_chat(chat, ClientConfig{}, seq, v);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].surface, "kidney");
}

TEST(KgStore, LookupIsCaseAndSpaceInsensitive) {
  KgStore s;
  s.add({"Kidney  Disease", "cause_of", "anemia", {}, {}});
  s.add({"kidney disease", "has_finding_site", "kidney", {}, {}});
  EXPECT_EQ(s.by_head("KIDNEY disease").size(), 2u);
  EXPECT_TRUE(s.by_head("liver").empty());
  EXPECT_EQ(s.relations(), (std::vector<std::string>{"cause_of", "has_finding_site"}));
  EXPECT_THROW(s.add({"", "r", "t", {}, {}}), Error);
}

TEST(SelectTriples, BlocklistCapAndOrder) {
  KgStore s;
  for (int i = 0; i < 10; ++i) s.add({"kidney", "r" + std::to_string(i % 3), "t" + std::to_string(i), {}, {}});
  s.add({"kidney", "mapped_to", "t99", {}, {}});
  const std::set<std::string> block(default_blocklist().begin(), default_blocklist().end());
  BowEmbedder emb(64, 0.6, 1);
  const LinkedEntity e{{"s", "kidney", {0, 1}}, "C1", "kidney", 1.0, 1.0};
  const auto out = select_triples("the kidney t3 t4 r1", {e}, s, block, emb, 4);
  ASSERT_EQ(out.size(), 1u);
  ASSERT_EQ(out[0].triples.size(), 4u);
  for (const auto& t : out[0].triples) EXPECT_NE(t.triple.relation, "mapped_to");
  for (size_t i = 1; i < 4; ++i) EXPECT_FALSE(scored_before(out[0].triples[i], out[0].triples[i - 1]));
  // The two triples whose words appear in the sequence rank first.
  std::set<std::string> top = {out[0].triples[0].triple.tail, out[0].triples[1].triple.tail};
  EXPECT_TRUE(top.count("t3") || top.count("t4"));
}

TEST(Blocklist, DefaultListCoversMappingRelations) {
  const auto& b = default_blocklist();
  for (const char* r : {"mapped_to", "was_a", "inverse_was_a", "replaced_by", "has_active_ingredient"}) {
    EXPECT_NE(std::find(b.begin(), b.end(), r), b.end()) << r;
  }
}

}  // namespace
}  // namespace graphmert
