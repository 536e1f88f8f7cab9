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

#include <algorithm>
#include <filesystem>

#include "graphmert/mock_clients.hpp"
#include "graphmert/verifier.hpp"
#include "test_util.hpp"

namespace graphmert {
namespace {

using testing::scratch_dir;

ExtractedTriple triple(std::string h, std::string r, std::string t, std::vector<std::string> prov) {
  return {std::move(h), std::move(r), std::move(t), 0.9, std::move(prov)};
}

// Answers by tail: "yes*" -> [yes], "no*" -> [no], "junk*" -> no verdict,
// "down*" -> unreachable.
MockChatClient::Responder by_tail() {
  return [](const ChatRequest& req) -> std::optional<std::string> {
    const std::string tail = req.metadata.value("tail", "");
    if (tail.rfind("down", 0) == 0) return std::nullopt;
    if (tail.rfind("yes", 0) == 0) return std::string("<think>[no]</think> [yes]");
    if (tail.rfind("no", 0) == 0) return std::string("[no]");
    return std::string("I am not sure.");
  };
}

const std::map<std::string, std::string> kContexts = {{"s1", "ctx one"}, {"s2", "ctx two"}};

TEST(Verifier, StrictAndLenientByHand) {
  // 6 pairs: yes x2, no x1, junk x2, down x1.
  const std::vector<ExtractedTriple> kg = {triple("a", "r", "yes1", {"s1", "s2"}),
                                           triple("b", "r", "no1", {"s1"}),
                                           triple("c", "q", "junk1", {"s1", "s2"}),
                                           triple("d", "q", "down1", {"s2"})};
  MockChatClient judge(by_tail());
  JudgeCache cache;
  VerifierConfig cfg;
  const auto lenient = factscore(kg, kContexts, judge, {}, prompts::FactMode::kContextOnly, cache, cfg);
  EXPECT_EQ(lenient.pairs, 6u);
  EXPECT_EQ(lenient.judged, 5u);
  EXPECT_EQ(lenient.unparseable, 2u);
  EXPECT_DOUBLE_EQ(lenient.score, 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(lenient.coverage, 5.0 / 6.0);
  EXPECT_EQ(lenient.per_relation.at("q").no, 2u);
  cfg.strict = true;
  const auto strict = factscore(kg, kContexts, judge, {}, prompts::FactMode::kContextOnly, cache, cfg);
  EXPECT_DOUBLE_EQ(strict.score, 2.0 / 3.0);
  EXPECT_THROW(factscore({triple("a", "r", "yes", {"s9"})}, kContexts, judge, {},
                         prompts::FactMode::kContextOnly, cache),
               Error);
}

// Property: the reports do not depend on the order of the input KG.
TEST(Verifier, OrderInvariant) {
  Rng rng(5);
  std::vector<ExtractedTriple> kg;
  const char* tails[] = {"yes", "no", "junk"};
  for (int i = 0; i < 45; ++i) {
    kg.push_back(triple("h" + std::to_string(i), i % 2 ? "r" : "q", std::string(tails[i % 3]) + std::to_string(i),
                        {i % 4 ? "s1" : "s2"}));
  }
  MockChatClient judge(by_tail());
  MockChatClient validity(mock_responder(3));
  JudgeCache cache;
  const auto f0 = to_json(factscore(kg, kContexts, judge, {}, prompts::FactMode::kGeneralTruth, cache)).dump();
  const auto v0 = to_json(validity_score(kg, validity, {}, cache)).dump();
  for (int trial = 0; trial < 5; ++trial) {
    for (size_t i = kg.size() - 1; i > 0; --i) std::swap(kg[i], kg[rng.uniform_int(i + 1)]);
    VerifierConfig cfg;
    cfg.jobs = 1 + trial % 3;
    EXPECT_EQ(to_json(factscore(kg, kContexts, judge, {}, prompts::FactMode::kGeneralTruth, cache, cfg)).dump(), f0);
    EXPECT_EQ(to_json(validity_score(kg, validity, {}, cache, cfg)).dump(), v0);
  }
}

TEST(Verifier, ValidityIsBatchedByTwenty) {
  std::vector<ExtractedTriple> kg;
  for (int i = 0; i < 45; ++i) kg.push_back(triple("h" + std::to_string(i), "r", "t", {"s1"}));
  std::vector<size_t> sizes;
  std::mutex mu;
  MockChatClient judge([&](const ChatRequest& req) -> std::optional<std::string> {
    const auto& rows = req.metadata.at("triples");
    {
      std::lock_guard lock(mu);
      sizes.push_back(rows.size());
    }
    std::string out;
    for (size_t i = 1; i <= rows.size(); ++i) out += std::to_string(i) + ". " + (i % 2 ? "yes" : "maybe") + "\n";
    return out;
  });
  JudgeCache cache;
  const auto rep = validity_score(kg, judge, {}, cache);
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<size_t>{5, 20, 20}));
  EXPECT_EQ(rep.judged, 45u);
  EXPECT_EQ(rep.yes, 10u + 10u + 3u);
  EXPECT_DOUBLE_EQ(rep.yes_fraction + rep.maybe_fraction + rep.no_fraction, 1.0);
}

TEST(Verifier, ValidityCountsUnjudgedAndUnparseable) {
  const std::vector<ExtractedTriple> kg = {triple("a", "r", "t1", {"s1"}), triple("b", "r", "t2", {"s1"}),
                                           triple("c", "r", "t3", {"s1"})};
  MockChatClient judge([](const ChatRequest&) { return std::optional<std::string>("1. no\n3. [maybe]"); });
  JudgeCache cache;
  const auto rep = validity_score(kg, judge, {}, cache);
  EXPECT_EQ(rep.judged, 2u);
  EXPECT_EQ(rep.unparseable, 1u);
  EXPECT_DOUBLE_EQ(rep.no_fraction, 0.5);
  EXPECT_DOUBLE_EQ(rep.maybe_fraction, 0.5);
  MockChatClient down;
  const auto none = validity_score(kg, down, {}, cache);
  EXPECT_EQ(none.unjudged, 3u);
  EXPECT_EQ(none.yes_fraction, 0.0);
}

TEST(JudgeCache, KeyDependsOnEveryPart) {
  const auto k = JudgeCache::key("p", "t", "c");
  EXPECT_EQ(k.size(), 16u);
  EXPECT_EQ(k, JudgeCache::key("p", "t", "c"));
  EXPECT_NE(k, JudgeCache::key("p2", "t", "c"));
  EXPECT_NE(k, JudgeCache::key("p", "t2", "c"));
  EXPECT_NE(k, JudgeCache::key("p", "t", "c2"));
}

TEST(JudgeCache, RoundTripsThroughFiles) {
  const std::string dir = scratch_dir("judge_cache");
  const auto k = JudgeCache::key("p", "t", "c");
  {
    JudgeCache cache(dir);
    EXPECT_FALSE(cache.get(k));
    cache.put(k, "p", "[yes]");
  }
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(dir) / k.substr(0, 2) / (k + ".json")));
  JudgeCache again(dir);
  EXPECT_EQ(again.get(k).value_or(""), "[yes]");
  write_file((std::filesystem::path(dir) / k.substr(0, 2) / (k + ".json")).string(), "{torn");
  EXPECT_FALSE(again.get(k));
  JudgeCache off;
  off.put(k, "p", "x");
  EXPECT_FALSE(off.get(k));
}

TEST(JudgeCache, SecondRunNeedsNoJudge) {
  const std::string dir = scratch_dir("judge_rerun");
  const std::vector<ExtractedTriple> kg = {triple("a", "r", "yes", {"s1"}), triple("b", "r", "no", {"s2"})};
  MockChatClient judge(by_tail());
  JudgeCache first(dir);
  const auto a = to_json(factscore(kg, kContexts, judge, {}, prompts::FactMode::kContextOnly, first)).dump();
  EXPECT_EQ(first.misses(), 2u);
  MockChatClient dead;
  JudgeCache second(dir);
  const auto b = to_json(factscore(kg, kContexts, dead, {}, prompts::FactMode::kContextOnly, second)).dump();
  EXPECT_EQ(a, b);
  EXPECT_EQ(second.hits(), 2u);
  EXPECT_EQ(dead.calls(), 0);
}

}  // namespace
}  // namespace graphmert
