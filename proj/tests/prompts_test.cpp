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

#include "graphmert/prompts.hpp"

namespace graphmert {
namespace {

TEST(Prompts, StripThink) {
  EXPECT_EQ(strip_think("<think>a</think>b"), " b");
  EXPECT_EQ(strip_think("<THINK>x\ny</Think>[yes]<think>z</think>"), " [yes] ");
  EXPECT_EQ(strip_think("[no] <think>never closed [yes]"), "[no] ");
  EXPECT_EQ(strip_think("plain"), "plain");
}

TEST(Prompts, BinaryVerdict) {
  const auto b = VerdictScheme::kBinary;
  EXPECT_EQ(parse_verdict("[yes]", b), Verdict::kYes);
  EXPECT_EQ(parse_verdict("<think>[yes]</think> so [ No ]", b), Verdict::kNo);
  EXPECT_EQ(parse_verdict("[no] ... on reflection [YES]", b), Verdict::kYes);  // last one wins
  EXPECT_EQ(parse_verdict("yes", b), Verdict::kUnparseable);
  EXPECT_EQ(parse_verdict("[maybe]", b), Verdict::kUnparseable);
  EXPECT_EQ(parse_verdict("<think>[yes]", b), Verdict::kUnparseable);
}

TEST(Prompts, ValidityVerdict) {
  const auto v = VerdictScheme::kValidity;
  EXPECT_EQ(parse_verdict("maybe - plausible", v), Verdict::kMaybe);
  EXPECT_EQ(parse_verdict("**No**, wrong direction", v), Verdict::kNo);
  EXPECT_EQ(parse_verdict("the answer is [maybe]", v), Verdict::kMaybe);
  EXPECT_EQ(parse_verdict("nothing here", v), Verdict::kUnparseable);
  EXPECT_EQ(parse_verdict("yesterday", v), Verdict::kUnparseable);
}

TEST(Prompts, ValidityBatch) {
  const auto out = parse_validity_batch("<think>1. no</think>\n1. yes - ok\n2) maybe\n  4: no\n9. yes\nfoo", 4);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0], Verdict::kYes);
  EXPECT_EQ(out[1], Verdict::kMaybe);
  EXPECT_EQ(out[2], Verdict::kUnparseable);
  EXPECT_EQ(out[3], Verdict::kNo);
}

TEST(Prompts, StringList) {
  EXPECT_EQ(parse_string_list(R"(Sure: ["a", "b c"].)"), (std::vector<std::string>{"a", "b c"}));
  EXPECT_EQ(parse_string_list(R"(<think>["x"]</think>["y", 3, "z"])"), (std::vector<std::string>{"y", "z"}));
  EXPECT_EQ(parse_string_list(R"([["nested"]])"), (std::vector<std::string>{}));
  EXPECT_TRUE(parse_string_list("no list").empty());
  EXPECT_TRUE(parse_string_list("[broken").empty());
}

TEST(Prompts, Object) {
  EXPECT_EQ(parse_object(R"(x {"h": ["r"]} y)").at("h").at(0), "r");
  EXPECT_TRUE(parse_object("[1]").empty());
  EXPECT_TRUE(parse_object("{bad}").empty());
}

TEST(Prompts, TemplatesCarryTheirSlots) {
  const auto p = prompts::combine_tokens("seq text", "head x", "rel_y", {"tok1", "tok2"}, kDefaultDomain);
  for (const char* s : {"seq text", "head x", "rel_y", "tok1", "tok2"}) EXPECT_NE(p.find(s), std::string::npos) << s;
  const auto v = prompts::validity({{"h1", "r1", "t1"}, {"h2", "r2", "t2"}}, kDefaultDomain);
  EXPECT_NE(v.find("1."), std::string::npos);
  EXPECT_NE(v.find("2."), std::string::npos);
}

}  // namespace
}  // namespace graphmert
