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

// Deterministic offline stand-in for the helper and judge models. It reads
// the structured request metadata (never the prompt prose) and answers the
// way a cooperative but imperfect model would, so every pipeline gate sees
// both accepted and rejected inputs.

#pragma once

#include <algorithm>
#include <cctype>
#include <string>

#include "graphmert/prompts.hpp"
#include "graphmert/services.hpp"

namespace graphmert {

namespace mock {

inline bool contains_phrase(const std::string& haystack, const std::string& phrase) {
  if (phrase.empty()) return false;
  const std::string h = " " + normalize_for_embedding(haystack) + " ";
  return h.find(" " + normalize_for_embedding(phrase) + " ") != std::string::npos;
}

// Whole alphanumeric words first, then one two-word combination, then one
// tail built from a word that was never offered (the gate must drop it).
inline std::string combine(const json& meta, uint64_t seed) {
  std::vector<std::string> words;
  for (const auto& t : meta.value("tokens", json::array())) {
    const std::string s = t.get<std::string>();
    if (s.empty() || s.rfind("##", 0) == 0) continue;
    if (!std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isalnum(ch); })) continue;
    words.push_back(s);
  }
  json out = json::array();
  for (size_t i = 0; i < words.size() && i < 5; ++i) out.push_back(words[i]);
  if (words.size() >= 2) out.push_back(words[0] + " " + words[1]);
  const uint64_t h = splitmix64(fnv1a(meta.value("head", "") + "|" + meta.value("relation", "")) ^ seed);
  out.push_back("unlisted" + std::to_string(h % 97));
  return "<think>combining the candidate tokens</think>\n" + out.dump();
}

inline std::string judge_fact(const json& meta, uint64_t seed) {
  const bool in_context = contains_phrase(meta.value("context", ""), meta.value("tail", ""));
  bool yes = in_context;
  if (!yes && meta.value("mode", "") == "general_truth") {
    const std::string key = meta.value("head", "") + "|" + meta.value("relation", "") + "|" +
                            meta.value("tail", "");
    yes = splitmix64(fnv1a(key) ^ seed) % 3 == 0;
  }
  return std::string("<think>checking the sequence</think> ") + (yes ? "[yes]" : "[no]");
}

inline std::string judge_validity(const json& meta, uint64_t seed) {
  std::string out = "<think>reviewing the batch</think>\n";
  size_t i = 0;
  for (const auto& row : meta.value("triples", json::array())) {
    const uint64_t h = splitmix64(fnv1a(row.dump()) ^ seed) % 10;
    const char* v = h < 6 ? "yes" : h < 8 ? "maybe" : "no";
    out += std::to_string(++i) + ". " + v + " - mock rationale\n";
  }
  return out;
}

}  // namespace mock

// Responder for MockChatClient keyed on metadata["task"].
inline MockChatClient::Responder mock_responder(uint64_t seed = 0) {
  return [seed](const ChatRequest& req) -> std::optional<std::string> {
    const std::string task = req.metadata.value("task", "");
    if (task == "entity_discovery") return std::string("[]");
    if (task == "relation_matching") return std::string("{}");
    if (task == "combine_tokens") return mock::combine(req.metadata, seed);
    if (task == "factscore") return mock::judge_fact(req.metadata, seed);
    if (task == "validity") return mock::judge_validity(req.metadata, seed);
    return std::nullopt;
  };
}

}  // namespace graphmert
