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

// Prompt templates for the helper and judge models, and parsers for their
// answers. Every builder also returns structured metadata (task + slots) in
// the ChatRequest so that offline backends can answer deterministically.

#pragma once

#include <regex>
#include <string>
#include <vector>

#include "graphmert/common.hpp"

namespace graphmert {

inline constexpr const char* kDefaultDomain = "diabetes and its comorbidities";

namespace prompts {

inline std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

inline std::string quoted_list(const std::vector<std::string>& items) {
  return json(items).dump();
}

inline std::string entity_discovery(const std::string& sequence, const std::string& domain) {
  return "You extract head entities for a biomedical knowledge graph about " + domain +
         ".\n\nRead the sequence below and list the entities (at most six words each) that are "
         "relevant to the domain: diseases, complications, findings, anatomy, drugs, genes, "
         "procedures and measurements that clarify them. Copy each entity exactly as written "
         "in the sequence. Answer with a JSON list of strings and nothing else; answer [] if "
         "there are none.\n\nSequence: " +
         sequence + "\nEntities:";
}

inline std::string relation_matching(const std::string& sequence,
                                     const std::vector<std::string>& heads,
                                     const std::vector<std::string>& relations,
                                     const std::string& domain) {
  return "You assign relations for a biomedical knowledge graph about " + domain +
         ".\n\nFor every head below, choose all relations from the allowed list that could "
         "start a plausible triple (head, relation, ?) supported by the sequence. Do not invent "
         "relations. Answer with a JSON object mapping each head to a list of relations.\n\n"
         "Allowed relations: " +
         join(relations, ", ") + "\nHeads: " + quoted_list(heads) + "\nSequence: " + sequence +
         "\nAnswer:";
}

inline std::string combine_tokens(const std::string& sequence, const std::string& head,
                                  const std::string& relation,
                                  const std::vector<std::string>& tokens,
                                  const std::string& domain) {
  return "You complete triples for a biomedical knowledge graph about " + domain +
         ".\n\nYou get a sequence, a head entity from it, a relation and candidate tokens "
         "predicted for the tail. Build tails by combining candidate tokens (subword pieces "
         "starting with ## attach to the previous token). Keep only tails that follow from the "
         "head through the relation in the right direction, are supported by the sequence or "
         "well-established knowledge, and are specific rather than vague. Use only candidate "
         "tokens. Think inside <think>...</think>, then answer with a JSON list of tail strings, "
         "or [] if none qualifies.\n\nSequence: " +
         sequence + "\nHead: " + head + "\nRelation: " + relation +
         "\nCandidate tokens: " + quoted_list(tokens) + "\nTails:";
}

enum class FactMode { kContextOnly, kGeneralTruth };

inline const char* fact_mode_name(FactMode m) {
  return m == FactMode::kContextOnly ? "context" : "general_truth";
}

inline std::string factscore(const std::string& context, const std::string& head,
                             const std::string& relation, const std::string& tail, FactMode mode,
                             const std::string& domain) {
  std::string criteria =
      "- Logical alignment: the tail follows from the head through the relation, and the "
      "relation fits the entity types.\n"
      "- Context support: the sequence supports the triple.";
  if (mode == FactMode::kGeneralTruth) {
    criteria +=
        " A triple that states established general truth may be accepted even when the "
        "sequence does not spell it out, as long as nothing contradicts it; reject triples "
        "without reliable support.\n"
        "- Knowledge value: the triple adds new, meaningful information to the graph.";
  }
  return "You judge triples for a biomedical knowledge graph about " + domain +
         ".\n\nAccept the triple with [yes] or reject it with [no] using these criteria:\n" +
         criteria +
         "\n\nReason inside <think>...</think> and finish with only [yes] or [no].\n\n"
         "Sequence: " +
         context + "\nHead: " + head + "\nRelation: " + relation + "\nTail: " + tail +
         "\nJudgment:";
}

inline std::string validity(const std::vector<std::vector<std::string>>& triples,
                            const std::string& domain) {
  std::string list;
  for (size_t i = 0; i < triples.size(); ++i) {
    list += std::to_string(i + 1) + ". (" + join(triples[i], ", ") + ")\n";
  }
  return "For each numbered triple of a biomedical knowledge graph about " + domain +
         ", state whether it is ontologically valid. Start each answer line with the triple "
         "number followed by yes, no or maybe, then a very short reason.\n\n" +
         list + "Answers:";
}

}  // namespace prompts

// ---------------------------------------------------------------------------
// Parsing.

inline std::string strip_think(std::string text) {
  static const std::regex kThink("<think>[\\s\\S]*?</think>", std::regex::icase);
  text = std::regex_replace(text, kThink, " ");
  // An unterminated block swallows the rest of the answer.
  const size_t open = to_lower_ascii(text).find("<think>");
  if (open != std::string::npos) text.erase(open);
  return text;
}

// JSON list of strings, tolerating prose or think blocks around it. Returns
// an empty list when nothing parseable is found.
inline std::vector<std::string> parse_string_list(const std::string& raw) {
  const std::string text = strip_think(raw);
  const size_t close = text.rfind(']');
  if (close == std::string::npos) return {};
  for (size_t open = text.rfind('[', close); open != std::string::npos;
       open = open == 0 ? std::string::npos : text.rfind('[', open - 1)) {
    try {
      const json j = json::parse(text.substr(open, close - open + 1));
      if (!j.is_array()) continue;
      std::vector<std::string> out;
      for (const auto& e : j) {
        if (e.is_string()) out.push_back(e.get<std::string>());
      }
      return out;
    } catch (const json::exception&) {
    }
  }
  return {};
}

// JSON object {head: [relations]} tolerant of surrounding text.
inline json parse_object(const std::string& raw) {
  const std::string text = strip_think(raw);
  const size_t open = text.find('{');
  const size_t close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    return json::object();
  }
  try {
    json j = json::parse(text.substr(open, close - open + 1));
    return j.is_object() ? j : json::object();
  } catch (const json::exception&) {
    return json::object();
  }
}

enum class Verdict { kYes, kNo, kMaybe, kUnparseable };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kYes: return "yes";
    case Verdict::kNo: return "no";
    case Verdict::kMaybe: return "maybe";
    default: return "unparseable";
  }
}

inline Verdict verdict_from_name(const std::string& s) {
  if (s == "yes") return Verdict::kYes;
  if (s == "no") return Verdict::kNo;
  if (s == "maybe") return Verdict::kMaybe;
  return Verdict::kUnparseable;
}

enum class VerdictScheme { kBinary, kValidity };

// Binary: the last bracketed [yes]/[no] after think blocks are removed.
// Validity: the last bracketed token if any, otherwise a leading yes/maybe/no.
inline Verdict parse_verdict(const std::string& raw, VerdictScheme scheme) {
  const std::string text = to_lower_ascii(strip_think(raw));
  static const std::regex kBracket("\\[\\s*(yes|no|maybe)\\s*\\]");
  Verdict found = Verdict::kUnparseable;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kBracket);
       it != std::sregex_iterator(); ++it) {
    found = verdict_from_name((*it)[1].str());
  }
  if (scheme == VerdictScheme::kBinary) {
    return found == Verdict::kMaybe ? Verdict::kUnparseable : found;
  }
  if (found != Verdict::kUnparseable) return found;
  static const std::regex kLeading("^[\\s\\d.):*-]*(yes|no|maybe)\\b");
  std::smatch m;
  if (std::regex_search(text, m, kLeading)) return verdict_from_name(m[1].str());
  return Verdict::kUnparseable;
}

// One verdict per numbered line ("3. maybe - reason"); missing numbers stay
// unparseable.
inline std::vector<Verdict> parse_validity_batch(const std::string& raw, size_t count) {
  std::vector<Verdict> out(count, Verdict::kUnparseable);
  const std::string text = strip_think(raw);
  static const std::regex kLine("^\\s*(\\d{1,6})[.):]?\\s*(.*)$");
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    std::smatch m;
    if (std::regex_match(line, m, kLine)) {
      const size_t idx = std::stoul(m[1].str());
      if (idx >= 1 && idx <= count) {
        out[idx - 1] = parse_verdict(m[2].str(), VerdictScheme::kValidity);
      }
    }
    start = end + 1;
  }
  return out;
}

}  // namespace graphmert
