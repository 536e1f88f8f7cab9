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

// Seeded generator for a small biomedical-flavoured corpus made of
// pseudo-words. Every document states a few facts of the seed KG in plain
// sentences, so tails are recoverable from context. Used for the bundled
// fixture and for end-to-end tests.

#pragma once

#include <set>
#include <string>
#include <vector>

#include "graphmert/corpus.hpp"
#include "graphmert/linker.hpp"

namespace graphmert {

struct SyntheticConfig {
  int docs = 200;
  int heads = 60;
  int tails = 90;
  int distractor_concepts = 40;
  int facts_per_doc = 2;
  uint64_t seed = 7;
};

struct SyntheticFact {
  std::string head, relation, tail;
};

struct SyntheticCorpus {
  std::vector<Document> docs;
  std::vector<std::vector<SyntheticFact>> doc_facts;  // aligned with docs
  std::vector<std::string> vocab_tokens;
  std::vector<std::pair<std::string, std::string>> concepts;  // (id, name)
  std::vector<Triple> seed_triples;
  std::vector<std::string> relations;  // usable (not blocklisted)
  std::vector<std::string> blocked_relations;
};

namespace synth {

inline const std::vector<std::string>& relation_names() {
  static const std::vector<std::string> k = {"associated_with", "has_finding_site",
                                             "may_be_treated_by", "has_causative_agent",
                                             "cause_of", "has_component"};
  return k;
}

// Connective used when a fact is written out.
inline std::string phrase(const std::string& relation) {
  if (relation == "associated_with") return "is associated with";
  if (relation == "has_finding_site") return "involves the";
  if (relation == "may_be_treated_by") return "may respond to";
  if (relation == "has_causative_agent") return "is driven by";
  if (relation == "cause_of") return "often leads to";
  return "contains";
}

// Background sentences; the corpus repeats them so that most root tokens are
// predictable from context, as in real abstracts.
inline const std::vector<std::string>& filler_sentences() {
  static const std::vector<std::string> k = {
      "patients with higher serum levels were observed in the cohort",
      "we found significant differences among adults at baseline",
      "the clinical analysis was measured after twelve months",
      "treatment outcomes were compared with controls in the trial",
      "the risk was increased in the group with early onset",
      "data from the follow up study suggest reduced severity",
      "plasma levels were lower among patients after treatment",
      "the cohort was followed for five years",
      "severity was higher in adults with long disease duration",
      "we measured serum markers in the study group",
      "clinical outcomes improved for the treated group",
      "baseline data were collected for all patients",
      "the trial compared two groups of adults",
      "significant changes were observed after six months",
      "higher risk was found among older patients",
      "the analysis adjusted for age and sex"};
  return k;
}

inline std::vector<std::string> filler() {
  std::set<std::string> words;
  for (const auto& s : filler_sentences()) {
    for (const auto& w : split_whitespace(s)) words.insert(w);
  }
  return {words.begin(), words.end()};
}

inline const std::vector<std::string>& syllables() {
  static const std::vector<std::string> k = {"ka", "ro", "mi", "tel", "vas", "pan", "dor",
                                             "lex", "ur", "sin", "cor", "nep", "gly", "hep",
                                             "ad", "fib", "os", "tri", "lu", "mar", "ze",
                                             "qui", "bra", "ven"};
  return k;
}

inline const std::vector<std::string>& suffixes() {
  static const std::vector<std::string> k = {"itis", "osis", "emia", "ase", "ine", "oma",
                                             "pathy", "ol", "ide", "in"};
  return k;
}

inline std::string pseudo_word(Rng& rng) {
  const auto& syl = syllables();
  const auto& suf = suffixes();
  std::string w;
  const int n = 2 + static_cast<int>(rng.uniform_int(2));
  for (int i = 0; i < n; ++i) w += syl[rng.uniform_int(syl.size())];
  return w + suf[rng.uniform_int(suf.size())];
}

// Unique entity names of one or two pseudo-words.
inline std::vector<std::string> entities(Rng& rng, int count, std::set<std::string>& taken) {
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < count) {
    std::string name = pseudo_word(rng);
    if (rng.bernoulli(0.35)) name += " " + pseudo_word(rng);
    if (!taken.insert(name).second) continue;
    out.push_back(name);
  }
  return out;
}

}  // namespace synth

inline SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& cfg) {
  if (cfg.docs < 1 || cfg.heads < 1 || cfg.tails < 4 || cfg.facts_per_doc < 1) {
    throw invalid_argument("synthetic corpus: sizes must be positive");
  }
  Rng rng(cfg.seed);
  SyntheticCorpus sc;
  sc.relations = synth::relation_names();
  sc.blocked_relations = {"mapped_to", "was_a"};

  const auto fill = synth::filler();
  std::set<std::string> taken(fill.begin(), fill.end());
  const auto heads = synth::entities(rng, cfg.heads, taken);
  const auto tails = synth::entities(rng, cfg.tails, taken);
  const auto distractors = synth::entities(rng, cfg.distractor_concepts, taken);

  // Seed KG: every head gets two or three usable relations and, sometimes,
  // a blocklisted one.
  std::map<std::string, std::vector<Triple>> usable;
  for (const auto& h : heads) {
    std::vector<std::string> rels = sc.relations;
    for (size_t i = 0; i + 1 < rels.size(); ++i) std::swap(rels[i], rels[i + rng.uniform_int(rels.size() - i)]);
    const int n = 2 + static_cast<int>(rng.uniform_int(2));
    for (int i = 0; i < n; ++i) {
      Triple t{h, rels[i], tails[rng.uniform_int(tails.size())], std::nullopt, std::nullopt};
      usable[h].push_back(t);
      sc.seed_triples.push_back(t);
    }
    if (rng.bernoulli(0.3)) {
      sc.seed_triples.push_back({h, sc.blocked_relations[rng.uniform_int(2)],
                                 tails[rng.uniform_int(tails.size())], std::nullopt, std::nullopt});
    }
  }

  const auto& sentences = synth::filler_sentences();
  auto background = [&]() { return sentences[rng.uniform_int(sentences.size())] + " . "; };
  for (int d = 0; d < cfg.docs; ++d) {
    std::vector<SyntheticFact> facts;
    std::string text;
    std::set<std::string> used_heads;
    for (int f = 0; f < cfg.facts_per_doc; ++f) {
      const std::string& h = heads[rng.uniform_int(heads.size())];
      if (!used_heads.insert(h).second) continue;
      const auto& options = usable.at(h);
      const Triple& t = options[rng.uniform_int(options.size())];
      facts.push_back({t.head, t.relation, t.tail});
      text += background() + "in this report , " + t.head + " " + synth::phrase(t.relation) + " " +
              t.tail + " . ";
    }
    text += background();
    text.pop_back();
    char id[32];
    std::snprintf(id, sizeof id, "doc%04d", d);
    sc.docs.push_back({id, text});
    sc.doc_facts.push_back(std::move(facts));
  }

  // Concepts: every entity plus distractors with look-alike names.
  int next = 1;
  auto add_concept = [&](const std::string& name) {
    char id[16];
    std::snprintf(id, sizeof id, "C%07d", next++);
    sc.concepts.emplace_back(id, name);
  };
  for (const auto& h : heads) add_concept(h);
  for (const auto& t : tails) add_concept(t);
  for (const auto& x : distractors) add_concept(x);

  std::set<std::string> words;
  for (const auto& w : fill) words.insert(w);
  for (const auto& w : split_whitespace("in this report")) words.insert(w);
  for (const auto& r : sc.relations) {
    for (const auto& w : split_whitespace(synth::phrase(r))) words.insert(w);
  }
  for (const auto* group : {&heads, &tails, &distractors}) {
    for (const auto& e : *group) {
      for (const auto& w : split_whitespace(e)) words.insert(w);
    }
  }
  sc.vocab_tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", ".", ",", "##s"};
  for (int digit = 0; digit <= 9; ++digit) sc.vocab_tokens.push_back(std::to_string(digit));
  sc.vocab_tokens.insert(sc.vocab_tokens.end(), words.begin(), words.end());
  return sc;
}

// Writes corpus.jsonl, vocab.txt, seed_triples.jsonl, concepts.jsonl and
// blocklist.txt into `dir`.
inline void write_synthetic_corpus(const SyntheticCorpus& sc, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<json> rows;
  for (const auto& d : sc.docs) rows.push_back({{"doc_id", d.doc_id}, {"text", d.text}});
  write_jsonl(dir + "/corpus.jsonl", rows);
  Vocabulary(sc.vocab_tokens).save(dir + "/vocab.txt");
  rows.clear();
  for (const auto& t : sc.seed_triples) {
    rows.push_back({{"head", t.head}, {"relation", t.relation}, {"tail", t.tail}});
  }
  write_jsonl(dir + "/seed_triples.jsonl", rows);
  rows.clear();
  for (const auto& [id, name] : sc.concepts) rows.push_back({{"concept_id", id}, {"name", name}});
  write_jsonl(dir + "/concepts.jsonl", rows);
  std::string block;
  for (const auto& r : default_blocklist()) block += r + "\n";
  write_file(dir + "/blocklist.txt", block);
}

}  // namespace graphmert
