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

// Triple extraction from a trained model:
//
//   (sequence, head, relation) -> masked leaf group -> top-k tail tokens
//   -> helper model combines tokens into tails -> token-subset gate
//   -> similarity gate (beta) -> deduplication with provenance

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "graphmert/chaingraph.hpp"
#include "graphmert/corpus.hpp"
#include "graphmert/linker.hpp"
#include "graphmert/model/graphmert.hpp"
#include "graphmert/prompts.hpp"
#include "graphmert/services.hpp"

namespace graphmert {

struct ExtractionQuery {
  std::string seq_id;
  std::string head;
  Span head_span;
  std::string relation;
};

struct TokenScore {
  std::string token;
  int id = 0;
  double probability = 0.0;
};

struct CandidateTail {
  std::string tail;
  std::vector<std::string> source_tokens;
};

struct ExtractedTriple {
  std::string head;
  std::string relation;
  std::string tail;
  double similarity = 0.0;
  std::vector<std::string> provenance;  // sorted, unique seq_ids
};

inline json to_json(const ExtractedTriple& t) {
  return json{{"schema_version", kSchemaVersion}, {"head", t.head},
              {"relation", t.relation},           {"tail", t.tail},
              {"similarity", t.similarity},       {"provenance", t.provenance}};
}

inline ExtractedTriple extracted_from_json(const json& j) {
  if (j.value("schema_version", kSchemaVersion) != kSchemaVersion) {
    throw Error(ErrorKind::kSchemaMismatch, "kg row: unsupported schema_version");
  }
  try {
    return {j.at("head").get<std::string>(), j.at("relation").get<std::string>(),
            j.at("tail").get<std::string>(), j.at("similarity").get<double>(),
            j.at("provenance").get<std::vector<std::string>>()};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchemaMismatch, std::string("kg row: ") + e.what());
  }
}

// Ranks vocabulary entries by their best probability over the seven masked
// slots; special tokens are never offered.
inline std::vector<TokenScore> predict_tail_tokens(const GraphmertModel& model,
                                                   const ChainGraph& graph,
                                                   const ExtractionQuery& q,
                                                   const RelationSet& relations,
                                                   const Vocabulary& vocab, size_t k = 20) {
  const auto head_ids = tokenize(normalize(q.head, NormalizeOptions{{}}), vocab);
  if (q.head_span.empty() || q.head_span.start < 0 || q.head_span.end > kRootCount ||
      head_ids.size() != static_cast<size_t>(q.head_span.size()) ||
      !std::equal(head_ids.begin(), head_ids.end(),
                  graph.roots.token_ids.begin() + q.head_span.start)) {
    throw invalid_argument("head '" + q.head + "' not found at its span in " + q.seq_id);
  }
  const PreparedExample ex = prepare_query(graph, relations.id(q.relation), q.head_span, vocab);
  const Matrix probs = predict_probabilities(model, ex);
  std::vector<TokenScore> scores;
  for (int v = 0; v < vocab.size(); ++v) {
    if (vocab.is_special(v)) continue;
    scores.push_back({vocab.token(v), v, probs.col(v).maxCoeff()});
  }
  k = std::min(k, scores.size());
  std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k), scores.end(),
                    [](const TokenScore& a, const TokenScore& b) {
                      return a.probability > b.probability ||
                             (a.probability == b.probability && a.id < b.id);
                    });
  scores.resize(k);
  return scores;
}

// A tail passes when it tokenizes, without [UNK], into offered tokens only.
inline bool passes_token_gate(const std::string& tail, const std::vector<std::string>& offered,
                              const Vocabulary& vocab) {
  const auto ids = tokenize(normalize(tail, NormalizeOptions{{}}), vocab);
  if (ids.empty()) return false;
  const std::set<std::string> allowed(offered.begin(), offered.end());
  for (int id : ids) {
    if (id == vocab.unk_id() || !allowed.count(vocab.token(id))) return false;
  }
  return true;
}

struct ComposeResult {
  size_t formed = 0;
  std::vector<CandidateTail> tails;  // gate survivors, unique
};

inline ComposeResult compose_tails(ChatClient& chat, const ClientConfig& cfg,
                                   const ExtractionQuery& q, const std::string& sequence,
                                   const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                   const std::string& domain = kDefaultDomain) {
  if (tokens.empty()) throw invalid_argument("compose_tails: no tokens offered");
  const ChatResponse r = chat.complete(make_chat_request(
      cfg, prompts::combine_tokens(sequence, q.head, q.relation, tokens, domain),
      json{{"task", "combine_tokens"},
           {"sequence", sequence},
           {"head", q.head},
           {"relation", q.relation},
           {"tokens", tokens}}));
  ComposeResult out;
  std::set<std::string> seen;
  for (const auto& raw : parse_string_list(r.text)) {
    const std::string tail = normalize(raw, NormalizeOptions{{}});
    if (tail.empty()) continue;
    ++out.formed;
    if (!passes_token_gate(tail, tokens, vocab) || !seen.insert(tail).second) continue;
    out.tails.push_back({tail, tokens});
  }
  return out;
}

inline double triple_similarity(EmbeddingClient& embedder, const std::string& head,
                                const std::string& relation, const std::string& tail,
                                const std::string& sequence) {
  const auto a = embedder.embed({linearize(head, relation, tail), EmbeddingRole::kRelevance}).vector;
  const auto b = embedder.embed({sequence, EmbeddingRole::kRelevance}).vector;
  return cosine(a, b);
}

struct Candidate {
  ExtractionQuery query;
  std::string tail;
  double similarity = 0.0;
};

inline std::vector<Candidate> beta_filter(const std::vector<Candidate>& candidates, double beta) {
  std::vector<Candidate> out;
  for (const auto& c : candidates) {
    if (c.similarity >= beta) out.push_back(c);
  }
  return out;
}

// Unique (head, relation, tail); provenance merged, similarity = best seen.
inline std::vector<ExtractedTriple> dedup(const std::vector<Candidate>& survivors) {
  std::map<std::tuple<std::string, std::string, std::string>, ExtractedTriple> merged;
  for (const auto& c : survivors) {
    auto key = std::make_tuple(c.query.head, c.query.relation, c.tail);
    auto [it, inserted] = merged.emplace(
        key, ExtractedTriple{c.query.head, c.query.relation, c.tail, c.similarity, {}});
    ExtractedTriple& t = it->second;
    t.similarity = std::max(t.similarity, c.similarity);
    if (std::find(t.provenance.begin(), t.provenance.end(), c.query.seq_id) == t.provenance.end()) {
      t.provenance.push_back(c.query.seq_id);
    }
  }
  std::vector<ExtractedTriple> out;
  for (auto& [_, t] : merged) {
    std::sort(t.provenance.begin(), t.provenance.end());
    out.push_back(std::move(t));
  }
  return out;
}

struct StageCounts {
  size_t queries = 0;
  size_t skipped_queries = 0;  // no tail survived composition
  size_t client_failures = 0;
  size_t formed = 0;
  size_t after_gate = 0;
  size_t after_beta = 0;
  size_t unique = 0;
};

inline json to_json(const StageCounts& s) {
  return json{{"queries", s.queries},     {"skipped_queries", s.skipped_queries},
              {"client_failures", s.client_failures}, {"formed", s.formed},
              {"after_gate", s.after_gate}, {"after_beta", s.after_beta},
              {"unique", s.unique}};
}

struct ExtractionConfig {
  size_t top_k = 20;
  double beta = 0.67;
  // Optional skip of sequences dominated by numbers (dosages, statistics).
  bool numeric_filter = false;
  double numeric_density = 0.3;
  int jobs = 1;
};

inline double numeric_fraction(const TokenSequence& seq, const Vocabulary& vocab) {
  int total = 0, numeric = 0;
  for (int id : seq.token_ids) {
    if (id == vocab.pad_id()) continue;
    ++total;
    const std::string& t = vocab.token(id);
    numeric += !t.empty() && std::all_of(t.begin(), t.end(), [](char c) {
      return std::isdigit(static_cast<unsigned char>(c)) || c == '#' || c == '.' || c == '%';
    });
  }
  return total ? static_cast<double>(numeric) / total : 0.0;
}

struct QueryRecord {
  ExtractionQuery query;
  std::vector<TokenScore> tokens;
  std::vector<std::string> tails_after_gate;
  std::vector<double> similarities;
  std::string error;
};

inline json to_json(const QueryRecord& r) {
  json toks = json::array();
  for (const auto& t : r.tokens) toks.push_back({t.token, t.probability});
  return json{{"schema_version", kSchemaVersion},
              {"seq_id", r.query.seq_id},
              {"head", r.query.head},
              {"head_span", to_json(r.query.head_span)},
              {"relation", r.query.relation},
              {"tokens", toks},
              {"tails", r.tails_after_gate},
              {"similarities", r.similarities},
              {"error", r.error}};
}

struct ExtractionResult {
  std::vector<ExtractedTriple> kg;
  std::vector<Candidate> candidates;  // after the token gate, with similarities
  std::vector<QueryRecord> records;
  StageCounts counts;
};

// Runs every query. Graph lookup is by seq_id; results are independent of
// `jobs`.
inline ExtractionResult extract(const GraphmertModel& model,
                                const std::map<std::string, const ChainGraph*>& graphs,
                                const std::vector<ExtractionQuery>& queries,
                                const RelationSet& relations, const Vocabulary& vocab,
                                ChatClient& chat, EmbeddingClient& embedder,
                                const ClientConfig& client_cfg, const ExtractionConfig& cfg) {
  ExtractionResult res;
  res.records.resize(queries.size());
  std::vector<size_t> formed(queries.size(), 0);
  std::vector<char> failed(queries.size(), 0);
  parallel_for(queries.size(), cfg.jobs, [&](size_t i) {
    const ExtractionQuery& q = queries[i];
    QueryRecord& rec = res.records[i];
    rec.query = q;
    auto it = graphs.find(q.seq_id);
    if (it == graphs.end()) throw invalid_argument("query for unknown sequence " + q.seq_id);
    const ChainGraph& g = *it->second;
    if (cfg.numeric_filter && numeric_fraction(g.roots, vocab) > cfg.numeric_density) {
      rec.error = "numeric-dense sequence skipped";
      return;
    }
    rec.tokens = predict_tail_tokens(model, g, q, relations, vocab, cfg.top_k);
    std::vector<std::string> offered;
    for (const auto& t : rec.tokens) offered.push_back(t.token);
    const std::string text = sequence_text(g.roots, vocab);
    try {
      const ComposeResult cr = compose_tails(chat, client_cfg, q, text, offered, vocab);
      formed[i] = cr.formed;
      for (const auto& c : cr.tails) {
        rec.tails_after_gate.push_back(c.tail);
        rec.similarities.push_back(triple_similarity(embedder, q.head, q.relation, c.tail, text));
      }
    } catch (const ClientError& e) {
      failed[i] = 1;
      rec.error = e.what();
      rec.tails_after_gate.clear();
      rec.similarities.clear();
    }
  });
  StageCounts& sc = res.counts;
  sc.queries = queries.size();
  for (size_t i = 0; i < queries.size(); ++i) {
    sc.formed += formed[i];
    sc.client_failures += failed[i];
    const auto& rec = res.records[i];
    if (rec.tails_after_gate.empty()) ++sc.skipped_queries;
    for (size_t j = 0; j < rec.tails_after_gate.size(); ++j) {
      res.candidates.push_back({rec.query, rec.tails_after_gate[j], rec.similarities[j]});
    }
  }
  sc.after_gate = res.candidates.size();
  const auto survivors = beta_filter(res.candidates, cfg.beta);
  sc.after_beta = survivors.size();
  res.kg = dedup(survivors);
  sc.unique = res.kg.size();
  return res;
}

}  // namespace graphmert
