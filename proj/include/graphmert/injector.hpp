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

// Seed-KG injection: keep relevant triples, make each triple unique across
// sequences, then pick at most one triple per head occurrence favouring high
// scores first and rare relations second.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "graphmert/chaingraph.hpp"
#include "graphmert/common.hpp"
#include "graphmert/corpus.hpp"

namespace graphmert {

struct MatchedTriple {
  std::string matched_head_id;  // one (sequence, head span) slot
  std::string head;
  std::string relation;
  std::string tail;
  double score = 0.0;
  std::string seq_id;
  Span head_span;

  bool operator==(const MatchedTriple&) const = default;
};

inline std::string make_matched_head_id(const std::string& seq_id, Span span) {
  return seq_id + "@" + std::to_string(span.start) + "-" + std::to_string(span.end);
}

struct InjectionConfig {
  double alpha = 0.55;
  double score_bucket_size = 0.01;
  double relation_bucket_size = 100.0;

  void validate() const {
    if (!(score_bucket_size > 0.0) || !(relation_bucket_size > 0.0)) {
      throw invalid_argument("injection bucket sizes must be positive");
    }
  }
};

inline json to_json(const InjectionConfig& c) {
  return json{{"alpha", c.alpha},
              {"score_bucket_size", c.score_bucket_size},
              {"relation_bucket_size", c.relation_bucket_size}};
}

inline json to_json(const MatchedTriple& m) {
  return json{{"schema_version", kSchemaVersion},
              {"seq_id", m.seq_id},
              {"matched_head_id", m.matched_head_id},
              {"head", m.head},
              {"relation", m.relation},
              {"tail", m.tail},
              {"score", m.score},
              {"head_span", to_json(m.head_span)}};
}

inline MatchedTriple matched_from_json(const json& j) {
  if (j.value("schema_version", kSchemaVersion) != kSchemaVersion) {
    throw Error(ErrorKind::kSchemaMismatch, "matched triple: unsupported schema_version");
  }
  try {
    MatchedTriple m;
    m.seq_id = j.at("seq_id").get<std::string>();
    m.head = j.at("head").get<std::string>();
    m.relation = j.at("relation").get<std::string>();
    m.tail = j.at("tail").get<std::string>();
    m.score = j.at("score").get<double>();
    m.head_span = span_from_json(j.at("head_span"));
    m.matched_head_id = j.value("matched_head_id", make_matched_head_id(m.seq_id, m.head_span));
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchemaMismatch, std::string("matched triple: ") + e.what());
  }
}

// Canonical order for outputs.
inline bool matched_less(const MatchedTriple& a, const MatchedTriple& b) {
  return std::tie(a.matched_head_id, a.relation, a.head, a.tail, a.seq_id) <
         std::tie(b.matched_head_id, b.relation, b.head, b.tail, b.seq_id);
}

// Drops scores below alpha, then keeps each (head, relation, tail) only in
// the sequence where it scores highest. Equal best scores resolve to the
// smallest (seq_id, matched_head_id).
inline std::vector<MatchedTriple> preprocess(const std::vector<MatchedTriple>& matches,
                                             double alpha) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, const MatchedTriple*> best;
  for (const auto& m : matches) {
    if (m.score < alpha) continue;
    const Key k{m.head, m.relation, m.tail};
    auto [it, inserted] = best.emplace(k, &m);
    if (inserted) continue;
    const MatchedTriple& cur = *it->second;
    if (m.score > cur.score ||
        (m.score == cur.score &&
         std::tie(m.seq_id, m.matched_head_id) < std::tie(cur.seq_id, cur.matched_head_id))) {
      it->second = &m;
    }
  }
  std::vector<MatchedTriple> out;
  out.reserve(best.size());
  for (const auto& [_, m] : best) out.push_back(*m);
  std::sort(out.begin(), out.end(), matched_less);
  return out;
}

struct SelectionKey {
  long long score_bucket = 0;
  long long rel_bucket = 0;
  double score = 0.0;
  const MatchedTriple* row = nullptr;
};

// Total order used by the scan: ascending buckets, descending score, then
// (relation, head, tail, seq_id, matched_head_id).
inline bool selection_before(const SelectionKey& a, const SelectionKey& b) {
  if (a.score_bucket != b.score_bucket) return a.score_bucket < b.score_bucket;
  if (a.rel_bucket != b.rel_bucket) return a.rel_bucket < b.rel_bucket;
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.row->relation, a.row->head, a.row->tail, a.row->seq_id, a.row->matched_head_id) <
         std::tie(b.row->relation, b.row->head, b.row->tail, b.row->seq_id, b.row->matched_head_id);
}

struct SelectionContext {
  double max_score = 0.0;
  std::map<std::string, long long> relation_counts;  // frozen before the scan
};

inline SelectionContext selection_context(const std::vector<MatchedTriple>& rows) {
  SelectionContext ctx;
  ctx.max_score = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    ctx.max_score = std::max(ctx.max_score, r.score);
    ++ctx.relation_counts[r.relation];
  }
  return ctx;
}

inline SelectionKey selection_key(const MatchedTriple& r, const SelectionContext& ctx,
                                  const InjectionConfig& cfg) {
  SelectionKey k;
  k.score_bucket = static_cast<long long>(std::floor((ctx.max_score - r.score) / cfg.score_bucket_size));
  k.rel_bucket = static_cast<long long>(
      std::floor(static_cast<double>(ctx.relation_counts.at(r.relation)) / cfg.relation_bucket_size));
  k.score = r.score;
  k.row = &r;
  return k;
}

// One triple per matched_head_id over preprocessed rows.
inline std::vector<MatchedTriple> select(const std::vector<MatchedTriple>& rows,
                                         const InjectionConfig& cfg = {}) {
  cfg.validate();
  if (rows.empty()) return {};
  const SelectionContext ctx = selection_context(rows);
  std::vector<SelectionKey> keys;
  keys.reserve(rows.size());
  for (const auto& r : rows) keys.push_back(selection_key(r, ctx, cfg));
  std::sort(keys.begin(), keys.end(), selection_before);
  std::set<std::string> seen;
  std::vector<MatchedTriple> out;
  for (const auto& k : keys) {
    if (seen.insert(k.row->matched_head_id).second) out.push_back(*k.row);
  }
  std::sort(out.begin(), out.end(), matched_less);
  return out;
}

// Map-reduce form: global statistics first, then per-shard minima per head.
// Heads never span shards, so the union equals select().
inline std::vector<MatchedTriple> select_sharded(const std::vector<MatchedTriple>& rows,
                                                 const InjectionConfig& cfg, int shards,
                                                 int jobs = 1) {
  cfg.validate();
  if (rows.empty()) return {};
  shards = std::max(1, shards);
  const SelectionContext ctx = selection_context(rows);
  std::vector<std::vector<const MatchedTriple*>> parts(static_cast<size_t>(shards));
  for (const auto& r : rows) parts[fnv1a(r.matched_head_id) % static_cast<uint64_t>(shards)].push_back(&r);
  std::vector<std::vector<MatchedTriple>> results(parts.size());
  parallel_for(parts.size(), jobs, [&](size_t s) {
    std::map<std::string, SelectionKey> best;
    for (const MatchedTriple* r : parts[s]) {
      const SelectionKey k = selection_key(*r, ctx, cfg);
      auto [it, inserted] = best.emplace(r->matched_head_id, k);
      if (!inserted && selection_before(k, it->second)) it->second = k;
    }
    for (const auto& [_, k] : best) results[s].push_back(*k.row);
  });
  std::vector<MatchedTriple> out;
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  std::sort(out.begin(), out.end(), matched_less);
  return out;
}

// ---------------------------------------------------------------------------
// Injection into chain graphs.

struct InjectionReport {
  size_t input_matches = 0;
  size_t over_capacity = 0;       // tails longer than the leaf group
  size_t heads_skipped = 0;       // heads left without any fitting candidate
  size_t after_threshold = 0;     // unique triples after preprocessing
  size_t selected = 0;
  size_t slot_conflicts = 0;      // leaf group already taken by another head
  size_t injected = 0;
  std::map<std::string, size_t> per_relation;
};

// Rows sorted by descending count, ties by relation name.
inline json relation_table(const std::map<std::string, size_t>& counts) {
  std::vector<std::pair<std::string, size_t>> rows(counts.begin(), counts.end());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  json out = json::array();
  for (size_t i = 0; i < rows.size(); ++i) {
    out.push_back({{"#", i + 1}, {"relation", rows[i].first}, {"injections", rows[i].second}});
  }
  return out;
}

inline json to_json(const InjectionReport& r) {
  return json{{"input_matches", r.input_matches},
              {"over_capacity", r.over_capacity},
              {"heads_skipped", r.heads_skipped},
              {"after_threshold", r.after_threshold},
              {"selected", r.selected},
              {"slot_conflicts", r.slot_conflicts},
              {"injected", r.injected},
              {"relations", relation_table(r.per_relation)}};
}

struct InjectionResult {
  std::vector<ChainGraph> graphs;  // one per input sequence, same order
  std::vector<MatchedTriple> seed_kg;  // what was actually injected
  InjectionReport report;
};

inline std::vector<int> tail_token_ids(const std::string& tail, const Vocabulary& vocab) {
  return tokenize(normalize(tail, NormalizeOptions{{}}), vocab);
}

inline InjectionResult inject_seed_kg(const std::vector<TokenSequence>& sequences,
                                      const std::vector<MatchedTriple>& matches,
                                      const RelationSet& relations, const Vocabulary& vocab,
                                      const InjectionConfig& cfg = {}) {
  InjectionResult res;
  InjectionReport& rep = res.report;
  rep.input_matches = matches.size();

  std::vector<MatchedTriple> fitting;
  std::set<std::string> heads_all, heads_fit;
  for (const auto& m : matches) {
    heads_all.insert(m.matched_head_id);
    const auto ids = tail_token_ids(m.tail, vocab);
    if (ids.empty() || static_cast<int>(ids.size()) > kLeafSlots) {
      ++rep.over_capacity;
      continue;
    }
    if (!relations.contains(m.relation)) {
      throw invalid_argument("matched triple uses unknown relation " + m.relation);
    }
    heads_fit.insert(m.matched_head_id);
    fitting.push_back(m);
  }
  rep.heads_skipped = heads_all.size() - heads_fit.size();

  const auto pre = preprocess(fitting, cfg.alpha);
  rep.after_threshold = pre.size();
  auto chosen = select(pre, cfg);
  rep.selected = chosen.size();

  std::map<std::string, size_t> index_of;
  for (size_t i = 0; i < sequences.size(); ++i) {
    if (!index_of.emplace(sequences[i].seq_id, i).second) {
      throw invalid_argument("duplicate seq_id " + sequences[i].seq_id);
    }
    res.graphs.push_back(empty_graph(sequences[i], vocab.pad_id()));
  }
  // Longer head spans first so that a nested shorter mention yields.
  std::stable_sort(chosen.begin(), chosen.end(), [](const MatchedTriple& a, const MatchedTriple& b) {
    return std::tie(a.seq_id, a.head_span.start) < std::tie(b.seq_id, b.head_span.start) ||
           (std::tie(a.seq_id, a.head_span.start) == std::tie(b.seq_id, b.head_span.start) &&
            a.head_span.size() > b.head_span.size());
  });
  for (const auto& m : chosen) {
    auto it = index_of.find(m.seq_id);
    if (it == index_of.end()) throw invalid_argument("matched triple for unknown sequence " + m.seq_id);
    ChainGraph& g = res.graphs[it->second];
    if (g.leaves.at(m.head_span.start).has_relation()) {
      ++rep.slot_conflicts;
      continue;
    }
    g = inject(g, relations.id(m.relation), m.head_span, tail_token_ids(m.tail, vocab), vocab.pad_id());
    ++rep.injected;
    ++rep.per_relation[m.relation];
    res.seed_kg.push_back(m);
  }
  std::sort(res.seed_kg.begin(), res.seed_kg.end(), matched_less);
  return res;
}

}  // namespace graphmert
