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

// Leafy chain graphs: 128 text roots, each owning a group of 7 leaf slots for
// the tail of an injected triple. The topology never changes between
// examples, so all-pairs distances are computed once and shared.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graphmert/common.hpp"
#include "graphmert/corpus.hpp"

namespace graphmert {

inline constexpr int kLeafSlots = 7;
inline constexpr int kEncodedLength = kRootCount * (1 + kLeafSlots);

inline constexpr int leaf_position(int root, int slot) {
  return kRootCount + kLeafSlots * root + slot;
}

// Dense relation ids in [0, R), assigned in the order names are given.
class RelationSet {
 public:
  RelationSet() = default;
  explicit RelationSet(std::vector<std::string> names) : names_(std::move(names)) {
    for (size_t i = 0; i < names_.size(); ++i) {
      if (!index_.emplace(names_[i], static_cast<int>(i)).second) {
        throw Error(ErrorKind::kSchemaMismatch, "duplicate relation " + names_[i]);
      }
    }
  }

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  int id(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw Error(ErrorKind::kSchemaMismatch, "unknown relation " + name);
    }
    return it->second;
  }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
};

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;
  std::optional<double> score;
  std::optional<std::string> seq_id;

  bool operator==(const Triple&) const = default;
};

struct LeafGroup {
  int root_index = 0;
  std::array<int, kLeafSlots> leaf_token_ids{};
  int relation = -1;  // -1: no relation
  std::optional<Span> head_span;

  bool has_relation() const { return relation >= 0; }
  bool operator==(const LeafGroup&) const = default;
};

struct ChainGraph {
  std::string seq_id;
  TokenSequence roots;
  std::vector<LeafGroup> leaves;  // exactly kRootCount

  int injected_count() const {
    int n = 0;
    for (const auto& g : leaves) n += g.has_relation();
    return n;
  }
};

inline ChainGraph empty_graph(const TokenSequence& seq, int pad_id) {
  if (static_cast<int>(seq.token_ids.size()) != kRootCount) {
    throw invalid_argument("empty_graph: sequence must have " +
                           std::to_string(kRootCount) + " tokens");
  }
  ChainGraph g;
  g.seq_id = seq.seq_id;
  g.roots = seq;
  g.leaves.resize(kRootCount);
  for (int i = 0; i < kRootCount; ++i) {
    g.leaves[i].root_index = i;
    g.leaves[i].leaf_token_ids.fill(pad_id);
  }
  return g;
}

// Attaches `tail_ids` to the leaf group of the head's first root token.
inline ChainGraph inject(const ChainGraph& graph, int relation, Span head_span,
                         const std::vector<int>& tail_ids, int pad_id) {
  if (head_span.empty() || head_span.start < 0 || head_span.end > kRootCount) {
    throw invalid_argument("inject: head span out of range");
  }
  if (tail_ids.empty() || static_cast<int>(tail_ids.size()) > kLeafSlots) {
    throw invalid_argument("inject: tail must have 1.." +
                           std::to_string(kLeafSlots) + " tokens");
  }
  if (relation < 0) throw invalid_argument("inject: relation required");
  const LeafGroup& target = graph.leaves.at(head_span.start);
  if (target.has_relation()) {
    throw invalid_argument("inject: leaf group " +
                           std::to_string(head_span.start) + " already occupied");
  }
  ChainGraph out = graph;
  LeafGroup& g = out.leaves[head_span.start];
  g.leaf_token_ids.fill(pad_id);
  std::copy(tail_ids.begin(), tail_ids.end(), g.leaf_token_ids.begin());
  g.relation = relation;
  g.head_span = head_span;
  return out;
}

// Checks that the head span spells the triple head before injecting.
inline ChainGraph inject(const ChainGraph& graph, const Triple& triple,
                         Span head_span, const std::vector<int>& tail_ids,
                         const RelationSet& relations, const Vocabulary& vocab) {
  const std::vector<int> head_ids = tokenize(triple.head, vocab);
  if (head_span.start < 0 || head_span.end > kRootCount ||
      head_ids.size() != static_cast<size_t>(head_span.size()) ||
      !std::equal(head_ids.begin(), head_ids.end(),
                  graph.roots.token_ids.begin() + head_span.start)) {
    throw invalid_argument("inject: head span does not match '" + triple.head + "'");
  }
  return inject(graph, relations.id(triple.relation), head_span, tail_ids,
                vocab.pad_id());
}

enum class NodeRole : uint8_t { kRoot = 0, kLeaf = 1 };

struct EncodedGraph {
  std::string seq_id;
  std::string doc_id;
  std::vector<int> ids;          // kEncodedLength
  std::vector<NodeRole> role;    // kEncodedLength
  std::vector<int> owner_root;   // kEncodedLength
  std::vector<int> relation;     // kEncodedLength, -1 when none
  std::vector<std::optional<Span>> head_spans;  // kRootCount
};

inline EncodedGraph encode(const ChainGraph& g) {
  EncodedGraph e;
  e.seq_id = g.seq_id;
  e.doc_id = g.roots.doc_id;
  e.ids.resize(kEncodedLength);
  e.role.resize(kEncodedLength);
  e.owner_root.resize(kEncodedLength);
  e.relation.assign(kEncodedLength, -1);
  e.head_spans.resize(kRootCount);
  for (int i = 0; i < kRootCount; ++i) {
    e.ids[i] = g.roots.token_ids[i];
    e.role[i] = NodeRole::kRoot;
    e.owner_root[i] = i;
    const LeafGroup& grp = g.leaves[i];
    e.head_spans[i] = grp.head_span;
    for (int s = 0; s < kLeafSlots; ++s) {
      const int p = leaf_position(i, s);
      e.ids[p] = grp.leaf_token_ids[s];
      e.role[p] = NodeRole::kLeaf;
      e.owner_root[p] = i;
      e.relation[p] = grp.relation;
    }
  }
  return e;
}

inline ChainGraph decode(const EncodedGraph& e, const Vocabulary& vocab) {
  if (static_cast<int>(e.ids.size()) != kEncodedLength) {
    throw invalid_argument("decode: wrong encoded length");
  }
  ChainGraph g;
  g.seq_id = e.seq_id;
  g.roots.seq_id = e.seq_id;
  g.roots.doc_id = e.doc_id;
  g.roots.token_ids.assign(e.ids.begin(), e.ids.begin() + kRootCount);
  for (int id : g.roots.token_ids) g.roots.token_strings.push_back(vocab.token(id));
  g.leaves.resize(kRootCount);
  for (int i = 0; i < kRootCount; ++i) {
    LeafGroup& grp = g.leaves[i];
    grp.root_index = i;
    for (int s = 0; s < kLeafSlots; ++s) grp.leaf_token_ids[s] = e.ids[leaf_position(i, s)];
    grp.relation = e.relation[leaf_position(i, 0)];
    grp.head_span = e.head_spans[i];
  }
  return g;
}

// ---------------------------------------------------------------------------
// Topology and shortest paths.

// Undirected adjacency: root chain, leaf-to-own-root, and a clique among the
// leaves of the same root.
inline std::vector<std::vector<int>> chain_adjacency() {
  std::vector<std::vector<int>> adj(kEncodedLength);
  auto link = [&](int a, int b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (int i = 0; i + 1 < kRootCount; ++i) link(i, i + 1);
  for (int i = 0; i < kRootCount; ++i) {
    for (int s = 0; s < kLeafSlots; ++s) {
      link(i, leaf_position(i, s));
      for (int t = s + 1; t < kLeafSlots; ++t) {
        link(leaf_position(i, s), leaf_position(i, t));
      }
    }
  }
  return adj;
}

struct DistanceMatrix {
  int n = 0;
  std::vector<int32_t> d;

  int32_t operator()(int i, int j) const {
    return d[static_cast<size_t>(i) * n + j];
  }
  int32_t max_finite() const {
    int32_t m = 0;
    for (int32_t v : d) {
      if (v < kUnreachable) m = std::max(m, v);
    }
    return m;
  }

  static constexpr int32_t kUnreachable = 1 << 29;
};

inline DistanceMatrix floyd_warshall(const std::vector<std::vector<int>>& adj) {
  DistanceMatrix m;
  m.n = static_cast<int>(adj.size());
  const size_t n = adj.size();
  m.d.assign(n * n, DistanceMatrix::kUnreachable);
  for (size_t i = 0; i < n; ++i) {
    m.d[i * n + i] = 0;
    for (int j : adj[i]) m.d[i * n + j] = std::min<int32_t>(m.d[i * n + j], 1);
  }
  for (size_t k = 0; k < n; ++k) {
    const int32_t* row_k = &m.d[k * n];
    for (size_t i = 0; i < n; ++i) {
      int32_t* row_i = &m.d[i * n];
      const int32_t dik = row_i[k];
      if (dik >= DistanceMatrix::kUnreachable) continue;
      for (size_t j = 0; j < n; ++j) {
        const int32_t via = dik + row_k[j];
        row_i[j] = via < row_i[j] ? via : row_i[j];
      }
    }
  }
  return m;
}

// All-pairs distances of the fixed 1024-node topology, computed once.
inline const DistanceMatrix& chain_shortest_paths() {
  static const DistanceMatrix kPaths = floyd_warshall(chain_adjacency());
  return kPaths;
}

// ---------------------------------------------------------------------------
// JSONL interchange.

inline json to_json(const ChainGraph& g, const RelationSet& relations) {
  json leaves = json::array();
  for (const auto& grp : g.leaves) {
    leaves.push_back(json{
        {"root", grp.root_index},
        {"relation", grp.has_relation() ? json(relations.name(grp.relation)) : json()},
        {"tail_ids", grp.leaf_token_ids},
        {"head_span", grp.head_span ? to_json(*grp.head_span) : json()}});
  }
  return json{{"schema_version", kSchemaVersion},
              {"seq_id", g.seq_id},
              {"doc_id", g.roots.doc_id},
              {"roots", g.roots.token_ids},
              {"leaves", std::move(leaves)}};
}

inline ChainGraph graph_from_json(const json& j, const RelationSet& relations,
                                  const Vocabulary& vocab) {
  ChainGraph g;
  g.seq_id = j.at("seq_id").get<std::string>();
  g.roots = sequence_from_json(
      json{{"seq_id", g.seq_id},
           {"doc_id", j.value("doc_id", std::string())},
           {"token_ids", j.at("roots")}},
      vocab);
  const auto& leaves = j.at("leaves");
  if (static_cast<int>(leaves.size()) != kRootCount) {
    throw Error(ErrorKind::kSchemaMismatch, g.seq_id + ": expected 128 leaf groups");
  }
  g.leaves.resize(kRootCount);
  for (int i = 0; i < kRootCount; ++i) {
    const auto& l = leaves[i];
    LeafGroup& grp = g.leaves[i];
    grp.root_index = l.at("root").get<int>();
    const auto ids = l.at("tail_ids").get<std::vector<int>>();
    if (grp.root_index != i || static_cast<int>(ids.size()) != kLeafSlots) {
      throw Error(ErrorKind::kSchemaMismatch, g.seq_id + ": malformed leaf group");
    }
    std::copy(ids.begin(), ids.end(), grp.leaf_token_ids.begin());
    if (!l.at("relation").is_null()) {
      grp.relation = relations.id(l["relation"].get<std::string>());
    }
    if (!l.at("head_span").is_null()) grp.head_span = span_from_json(l["head_span"]);
  }
  return g;
}

}  // namespace graphmert
