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

// Entity linking against a seed ontology and contextual triple selection.
//
//   mention --embed--> top-k concepts by cosine --char-3gram Jaccard > 0.5-->
//   best surviving concept --> its seed triples, ranked by relevance to the
//   sequence.

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "graphmert/chaingraph.hpp"
#include "graphmert/corpus.hpp"
#include "graphmert/prompts.hpp"
#include "graphmert/services.hpp"

namespace graphmert {

// ---------------------------------------------------------------------------
// String similarity.

// Width-3 windows over the lowercased string; shorter strings are their own
// single gram and the empty string has none.
inline std::set<std::string> char3grams(std::string_view s) {
  const std::string t = to_lower_ascii(s);
  std::set<std::string> out;
  if (t.empty()) return out;
  if (t.size() < 3) {
    out.insert(t);
    return out;
  }
  for (size_t i = 0; i + 3 <= t.size(); ++i) out.insert(t.substr(i, 3));
  return out;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

// ---------------------------------------------------------------------------
// Concepts and nearest-neighbour search.

struct ConceptEntry {
  std::string concept_id;
  std::string name;
  std::vector<double> embedding;  // unit norm
};

struct ScoredConcept {
  int index = 0;  // into the index's concept list
  double cosine = 0.0;
};

// Descending cosine, ties by concept id.
inline bool concept_before(const ScoredConcept& a, const ScoredConcept& b,
                           const std::vector<ConceptEntry>& concepts) {
  if (a.cosine != b.cosine) return a.cosine > b.cosine;
  return concepts[a.index].concept_id < concepts[b.index].concept_id;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

class ConceptIndex {
 public:
  ConceptIndex() = default;
  explicit ConceptIndex(std::vector<ConceptEntry> concepts) : concepts_(std::move(concepts)) {
    std::set<std::string> ids;
    for (auto& c : concepts_) {
      if (!ids.insert(c.concept_id).second) {
        throw invalid_argument("duplicate concept id " + c.concept_id);
      }
      if (!dim_) dim_ = c.embedding.size();
      if (c.embedding.size() != dim_) throw invalid_argument("concept embedding dimension mismatch");
      normalize_unit(c.embedding);
    }
  }

  // Embeds every concept name with the concept-linking role.
  static ConceptIndex build(const std::vector<std::pair<std::string, std::string>>& id_name,
                            EmbeddingClient& embedder) {
    std::vector<ConceptEntry> out;
    out.reserve(id_name.size());
    for (const auto& [id, name] : id_name) {
      out.push_back({id, name, embedder.embed({name, EmbeddingRole::kConceptLinking}).vector});
    }
    return ConceptIndex(std::move(out));
  }

  const std::vector<ConceptEntry>& concepts() const { return concepts_; }
  size_t size() const { return concepts_.size(); }
  size_t dim() const { return dim_; }

  // Exact scan.
  std::vector<ScoredConcept> search(const std::vector<double>& query, size_t k) const {
    std::vector<ScoredConcept> all;
    all.reserve(concepts_.size());
    for (size_t i = 0; i < concepts_.size(); ++i) {
      all.push_back({static_cast<int>(i), dot(query, concepts_[i].embedding)});
    }
    k = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                      [&](const ScoredConcept& a, const ScoredConcept& b) {
                        return concept_before(a, b, concepts_);
                      });
    all.resize(k);
    return all;
  }

 private:
  std::vector<ConceptEntry> concepts_;
  size_t dim_ = 0;
};

// Cluster-pruned exact search. Concepts are grouped by spherical k-means;
// for a unit query q and a cluster with centroid c and radius r (max
// Euclidean distance of a member to c), every member x satisfies
// |q - x| >= |q - c| - r and hence cos(q, x) <= 1 - max(0, |q - c| - r)^2 / 2.
// Clusters are visited by decreasing bound and skipped once the bound falls
// strictly below the current k-th score, so results equal the exact scan.
class ClusteredIndex {
 public:
  ClusteredIndex(const ConceptIndex& base, int clusters, uint64_t seed, int iterations = 10)
      : base_(base) {
    const auto& cs = base.concepts();
    const size_t n = cs.size();
    if (n == 0) return;
    const size_t kc = std::clamp<size_t>(static_cast<size_t>(std::max(1, clusters)), 1, n);
    Rng rng(seed);
    // Initial centroids: a seeded sample without replacement.
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    for (size_t i = 0; i < kc; ++i) std::swap(order[i], order[i + rng.uniform_int(n - i)]);
    centroids_.resize(kc);
    for (size_t c = 0; c < kc; ++c) centroids_[c] = cs[order[c]].embedding;
    std::vector<size_t> assign(n, 0);
    for (int it = 0; it < iterations; ++it) {
      for (size_t i = 0; i < n; ++i) {
        size_t best = 0;
        double best_s = -2.0;
        for (size_t c = 0; c < kc; ++c) {
          const double s = dot(cs[i].embedding, centroids_[c]);
          if (s > best_s) best_s = s, best = c;
        }
        assign[i] = best;
      }
      for (size_t c = 0; c < kc; ++c) {
        std::vector<double> sum(base.dim(), 0.0);
        bool any = false;
        for (size_t i = 0; i < n; ++i) {
          if (assign[i] != c) continue;
          any = true;
          for (size_t d = 0; d < sum.size(); ++d) sum[d] += cs[i].embedding[d];
        }
        double norm = 0.0;
        for (double x : sum) norm += x * x;
        if (any && norm > 0.0) {
          for (double& x : sum) x /= std::sqrt(norm);
          centroids_[c] = std::move(sum);
        }
      }
    }
    members_.assign(kc, {});
    radius_.assign(kc, 0.0);
    for (size_t i = 0; i < n; ++i) {
      members_[assign[i]].push_back(static_cast<int>(i));
      radius_[assign[i]] = std::max(radius_[assign[i]], distance(cs[i].embedding, centroids_[assign[i]]));
    }
  }

  std::vector<ScoredConcept> search(const std::vector<double>& query, size_t k,
                                    size_t* scanned = nullptr) const {
    const auto& cs = base_.concepts();
    std::vector<std::pair<double, size_t>> bounds;
    for (size_t c = 0; c < centroids_.size(); ++c) {
      if (members_[c].empty()) continue;
      const double gap = std::max(0.0, distance(query, centroids_[c]) - radius_[c]);
      // Slack keeps rounding from pruning a cluster that holds a tie.
      bounds.emplace_back(1.0 - gap * gap / 2.0 + 1e-12, c);
    }
    std::sort(bounds.begin(), bounds.end(),
              [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    const auto before = [&](const ScoredConcept& a, const ScoredConcept& b) {
      return concept_before(a, b, cs);
    };
    std::vector<ScoredConcept> best;  // sorted, at most k
    size_t seen = 0;
    for (const auto& [bound, c] : bounds) {
      if (best.size() == k && k > 0 && bound < best.back().cosine) break;
      for (int i : members_[c]) {
        ++seen;
        ScoredConcept s{i, dot(query, cs[i].embedding)};
        if (best.size() < k || before(s, best.back())) {
          best.insert(std::upper_bound(best.begin(), best.end(), s, before), s);
          if (best.size() > k) best.pop_back();
        }
      }
    }
    if (scanned) *scanned = seen;
    return best;
  }

  size_t cluster_count() const { return centroids_.size(); }

 private:
  static double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }

  const ConceptIndex& base_;
  std::vector<std::vector<double>> centroids_;
  std::vector<std::vector<int>> members_;
  std::vector<double> radius_;
};

// ---------------------------------------------------------------------------
// Mentions and linking.

struct Mention {
  std::string seq_id;
  std::string surface;
  Span root_span;
};

struct LinkedEntity {
  Mention mention;
  std::string concept_id;
  std::string concept_name;
  double cosine = 0.0;
  double jaccard = 0.0;
};

// First occurrence of `ids` within the non-PAD roots.
inline std::optional<Span> find_token_span(const TokenSequence& seq, const std::vector<int>& ids,
                                           int pad_id) {
  if (ids.empty()) return std::nullopt;
  const int n = static_cast<int>(seq.token_ids.size());
  const int m = static_cast<int>(ids.size());
  for (int s = 0; s + m <= n; ++s) {
    if (seq.token_ids[s] == pad_id) break;
    if (std::equal(ids.begin(), ids.end(), seq.token_ids.begin() + s)) return Span{s, s + m};
  }
  return std::nullopt;
}

// Resolves candidate surfaces against the sequence: surfaces that do not
// occur verbatim (as tokens) are dropped, duplicates collapse, and each
// surface maps to its first occurrence. Sorted by span.
inline std::vector<Mention> resolve_mentions(const TokenSequence& seq,
                                             const std::vector<std::string>& surfaces,
                                             const Vocabulary& vocab) {
  std::vector<Mention> out;
  std::set<std::string> seen;
  for (const auto& raw : surfaces) {
    const std::string surface = normalize(raw, NormalizeOptions{{}});
    if (surface.empty() || !seen.insert(surface).second) continue;
    const auto ids = tokenize(surface, vocab);
    if (std::find(ids.begin(), ids.end(), vocab.unk_id()) != ids.end()) continue;
    if (auto span = find_token_span(seq, ids, vocab.pad_id())) {
      out.push_back({seq.seq_id, surface, *span});
    }
  }
  std::sort(out.begin(), out.end(), [](const Mention& a, const Mention& b) {
    return a.root_span < b.root_span || (a.root_span == b.root_span && a.surface < b.surface);
  });
  return out;
}

// Offline discovery: dictionary match of known head strings.
inline std::vector<Mention> discover_mentions_dictionary(const TokenSequence& seq,
                                                         const std::vector<std::string>& dictionary,
                                                         const Vocabulary& vocab) {
  return resolve_mentions(seq, dictionary, vocab);
}

// Helper-model discovery; the answer is validated against the sequence.
inline std::vector<Mention> discover_mentions_chat(ChatClient& chat, const ClientConfig& cfg,
                                                   const TokenSequence& seq,
                                                   const Vocabulary& vocab,
                                                   const std::string& domain = kDefaultDomain) {
  const std::string text = sequence_text(seq, vocab);
  const ChatResponse r = chat.complete(make_chat_request(
      cfg, prompts::entity_discovery(text, domain),
      json{{"task", "entity_discovery"}, {"sequence", text}}));
  return resolve_mentions(seq, parse_string_list(r.text), vocab);
}

struct LinkerConfig {
  size_t top_k = 10;
  double jaccard_threshold = 0.5;  // strict: passes when > threshold
};

// Highest-cosine candidate whose name clears the Jaccard gate.
inline std::optional<LinkedEntity> link(const Mention& mention, const std::vector<double>& mention_vec,
                                        const ConceptIndex& index, const LinkerConfig& cfg = {}) {
  const auto grams = char3grams(mention.surface);
  for (const auto& cand : index.search(mention_vec, cfg.top_k)) {
    const ConceptEntry& c = index.concepts()[cand.index];
    const double j = jaccard(grams, char3grams(c.name));
    if (j > cfg.jaccard_threshold) {
      return LinkedEntity{mention, c.concept_id, c.name, cand.cosine, j};
    }
  }
  return std::nullopt;
}

inline std::optional<LinkedEntity> link(const Mention& mention, const ConceptIndex& index,
                                        EmbeddingClient& embedder, const LinkerConfig& cfg = {}) {
  const auto v = embedder.embed({mention.surface, EmbeddingRole::kConceptLinking}).vector;
  return link(mention, v, index, cfg);
}

// ---------------------------------------------------------------------------
// Seed KG and contextual triple selection.

// Relations excluded from selection by default: backward-compatibility and
// cross-vocabulary mappings, tails redundant with the head, and relations
// with almost no distinct tails.
inline const std::vector<std::string>& default_blocklist() {
  static const std::vector<std::string> kList = {
      "acted_on_by_process", "active_ingredient_of", "associated_procedure_of",
      "basis_of_strength_substance_of", "component_of", "consider_from", "direct_device_of",
      "direct_substance_of", "has_associated_finding", "has_finding_context",
      "has_interpretation", "has_laterality", "has_realization", "has_scale_type",
      "has_specimen", "has_subject_relationship_context", "has_temporal_context",
      "inverse_was_a", "mapped_from", "mapped_to", "moved_to", "negatively_regulated_by",
      "positively_regulated_by", "possibly_replaces", "precise_active_ingredient_of",
      "realization_of", "regulated_by", "replaced_by", "replaces", "was_a", "has_intent",
      "referred_to_by", "refers_to", "characterizes", "substance_used_by",
      "specimen_source_topography_of", "specimen_substance_of", "has_active_ingredient",
      "has_property"};
  return kList;
}

inline std::set<std::string> load_blocklist(const std::string& path) {
  std::set<std::string> out;
  for (const auto& line : split_whitespace(read_file(path))) out.insert(line);
  return out;
}

inline std::string normalize_name(std::string_view s) {
  return normalize_for_embedding(s);
}

class KgStore {
 public:
  void add(Triple t) {
    if (t.head.empty() || t.tail.empty() || t.relation.empty()) {
      throw invalid_argument("seed triple with empty field");
    }
    by_head_[normalize_name(t.head)].push_back(std::move(t));
    ++size_;
  }

  const std::vector<Triple>& by_head(const std::string& head) const {
    static const std::vector<Triple> kEmpty;
    auto it = by_head_.find(normalize_name(head));
    return it == by_head_.end() ? kEmpty : it->second;
  }

  std::vector<std::string> heads() const {
    std::vector<std::string> out;
    for (const auto& [h, _] : by_head_) out.push_back(h);
    return out;
  }

  std::vector<std::string> relations() const {
    std::set<std::string> rs;
    for (const auto& [_, ts] : by_head_) {
      for (const auto& t : ts) rs.insert(t.relation);
    }
    return {rs.begin(), rs.end()};
  }

  size_t size() const { return size_; }

  static KgStore from_jsonl(const std::string& path) {
    KgStore s;
    for (const auto& row : read_jsonl(path)) {
      if (!row.contains("head") || !row.contains("relation") || !row.contains("tail")) {
        throw Error(ErrorKind::kSchemaMismatch, path + ": seed triple needs head/relation/tail");
      }
      s.add({row.at("head").get<std::string>(), row.at("relation").get<std::string>(),
             row.at("tail").get<std::string>(), std::nullopt, std::nullopt});
    }
    return s;
  }

 private:
  std::map<std::string, std::vector<Triple>> by_head_;
  size_t size_ = 0;
};

inline std::string linearize(const std::string& head, const std::string& relation,
                             const std::string& tail) {
  return head + " " + relation + " " + tail;
}

struct ScoredTriple {
  Triple triple;
  double score = 0.0;
};

struct EntityCandidates {
  LinkedEntity entity;
  std::vector<ScoredTriple> triples;  // descending score
};

// Descending score; ties by (relation, tail).
inline bool scored_before(const ScoredTriple& a, const ScoredTriple& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.triple.relation != b.triple.relation) return a.triple.relation < b.triple.relation;
  return a.triple.tail < b.triple.tail;
}

inline std::vector<EntityCandidates> select_triples(const std::string& sequence_text,
                                                    const std::vector<LinkedEntity>& entities,
                                                    const KgStore& store,
                                                    const std::set<std::string>& blocklist,
                                                    EmbeddingClient& embedder, size_t n = 40) {
  std::vector<EntityCandidates> out;
  if (entities.empty()) return out;
  const auto seq_vec = embedder.embed({sequence_text, EmbeddingRole::kRelevance}).vector;
  for (const auto& e : entities) {
    EntityCandidates ec{e, {}};
    for (const auto& t : store.by_head(e.concept_name)) {
      if (blocklist.count(t.relation)) continue;
      const auto v = embedder.embed({linearize(t.head, t.relation, t.tail), EmbeddingRole::kRelevance}).vector;
      ec.triples.push_back({t, cosine(v, seq_vec)});
    }
    std::sort(ec.triples.begin(), ec.triples.end(), scored_before);
    if (ec.triples.size() > n) ec.triples.resize(n);
    out.push_back(std::move(ec));
  }
  return out;
}

}  // namespace graphmert
