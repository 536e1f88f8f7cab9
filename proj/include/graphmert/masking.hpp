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

// Mask plans: geometric span masking over the text roots and all-or-nothing
// masking of injected leaf groups.

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "graphmert/chaingraph.hpp"
#include "graphmert/common.hpp"
#include "graphmert/corpus.hpp"

namespace graphmert {

struct MaskingConfig {
  double root_rate = 0.15;
  double span_geometric_p = 0.2;
  int max_span = 7;
  double leaf_rate = 0.15;
  double mask_prob = 0.8;    // replace with [MASK]
  double random_prob = 0.1;  // replace with a random token; the rest is kept
};

enum class Corruption : uint8_t { kMask = 0, kRandom = 1, kKeep = 2 };

struct SyntacticSpan {
  Span span;
  std::vector<int> original_ids;
};

struct MaskedLeaf {
  int root_index = 0;
  std::vector<int> slots;  // non-PAD slots, all of them
  std::vector<int> original_ids;
};

struct MaskedToken {
  int position = 0;  // encoded position
  int original_id = 0;
  Corruption corruption = Corruption::kMask;
  int input_id = 0;
  bool semantic = false;
};

struct MaskPlan {
  std::string seq_id;
  std::vector<SyntacticSpan> syntactic_spans;
  std::vector<MaskedLeaf> masked_leaves;
  std::vector<MaskedToken> tokens;  // syntactic first, then semantic
};

// Non-special ids usable as random replacements.
inline std::vector<int> replaceable_ids(const Vocabulary& vocab) {
  std::vector<int> ids;
  for (int i = 0; i < vocab.size(); ++i) {
    if (!vocab.is_special(i)) ids.push_back(i);
  }
  return ids;
}

// Spans keep an unmasked, non-PAD boundary token on both sides (needed by the
// span-boundary head) and never touch each other. Sampling stops early when
// the coverage target cannot be reached.
inline std::vector<SyntacticSpan> plan_syntactic(const std::vector<int>& roots, int pad_id,
                                                 Rng& rng, const MaskingConfig& cfg = {}) {
  const int n = static_cast<int>(roots.size());
  int non_pad = 0;
  int last = -1;
  for (int i = 0; i < n; ++i) {
    if (roots[i] != pad_id) {
      ++non_pad;
      last = i;
    }
  }
  std::vector<SyntacticSpan> spans;
  const int budget = static_cast<int>(std::lround(cfg.root_rate * non_pad));
  if (budget == 0 || last < 2) return spans;
  std::vector<char> masked(n, 0), boundary(n, 0);
  int covered = 0;
  const int max_attempts = 20 * budget + 100;
  for (int attempt = 0; attempt < max_attempts && covered < budget; ++attempt) {
    const int len =
        std::min({rng.geometric(cfg.span_geometric_p), cfg.max_span, budget - covered});
    const int hi = last - len;  // start in [1, hi] keeps a boundary at or before `last`
    if (hi < 1) continue;
    const int start = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(hi)));
    const int end = start + len;
    bool ok = roots[start - 1] != pad_id && roots[end] != pad_id && !masked[start - 1] &&
              !masked[end];
    for (int i = start; ok && i < end; ++i) {
      ok = roots[i] != pad_id && !masked[i] && !boundary[i];
    }
    if (!ok) continue;
    SyntacticSpan s{{start, end}, {}};
    for (int i = start; i < end; ++i) {
      s.original_ids.push_back(roots[i]);
      masked[i] = 1;
    }
    boundary[start - 1] = boundary[end] = 1;
    covered += len;
    spans.push_back(std::move(s));
  }
  std::sort(spans.begin(), spans.end(),
            [](const SyntacticSpan& a, const SyntacticSpan& b) { return a.span < b.span; });
  return spans;
}

inline std::vector<MaskedLeaf> plan_semantic(const ChainGraph& graph, int pad_id, Rng& rng,
                                             const MaskingConfig& cfg = {}) {
  std::vector<MaskedLeaf> out;
  for (const auto& grp : graph.leaves) {
    if (!grp.has_relation()) continue;
    MaskedLeaf leaf;
    leaf.root_index = grp.root_index;
    for (int s = 0; s < kLeafSlots; ++s) {
      if (grp.leaf_token_ids[s] != pad_id) {
        leaf.slots.push_back(s);
        leaf.original_ids.push_back(grp.leaf_token_ids[s]);
      }
    }
    if (leaf.slots.empty()) continue;
    if (rng.bernoulli(cfg.leaf_rate)) out.push_back(std::move(leaf));
  }
  return out;
}

inline MaskedToken corrupt_token(int position, int original, bool semantic, int mask_id,
                                 const std::vector<int>& replaceable, Rng& rng,
                                 const MaskingConfig& cfg) {
  MaskedToken t{position, original, Corruption::kMask, mask_id, semantic};
  const double u = rng.uniform();
  if (u < cfg.mask_prob) {
    t.corruption = Corruption::kMask;
  } else if (u < cfg.mask_prob + cfg.random_prob && !replaceable.empty()) {
    t.corruption = Corruption::kRandom;
    t.input_id = replaceable[rng.uniform_int(replaceable.size())];
  } else {
    t.corruption = Corruption::kKeep;
    t.input_id = original;
  }
  return t;
}

// Syntactic and semantic selections use independent streams derived from rng.
inline MaskPlan make_mask_plan(const ChainGraph& graph, const Vocabulary& vocab,
                               const std::vector<int>& replaceable, Rng& rng,
                               const MaskingConfig& cfg = {}) {
  MaskPlan plan;
  plan.seq_id = graph.seq_id;
  Rng syn_rng(rng.next_u64());
  Rng sem_rng(rng.next_u64());
  Rng cor_rng(rng.next_u64());
  plan.syntactic_spans = plan_syntactic(graph.roots.token_ids, vocab.pad_id(), syn_rng, cfg);
  plan.masked_leaves = plan_semantic(graph, vocab.pad_id(), sem_rng, cfg);
  for (const auto& s : plan.syntactic_spans) {
    for (int i = s.span.start; i < s.span.end; ++i) {
      plan.tokens.push_back(corrupt_token(i, graph.roots.token_ids[i], false, vocab.mask_id(),
                                          replaceable, cor_rng, cfg));
    }
  }
  for (const auto& leaf : plan.masked_leaves) {
    for (size_t k = 0; k < leaf.slots.size(); ++k) {
      plan.tokens.push_back(corrupt_token(leaf_position(leaf.root_index, leaf.slots[k]),
                                          leaf.original_ids[k], true, vocab.mask_id(),
                                          replaceable, cor_rng, cfg));
    }
  }
  return plan;
}

inline json to_json(const MaskPlan& p) {
  json spans = json::array();
  for (const auto& s : p.syntactic_spans) {
    spans.push_back({{"span", to_json(s.span)}, {"original_ids", s.original_ids}});
  }
  json leaves = json::array();
  for (const auto& l : p.masked_leaves) {
    leaves.push_back({{"root", l.root_index}, {"slots", l.slots}, {"original_ids", l.original_ids}});
  }
  json toks = json::array();
  for (const auto& t : p.tokens) {
    toks.push_back({{"position", t.position},
                    {"original_id", t.original_id},
                    {"corruption", static_cast<int>(t.corruption)},
                    {"input_id", t.input_id}});
  }
  return json{{"schema_version", kSchemaVersion},
              {"seq_id", p.seq_id},
              {"syntactic_spans", spans},
              {"masked_leaves", leaves},
              {"tokens", toks}};
}

}  // namespace graphmert
