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

// Encoder over encoded chain graphs: token + position embeddings with
// relation fusion on injected leaves, post-LN transformer blocks with
// distance-decayed attention, a tied masked-token head and a span-boundary
// head.
//
// PAD positions are masked out of attention as keys. Since a PAD query can
// never influence a non-PAD position, the forward pass runs on the compacted
// set of non-PAD ("active") nodes only; outputs for active nodes are exactly
// those of the full 1024-node computation.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "graphmert/chaingraph.hpp"
#include "graphmert/common.hpp"
#include "graphmert/corpus.hpp"
#include "graphmert/masking.hpp"
#include "graphmert/model/config.hpp"
#include "graphmert/model/decay_mask.hpp"
#include "graphmert/model/hgat.hpp"
#include "graphmert/model/parameters.hpp"
#include "graphmert/model/tensor.hpp"

namespace graphmert {

struct PreparedExample {
  struct Fusion {
    int node = 0;      // active index of the leaf
    int relation = 0;
    int group = 0;     // owning root; relation dropout acts per group
    std::vector<int> head_nodes;
  };
  struct Target {
    int node = 0;
    int target_id = -1;  // -1: prediction only, no loss
    bool semantic = false;
  };
  struct SboTarget {
    int left_node = 0;
    int right_node = 0;
    int offset = 0;
    int target_id = 0;
  };

  std::string seq_id;
  std::vector<int> positions;  // encoded positions of active nodes, ascending
  std::vector<int> input_ids;  // per active node, after corruption
  std::vector<Fusion> fusions;
  std::vector<Target> targets;  // root targets first, then leaf targets
  std::vector<SboTarget> sbo;

  int count(bool semantic) const {
    int n = 0;
    for (const auto& t : targets) n += (t.semantic == semantic && t.target_id >= 0);
    return n;
  }
};

namespace detail {

inline PreparedExample prepare_from_ids(const EncodedGraph& enc, const std::vector<int>& ids,
                                        int pad_id) {
  PreparedExample ex;
  ex.seq_id = enc.seq_id;
  std::vector<int> index_of(kEncodedLength, -1);
  for (int p = 0; p < kEncodedLength; ++p) {
    if (ids[p] == pad_id) continue;
    index_of[p] = static_cast<int>(ex.positions.size());
    ex.positions.push_back(p);
    ex.input_ids.push_back(ids[p]);
  }
  for (int k = 0; k < static_cast<int>(ex.positions.size()); ++k) {
    const int p = ex.positions[k];
    if (enc.role[p] != NodeRole::kLeaf || enc.relation[p] < 0) continue;
    const int root = enc.owner_root[p];
    const auto& hs = enc.head_spans[root];
    if (!hs) throw invalid_argument(enc.seq_id + ": injected leaf without head span");
    PreparedExample::Fusion f{k, enc.relation[p], root, {}};
    for (int r = hs->start; r < hs->end; ++r) {
      if (index_of[r] >= 0) f.head_nodes.push_back(index_of[r]);
    }
    if (f.head_nodes.empty()) throw invalid_argument(enc.seq_id + ": head span is all PAD");
    ex.fusions.push_back(std::move(f));
  }
  return ex;
}

}  // namespace detail

// Applies the plan's corruption to the encoded graph and collects targets.
inline PreparedExample prepare_example(const ChainGraph& graph, const MaskPlan& plan,
                                       int pad_id, int max_span = 7) {
  if (!plan.seq_id.empty() && plan.seq_id != graph.seq_id) {
    throw invalid_argument("plan/graph mismatch: " + plan.seq_id + " vs " + graph.seq_id);
  }
  const EncodedGraph enc = encode(graph);
  std::vector<int> ids = enc.ids;
  for (const auto& t : plan.tokens) {
    if (t.position < 0 || t.position >= kEncodedLength || enc.ids[t.position] != t.original_id ||
        t.original_id == pad_id) {
      throw invalid_argument("plan/graph mismatch at position " + std::to_string(t.position));
    }
    ids[t.position] = t.input_id;
  }
  PreparedExample ex = detail::prepare_from_ids(enc, ids, pad_id);
  std::vector<int> index_of(kEncodedLength, -1);
  for (size_t k = 0; k < ex.positions.size(); ++k) index_of[ex.positions[k]] = static_cast<int>(k);
  for (const auto& t : plan.tokens) {
    ex.targets.push_back({index_of[t.position], t.original_id, t.semantic});
  }
  std::stable_partition(ex.targets.begin(), ex.targets.end(),
                        [](const PreparedExample::Target& t) { return !t.semantic; });
  for (const auto& s : plan.syntactic_spans) {
    const int left = s.span.start - 1, right = s.span.end;
    if (left < 0 || right >= kRootCount || index_of[left] < 0 || index_of[right] < 0) {
      throw invalid_argument("plan/graph mismatch: span without boundary tokens");
    }
    for (int i = s.span.start; i < s.span.end; ++i) {
      const int offset = i - s.span.start;
      if (offset >= max_span) throw invalid_argument("span longer than the boundary table");
      ex.sbo.push_back({index_of[left], index_of[right], offset,
                        s.original_ids[static_cast<size_t>(offset)]});
    }
  }
  return ex;
}

// Extraction query: the leaf group of `head_span.start` is replaced by seven
// [MASK] slots carrying `relation`; all seven slots become prediction rows.
inline PreparedExample prepare_query(const ChainGraph& graph, int relation, Span head_span,
                                     const Vocabulary& vocab) {
  if (head_span.empty() || head_span.start < 0 || head_span.end > kRootCount) {
    throw invalid_argument("query head span out of range");
  }
  ChainGraph g = graph;
  LeafGroup& grp = g.leaves[head_span.start];
  grp.leaf_token_ids.fill(vocab.mask_id());
  grp.relation = relation;
  grp.head_span = head_span;
  const EncodedGraph enc = encode(g);
  PreparedExample ex = detail::prepare_from_ids(enc, enc.ids, vocab.pad_id());
  for (size_t k = 0; k < ex.positions.size(); ++k) {
    const int p = ex.positions[k];
    if (p >= leaf_position(head_span.start, 0) && p < leaf_position(head_span.start, kLeafSlots)) {
      ex.targets.push_back({static_cast<int>(k), -1, true});
    }
  }
  return ex;
}

struct ForwardResult {
  Matrix logits;      // one row per target
  Matrix sbo_logits;  // one row per span-boundary target
  Matrix hidden;      // final hidden state per active node
};

struct LayerTape {
  Matrix x_in, q, k, v;
  std::vector<Matrix> attn;       // post-softmax, per head
  std::vector<Matrix> attn_drop;  // attention-dropout scale, per head (empty: none)
  std::vector<Matrix> probs;      // weights that multiplied V, per head
  Matrix concat;
  Matrix attn_out_drop;
  LayerNormCache ln1;
  Matrix x1, u, g, act_drop, g_dropped, ffn_out_drop;
  LayerNormCache ln2;
};

struct ForwardTape {
  std::vector<HgatTrace> hgat;
  std::vector<char> fused;  // per fusion: applied (not dropped)
  Matrix decay;             // n x n
  LayerNormCache emb_ln;
  Matrix emb_drop;
  std::vector<LayerTape> layers;
  Matrix mlm_in, mlm_u;
  LayerNormCache mlm_ln;
  Matrix mlm_z;
  Matrix sbo_h0, sbo_u1, sbo_y1, sbo_u2, sbo_y2;
  LayerNormCache sbo_ln1, sbo_ln2;
};

class GraphmertModel {
 public:
  GraphmertModel(ModelConfig config, Parameters params)
      : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
  }

  static GraphmertModel create(const ModelConfig& config, uint64_t seed) {
    config.validate();
    return GraphmertModel(config, Parameters::initialize(config, seed));
  }

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const Parameters& params() const { return params_; }
  Parameters& params() { return params_; }

  double decay_offset() const { return params_.decay_offset(0, 0); }

  // Mask restricted to the active nodes of one example.
  Matrix decay_submatrix(const std::vector<int>& positions) const {
    const DistanceMatrix& sp = chain_shortest_paths();
    const DecayTable table(max_distance(), config_.lambda, decay_offset());
    const Eigen::Index n = static_cast<Eigen::Index>(positions.size());
    Matrix f(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) f(a, b) = table.value[sp(positions[a], positions[b])];
    }
    return f;
  }

  ForwardResult forward(const PreparedExample& ex, bool training = false, Rng* rng = nullptr,
                        ForwardTape* tape = nullptr) const;

  void backward(const PreparedExample& ex, const ForwardTape& tape, const Matrix& dlogits,
                const Matrix& dsbo_logits, Parameters& grads) const;

  static int max_distance() {
    static const int kMax = chain_shortest_paths().max_finite();
    return kMax;
  }

 private:
  Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) const {
    Matrix m(rows, cols);
    const double keep = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.bernoulli(rate) ? 0.0 : keep;
    return m;
  }

  Matrix tied_logits(const Matrix& z) const {
    Matrix logits = z * params_.token_emb.transpose();
    logits.rowwise() += params_.out_bias.row(0);
    return logits;
  }

  ModelConfig config_;
  Parameters params_;
};

inline ForwardResult GraphmertModel::forward(const PreparedExample& ex, bool training, Rng* rng,
                                             ForwardTape* tape) const {
  const ModelConfig& c = config_;
  const Parameters& P = params_;
  const Eigen::Index n = static_cast<Eigen::Index>(ex.positions.size());
  const int H = c.hidden, nh = c.heads, dh = H / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool drop = training && c.dropout > 0.0;
  if (training && (drop || c.relation_dropout > 0.0) && rng == nullptr) {
    throw invalid_argument("forward: training with dropout needs an rng");
  }
  ForwardTape local;
  ForwardTape& T = tape ? *tape : local;
  T = ForwardTape{};

  // Embeddings, with relation fusion replacing the token embedding of
  // injected leaves.
  Matrix x0(n, H);
  for (Eigen::Index k = 0; k < n; ++k) {
    x0.row(k) = P.token_emb.row(ex.input_ids[k]) + P.pos_emb.row(ex.positions[k]);
  }
  T.hgat.resize(ex.fusions.size());
  T.fused.assign(ex.fusions.size(), 0);
  if (c.use_hgat) {
    std::map<int, bool> group_dropped;
    for (size_t i = 0; i < ex.fusions.size(); ++i) {
      const auto& f = ex.fusions[i];
      auto it = group_dropped.find(f.group);
      if (it == group_dropped.end()) {
        const bool d = training && c.relation_dropout > 0.0 && rng->bernoulli(c.relation_dropout);
        it = group_dropped.emplace(f.group, d).first;
      }
      if (it->second) continue;
      if (f.relation < 0 || f.relation >= static_cast<int>(P.rel_w.size())) {
        throw invalid_argument("forward: relation id out of range");
      }
      const Vector t = P.token_emb.row(ex.input_ids[f.node]).transpose();
      Matrix heads(static_cast<Eigen::Index>(f.head_nodes.size()), H);
      for (size_t j = 0; j < f.head_nodes.size(); ++j) {
        heads.row(static_cast<Eigen::Index>(j)) = P.token_emb.row(ex.input_ids[f.head_nodes[j]]);
      }
      const Vector a = P.rel_a[f.relation].row(0).transpose();
      const Vector fused = hgat_fuse(t, heads, P.rel_w[f.relation], a, c.leaky_slope, &T.hgat[i]);
      x0.row(f.node) = fused.transpose() + P.pos_emb.row(ex.positions[f.node]);
      T.fused[i] = 1;
    }
  }
  Matrix x = layer_norm(x0, P.emb_ln_g, P.emb_ln_b, &T.emb_ln);
  if (drop) {
    T.emb_drop = dropout_mask(n, H, c.dropout, *rng);
    x = x.cwiseProduct(T.emb_drop);
  }

  T.decay = decay_submatrix(ex.positions);
  T.layers.resize(static_cast<size_t>(c.layers));
  for (int l = 0; l < c.layers; ++l) {
    const LayerParams& L = P.layers[l];
    LayerTape& lt = T.layers[l];
    lt.x_in = x;
    lt.q = linear(x, L.wq, L.bq);
    lt.k = linear(x, L.wk, L.bk);
    lt.v = linear(x, L.wv, L.bv);
    lt.concat.resize(n, H);
    lt.attn.resize(nh);
    lt.attn_drop.resize(nh);
    lt.probs.resize(nh);
    for (int h = 0; h < nh; ++h) {
      Matrix s = (lt.q.middleCols(h * dh, dh) * lt.k.middleCols(h * dh, dh).transpose()) * scale;
      softmax_rows_inplace(s);
      Matrix w = masked_attention(s, T.decay);
      if (drop) {
        lt.attn_drop[h] = dropout_mask(n, n, c.dropout, *rng);
        w = w.cwiseProduct(lt.attn_drop[h]);
      }
      lt.concat.middleCols(h * dh, dh).noalias() = w * lt.v.middleCols(h * dh, dh);
      lt.attn[h] = std::move(s);
      lt.probs[h] = std::move(w);
    }
    Matrix attn_out = linear(lt.concat, L.wo, L.bo);
    if (drop) {
      lt.attn_out_drop = dropout_mask(n, H, c.dropout, *rng);
      attn_out = attn_out.cwiseProduct(lt.attn_out_drop);
    }
    lt.x1 = layer_norm(x + attn_out, L.ln1_g, L.ln1_b, &lt.ln1);
    lt.u = linear(lt.x1, L.w1, L.b1);
    lt.g = gelu(lt.u);
    lt.g_dropped = lt.g;
    if (drop) {
      lt.act_drop = dropout_mask(n, c.intermediate, c.dropout, *rng);
      lt.g_dropped = lt.g.cwiseProduct(lt.act_drop);
    }
    Matrix ffn_out = linear(lt.g_dropped, L.w2, L.b2);
    if (drop) {
      lt.ffn_out_drop = dropout_mask(n, H, c.dropout, *rng);
      ffn_out = ffn_out.cwiseProduct(lt.ffn_out_drop);
    }
    x = layer_norm(lt.x1 + ffn_out, L.ln2_g, L.ln2_b, &lt.ln2);
  }

  ForwardResult out;
  // Masked-token head.
  const Eigen::Index nt = static_cast<Eigen::Index>(ex.targets.size());
  T.mlm_in.resize(nt, H);
  for (Eigen::Index i = 0; i < nt; ++i) T.mlm_in.row(i) = x.row(ex.targets[i].node);
  T.mlm_u = linear(T.mlm_in, P.mlm_w, P.mlm_b);
  T.mlm_z = layer_norm(gelu(T.mlm_u), P.mlm_ln_g, P.mlm_ln_b, &T.mlm_ln);
  out.logits = tied_logits(T.mlm_z);

  // Span-boundary head: [left boundary ; right boundary ; relative position].
  const Eigen::Index ns = static_cast<Eigen::Index>(ex.sbo.size());
  T.sbo_h0.resize(ns, 3 * H);
  for (Eigen::Index i = 0; i < ns; ++i) {
    const auto& s = ex.sbo[i];
    T.sbo_h0.row(i) << x.row(s.left_node), x.row(s.right_node), P.sbo_pos.row(s.offset);
  }
  T.sbo_u1 = linear(T.sbo_h0, P.sbo_w1, P.sbo_b1);
  T.sbo_y1 = layer_norm(gelu(T.sbo_u1), P.sbo_ln1_g, P.sbo_ln1_b, &T.sbo_ln1);
  T.sbo_u2 = linear(T.sbo_y1, P.sbo_w2, P.sbo_b2);
  T.sbo_y2 = layer_norm(gelu(T.sbo_u2), P.sbo_ln2_g, P.sbo_ln2_b, &T.sbo_ln2);
  out.sbo_logits = tied_logits(T.sbo_y2);
  out.hidden = std::move(x);
  return out;
}

inline void GraphmertModel::backward(const PreparedExample& ex, const ForwardTape& T,
                                     const Matrix& dlogits, const Matrix& dsbo_logits,
                                     Parameters& G) const {
  const ModelConfig& c = config_;
  const Parameters& P = params_;
  const Eigen::Index n = static_cast<Eigen::Index>(ex.positions.size());
  const int H = c.hidden, nh = c.heads, dh = H / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dx = Matrix::Zero(n, H);

  // Masked-token head.
  if (dlogits.rows() > 0) {
    G.out_bias.row(0) += dlogits.colwise().sum();
    G.token_emb.noalias() += dlogits.transpose() * T.mlm_z;
    Matrix dz = dlogits * P.token_emb;
    Matrix dg = layer_norm_backward(dz, P.mlm_ln_g, T.mlm_ln, G.mlm_ln_g, G.mlm_ln_b);
    Matrix du = gelu_backward(T.mlm_u, dg);
    Matrix din = linear_backward(T.mlm_in, P.mlm_w, du, G.mlm_w, G.mlm_b);
    for (Eigen::Index i = 0; i < din.rows(); ++i) dx.row(ex.targets[i].node) += din.row(i);
  }

  // Span-boundary head.
  if (dsbo_logits.rows() > 0) {
    G.out_bias.row(0) += dsbo_logits.colwise().sum();
    G.token_emb.noalias() += dsbo_logits.transpose() * T.sbo_y2;
    Matrix dy2 = dsbo_logits * P.token_emb;
    Matrix dg2 = layer_norm_backward(dy2, P.sbo_ln2_g, T.sbo_ln2, G.sbo_ln2_g, G.sbo_ln2_b);
    Matrix du2 = gelu_backward(T.sbo_u2, dg2);
    Matrix dy1 = linear_backward(T.sbo_y1, P.sbo_w2, du2, G.sbo_w2, G.sbo_b2);
    Matrix dg1 = layer_norm_backward(dy1, P.sbo_ln1_g, T.sbo_ln1, G.sbo_ln1_g, G.sbo_ln1_b);
    Matrix du1 = gelu_backward(T.sbo_u1, dg1);
    Matrix dh0 = linear_backward(T.sbo_h0, P.sbo_w1, du1, G.sbo_w1, G.sbo_b1);
    for (Eigen::Index i = 0; i < dh0.rows(); ++i) {
      const auto& s = ex.sbo[i];
      dx.row(s.left_node) += dh0.row(i).segment(0, H);
      dx.row(s.right_node) += dh0.row(i).segment(H, H);
      G.sbo_pos.row(s.offset) += dh0.row(i).segment(2 * H, H);
    }
  }

  Matrix ddecay = Matrix::Zero(n, n);
  for (int l = c.layers - 1; l >= 0; --l) {
    const LayerParams& L = P.layers[l];
    LayerParams& GL = G.layers[l];
    const LayerTape& lt = T.layers[l];
    const bool drop = lt.attn_out_drop.size() > 0;

    Matrix dz2 = layer_norm_backward(dx, L.ln2_g, lt.ln2, GL.ln2_g, GL.ln2_b);
    Matrix dx1 = dz2;
    Matrix dffn = drop ? Matrix(dz2.cwiseProduct(lt.ffn_out_drop)) : dz2;
    Matrix dg = linear_backward(lt.g_dropped, L.w2, dffn, GL.w2, GL.b2);
    if (drop) dg = dg.cwiseProduct(lt.act_drop);
    Matrix du = gelu_backward(lt.u, dg);
    dx1 += linear_backward(lt.x1, L.w1, du, GL.w1, GL.b1);

    Matrix dz1 = layer_norm_backward(dx1, L.ln1_g, lt.ln1, GL.ln1_g, GL.ln1_b);
    Matrix dx_in = dz1;
    Matrix dattn = drop ? Matrix(dz1.cwiseProduct(lt.attn_out_drop)) : dz1;
    Matrix dconcat = linear_backward(lt.concat, L.wo, dattn, GL.wo, GL.bo);

    Matrix dq(n, H), dk(n, H), dv(n, H);
    for (int h = 0; h < nh; ++h) {
      const auto cols = [&](const Matrix& m) { return m.middleCols(h * dh, dh); };
      const Matrix dout = cols(dconcat);
      dv.middleCols(h * dh, dh).noalias() = lt.probs[h].transpose() * dout;
      Matrix dw = dout * cols(lt.v).transpose();
      if (lt.attn_drop[h].size() > 0) dw = dw.cwiseProduct(lt.attn_drop[h]);
      ddecay += dw.cwiseProduct(lt.attn[h]);
      const Matrix da = dw.cwiseProduct(T.decay);
      const Matrix ds = softmax_rows_backward(lt.attn[h], da) * scale;
      dq.middleCols(h * dh, dh).noalias() = ds * cols(lt.k);
      dk.middleCols(h * dh, dh).noalias() = ds.transpose() * cols(lt.q);
    }
    dx_in += linear_backward(lt.x_in, L.wq, dq, GL.wq, GL.bq);
    dx_in += linear_backward(lt.x_in, L.wk, dk, GL.wk, GL.bk);
    dx_in += linear_backward(lt.x_in, L.wv, dv, GL.wv, GL.bv);
    dx = std::move(dx_in);
  }

  // Decay offset: every pair at the same distance shares one mask value.
  {
    const DistanceMatrix& sp = chain_shortest_paths();
    const DecayTable table(max_distance(), c.lambda, decay_offset());
    double dp = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) {
        dp += ddecay(a, b) * table.offset_grad[sp(ex.positions[a], ex.positions[b])];
      }
    }
    G.decay_offset(0, 0) += dp;
  }

  if (T.emb_drop.size() > 0) dx = dx.cwiseProduct(T.emb_drop);
  Matrix dx0 = layer_norm_backward(dx, P.emb_ln_g, T.emb_ln, G.emb_ln_g, G.emb_ln_b);

  std::vector<char> is_fused(static_cast<size_t>(n), 0);
  for (size_t i = 0; i < ex.fusions.size(); ++i) {
    if (T.fused[i]) is_fused[ex.fusions[i].node] = 1;
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    G.pos_emb.row(ex.positions[k]) += dx0.row(k);
    if (!is_fused[k]) G.token_emb.row(ex.input_ids[k]) += dx0.row(k);
  }
  for (size_t i = 0; i < ex.fusions.size(); ++i) {
    if (!T.fused[i]) continue;
    const auto& f = ex.fusions[i];
    const Vector t = P.token_emb.row(ex.input_ids[f.node]).transpose();
    const Eigen::Index m = static_cast<Eigen::Index>(f.head_nodes.size());
    Matrix heads(m, H);
    for (Eigen::Index j = 0; j < m; ++j) heads.row(j) = P.token_emb.row(ex.input_ids[f.head_nodes[j]]);
    const Vector a = P.rel_a[f.relation].row(0).transpose();
    Vector dt = Vector::Zero(H);
    Matrix dheads = Matrix::Zero(m, H);
    Vector da = Vector::Zero(2 * H);
    hgat_backward(t, heads, P.rel_w[f.relation], a, c.leaky_slope, T.hgat[i],
                  dx0.row(f.node).transpose(), dt, dheads, G.rel_w[f.relation], da);
    G.rel_a[f.relation].row(0) += da.transpose();
    G.token_emb.row(ex.input_ids[f.node]) += dt.transpose();
    for (Eigen::Index j = 0; j < m; ++j) G.token_emb.row(ex.input_ids[f.head_nodes[j]]) += dheads.row(j);
  }
}

// ---------------------------------------------------------------------------
// Loss.

// Sum of row-wise cross-entropies against `targets`; if `dlogits` is given it
// receives scale * (softmax - onehot). Rows with target -1 are skipped.
inline double cross_entropy(const Matrix& logits, const std::vector<int>& targets, double scale,
                            Matrix* dlogits) {
  if (dlogits) *dlogits = Matrix::Zero(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int t = targets[static_cast<size_t>(i)];
    if (t < 0) continue;
    const double m = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    const double z = e.sum();
    total += std::log(z) + m - logits(i, t);
    if (dlogits) {
      dlogits->row(i) = (e / z) * scale;
      (*dlogits)(i, t) -= scale;
    }
  }
  return total;
}

struct LossBreakdown {
  double total = 0.0;
  double mlm = 0.0;  // mean over masked root tokens of token CE + span-boundary CE
  double mnm = 0.0;  // mean over masked leaf tokens
  int mlm_tokens = 0;
  int mnm_tokens = 0;
};

// Loss of one forward result. Denominators default to this example's counts;
// batched training passes batch-wide counts instead.
inline LossBreakdown masked_loss(const ForwardResult& out, const PreparedExample& ex, double mu,
                                 Matrix* dlogits = nullptr, Matrix* dsbo = nullptr,
                                 int mlm_denominator = -1, int mnm_denominator = -1) {
  LossBreakdown lb;
  lb.mlm_tokens = ex.count(false);
  lb.mnm_tokens = ex.count(true);
  const int nx = mlm_denominator >= 0 ? mlm_denominator : lb.mlm_tokens;
  const int ng = mnm_denominator >= 0 ? mnm_denominator : lb.mnm_tokens;
  if (nx + ng == 0) throw invalid_argument("loss: no masked tokens");
  std::vector<int> root_targets, leaf_targets, sbo_targets;
  for (const auto& t : ex.targets) {
    root_targets.push_back(t.semantic ? -1 : t.target_id);
    leaf_targets.push_back(t.semantic ? t.target_id : -1);
  }
  for (const auto& s : ex.sbo) sbo_targets.push_back(s.target_id);
  const double sx = nx > 0 ? 1.0 / nx : 0.0;
  const double sg = ng > 0 ? mu / ng : 0.0;
  Matrix d_root, d_leaf;
  const double root_ce = cross_entropy(out.logits, root_targets, sx, dlogits ? &d_root : nullptr);
  const double leaf_ce = cross_entropy(out.logits, leaf_targets, sg, dlogits ? &d_leaf : nullptr);
  const double sbo_ce = cross_entropy(out.sbo_logits, sbo_targets, sx, dsbo);
  if (dlogits) *dlogits = d_root + d_leaf;
  lb.mlm = (root_ce + sbo_ce) * sx;
  lb.mnm = ng > 0 ? leaf_ce / ng : 0.0;
  lb.total = lb.mlm + mu * lb.mnm;
  return lb;
}

// Batch loss with gradients accumulated into `grads` when non-null. Losses
// are means over all masked tokens of the batch, per part.
inline LossBreakdown loss_and_gradients(const GraphmertModel& model,
                                        const std::vector<PreparedExample>& batch, bool training,
                                        uint64_t dropout_seed, Parameters* grads, int jobs = 1) {
  int nx = 0, ng = 0;
  for (const auto& ex : batch) {
    nx += ex.count(false);
    ng += ex.count(true);
  }
  LossBreakdown total;
  total.mlm_tokens = nx;
  total.mnm_tokens = ng;
  if (nx + ng == 0) throw invalid_argument("loss: batch has no masked tokens");
  const size_t workers = std::min<size_t>(batch.size(), static_cast<size_t>(std::max(1, jobs)));
  std::vector<Parameters> partial;
  if (grads && workers > 1) {
    for (size_t w = 0; w < workers; ++w) partial.push_back(Parameters::zeros(model.config()));
  }
  std::vector<LossBreakdown> parts(batch.size());
  const size_t chunk = (batch.size() + workers - 1) / std::max<size_t>(1, workers);
  parallel_for(workers, static_cast<int>(workers), [&](size_t w) {
    for (size_t i = w * chunk; i < std::min(batch.size(), (w + 1) * chunk); ++i) {
      Rng rng = Rng::derive(dropout_seed, i);
      ForwardTape tape;
      const ForwardResult out = model.forward(batch[i], training, &rng, grads ? &tape : nullptr);
      Matrix dl, ds;
      parts[i] = masked_loss(out, batch[i], model.config().mu, grads ? &dl : nullptr,
                             grads ? &ds : nullptr, nx, ng);
      if (grads) model.backward(batch[i], tape, dl, ds, workers > 1 ? partial[w] : *grads);
    }
  });
  for (auto& p : partial) *grads += p;
  for (const auto& p : parts) {
    total.mlm += p.mlm;
    total.mnm += p.mnm;  // already divided by the batch-wide count
  }
  total.total = total.mlm + model.config().mu * total.mnm;
  return total;
}

// Softmax over the vocabulary for every target row.
inline Matrix predict_probabilities(const GraphmertModel& model, const PreparedExample& ex) {
  Matrix logits = model.forward(ex).logits;
  softmax_rows_inplace(logits);
  return logits;
}

}  // namespace graphmert
