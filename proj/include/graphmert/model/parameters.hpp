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

#pragma once

#include <string>
#include <vector>

#include "graphmert/common.hpp"
#include "graphmert/model/config.hpp"
#include "graphmert/model/tensor.hpp"

namespace graphmert {

struct LayerParams {
  Matrix wq, wk, wv, wo;  // hidden x hidden
  Matrix bq, bk, bv, bo;  // 1 x hidden
  Matrix ln1_g, ln1_b;
  Matrix w1, b1;  // hidden x intermediate, 1 x intermediate
  Matrix w2, b2;  // intermediate x hidden, 1 x hidden
  Matrix ln2_g, ln2_b;

  template <typename Self, typename F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "attn.wq", self.wq);
    f(prefix + "attn.wk", self.wk);
    f(prefix + "attn.wv", self.wv);
    f(prefix + "attn.wo", self.wo);
    f(prefix + "attn.bq", self.bq);
    f(prefix + "attn.bk", self.bk);
    f(prefix + "attn.bv", self.bv);
    f(prefix + "attn.bo", self.bo);
    f(prefix + "ln1.gamma", self.ln1_g);
    f(prefix + "ln1.beta", self.ln1_b);
    f(prefix + "ffn.w1", self.w1);
    f(prefix + "ffn.b1", self.b1);
    f(prefix + "ffn.w2", self.w2);
    f(prefix + "ffn.b2", self.b2);
    f(prefix + "ln2.gamma", self.ln2_g);
    f(prefix + "ln2.beta", self.ln2_b);
  }
};

// Every trainable tensor. Vectors are stored as 1 x n matrices so that the
// whole set can be walked uniformly by the optimizer, checkpoints and the
// gradient checker.
struct Parameters {
  Matrix token_emb;  // vocab x hidden, tied with the output projection
  Matrix pos_emb;    // max_len x hidden
  Matrix emb_ln_g, emb_ln_b;

  std::vector<Matrix> rel_w;  // per relation: hidden x hidden
  std::vector<Matrix> rel_a;  // per relation: 1 x 2*hidden

  std::vector<LayerParams> layers;

  Matrix mlm_w, mlm_b, mlm_ln_g, mlm_ln_b;
  Matrix out_bias;  // 1 x vocab

  Matrix sbo_pos;  // max_span x hidden
  Matrix sbo_w1, sbo_b1, sbo_ln1_g, sbo_ln1_b;  // 3*hidden -> hidden
  Matrix sbo_w2, sbo_b2, sbo_ln2_g, sbo_ln2_b;  // hidden -> hidden

  Matrix decay_offset;  // 1 x 1, the learnable p of the decay mask

  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  static Parameters zeros(const ModelConfig& c) {
    const int h = c.hidden;
    Parameters p;
    auto z = [](int r, int k) { return Matrix::Zero(r, k); };
    p.token_emb = z(c.vocab, h);
    p.pos_emb = z(c.max_len, h);
    p.emb_ln_g = z(1, h);
    p.emb_ln_b = z(1, h);
    for (int r = 0; r < c.relations; ++r) {
      p.rel_w.push_back(z(h, h));
      p.rel_a.push_back(z(1, 2 * h));
    }
    for (int l = 0; l < c.layers; ++l) {
      LayerParams lp;
      lp.wq = lp.wk = lp.wv = lp.wo = z(h, h);
      lp.bq = lp.bk = lp.bv = lp.bo = z(1, h);
      lp.ln1_g = lp.ln1_b = lp.ln2_g = lp.ln2_b = z(1, h);
      lp.w1 = z(h, c.intermediate);
      lp.b1 = z(1, c.intermediate);
      lp.w2 = z(c.intermediate, h);
      lp.b2 = z(1, h);
      p.layers.push_back(std::move(lp));
    }
    p.mlm_w = z(h, h);
    p.mlm_b = p.mlm_ln_g = p.mlm_ln_b = z(1, h);
    p.out_bias = z(1, c.vocab);
    p.sbo_pos = z(c.max_span, h);
    p.sbo_w1 = z(3 * h, h);
    p.sbo_b1 = p.sbo_ln1_g = p.sbo_ln1_b = z(1, h);
    p.sbo_w2 = z(h, h);
    p.sbo_b2 = p.sbo_ln2_g = p.sbo_ln2_b = z(1, h);
    p.decay_offset = z(1, 1);
    return p;
  }

  static Parameters initialize(const ModelConfig& c, uint64_t seed) {
    Parameters p = zeros(c);
    Rng rng(seed);
    auto fill = [&](Matrix& m, double std) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std * rng.normal();
    };
    auto ones = [](Matrix& m) { m.setOnes(); };
    fill(p.token_emb, c.init_std);
    fill(p.pos_emb, c.init_std);
    ones(p.emb_ln_g);
    const double rel_std = 1.0 / std::sqrt(static_cast<double>(c.hidden));
    for (auto& w : p.rel_w) fill(w, rel_std);
    for (auto& a : p.rel_a) fill(a, rel_std);
    for (auto& lp : p.layers) {
      fill(lp.wq, c.init_std);
      fill(lp.wk, c.init_std);
      fill(lp.wv, c.init_std);
      fill(lp.wo, c.init_std);
      fill(lp.w1, c.init_std);
      fill(lp.w2, c.init_std);
      ones(lp.ln1_g);
      ones(lp.ln2_g);
    }
    fill(p.mlm_w, c.init_std);
    ones(p.mlm_ln_g);
    fill(p.sbo_pos, c.init_std);
    fill(p.sbo_w1, c.init_std);
    fill(p.sbo_w2, c.init_std);
    ones(p.sbo_ln1_g);
    ones(p.sbo_ln2_g);
    p.decay_offset(0, 0) = c.init_decay_offset;
    return p;
  }

  void set_zero() {
    visit([](const std::string&, Matrix& m) { m.setZero(); });
  }

  size_t count() const {
    size_t n = 0;
    visit([&](const std::string&, const Matrix& m) { n += static_cast<size_t>(m.size()); });
    return n;
  }

  Parameters& operator+=(const Parameters& o) {
    std::vector<const Matrix*> theirs;
    o.visit([&](const std::string&, const Matrix& m) { theirs.push_back(&m); });
    size_t i = 0;
    visit([&](const std::string&, Matrix& m) { m += *theirs[i++]; });
    return *this;
  }

  bool all_finite() const {
    bool ok = true;
    visit([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
    return ok;
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& p, F& f) {
    f(std::string("embeddings.token"), p.token_emb);
    f(std::string("embeddings.position"), p.pos_emb);
    f(std::string("embeddings.ln.gamma"), p.emb_ln_g);
    f(std::string("embeddings.ln.beta"), p.emb_ln_b);
    for (size_t r = 0; r < p.rel_w.size(); ++r) {
      f("hgat." + std::to_string(r) + ".w", p.rel_w[r]);
      f("hgat." + std::to_string(r) + ".a", p.rel_a[r]);
    }
    for (size_t l = 0; l < p.layers.size(); ++l) {
      LayerParams::visit(p.layers[l], "layer." + std::to_string(l) + ".", f);
    }
    f(std::string("mlm.w"), p.mlm_w);
    f(std::string("mlm.b"), p.mlm_b);
    f(std::string("mlm.ln.gamma"), p.mlm_ln_g);
    f(std::string("mlm.ln.beta"), p.mlm_ln_b);
    f(std::string("mlm.out_bias"), p.out_bias);
    f(std::string("sbo.position"), p.sbo_pos);
    f(std::string("sbo.w1"), p.sbo_w1);
    f(std::string("sbo.b1"), p.sbo_b1);
    f(std::string("sbo.ln1.gamma"), p.sbo_ln1_g);
    f(std::string("sbo.ln1.beta"), p.sbo_ln1_b);
    f(std::string("sbo.w2"), p.sbo_w2);
    f(std::string("sbo.b2"), p.sbo_b2);
    f(std::string("sbo.ln2.gamma"), p.sbo_ln2_g);
    f(std::string("sbo.ln2.beta"), p.sbo_ln2_b);
    f(std::string("decay.offset"), p.decay_offset);
  }
};

}  // namespace graphmert
