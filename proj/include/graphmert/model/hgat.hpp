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

// Relation-aware fusion of a leaf token with the tokens of its head.
//
//   u   = W_r t                 v_j = W_r h_j
//   e_j = LeakyReLU(a_r . [u ; v_j])
//   alpha = softmax_j(e)
//   t'  = t + sum_j alpha_j v_j
//
// Only intra-relation attention is kept: each leaf sees one relation.

#pragma once

#include "graphmert/common.hpp"
#include "graphmert/model/tensor.hpp"

namespace graphmert {

struct HgatTrace {
  Vector u;      // W t
  Matrix v;      // m x hidden, row j = W h_j
  Vector z;      // pre-activation scores
  Vector alpha;  // attention over head tokens
};

// heads: m x hidden, one head token embedding per row.
inline Vector hgat_scores(const Vector& t, const Matrix& heads, const Matrix& w,
                          const Vector& a, double slope, HgatTrace* trace = nullptr) {
  const Eigen::Index m = heads.rows(), h = t.size();
  if (m == 0) throw invalid_argument("hgat: at least one head token required");
  if (w.rows() != h || w.cols() != h || a.size() != 2 * h || heads.cols() != h) {
    throw invalid_argument("hgat: dimension mismatch");
  }
  Vector u = w * t;
  Matrix v = heads * w.transpose();
  const double head_part = a.head(h).dot(u);
  Vector z = (v * a.tail(h)).array() + head_part;
  Vector e = z.unaryExpr([slope](double x) { return leaky_relu(x, slope); });
  Vector alpha = (e.array() - e.maxCoeff()).exp();
  alpha /= alpha.sum();
  if (trace) {
    trace->u = std::move(u);
    trace->v = std::move(v);
    trace->z = std::move(z);
    trace->alpha = alpha;
  }
  return alpha;
}

inline Vector hgat_fuse(const Vector& t, const Matrix& heads, const Matrix& w,
                        const Vector& a, double slope, HgatTrace* trace = nullptr) {
  HgatTrace local;
  HgatTrace& tr = trace ? *trace : local;
  hgat_scores(t, heads, w, a, slope, &tr);
  return t + tr.v.transpose() * tr.alpha;
}

// Accumulates gradients of t' = hgat_fuse(...) given g = dL/dt'.
inline void hgat_backward(const Vector& t, const Matrix& heads, const Matrix& w,
                          const Vector& a, double slope, const HgatTrace& tr,
                          const Vector& g, Vector& dt, Matrix& dheads, Matrix& dw,
                          Vector& da) {
  const Eigen::Index h = t.size();
  dt += g;
  const Vector dalpha = tr.v * g;
  Matrix dv = tr.alpha * g.transpose();
  const double weighted = tr.alpha.dot(dalpha);
  Vector de = tr.alpha.array() * (dalpha.array() - weighted);
  Vector dz(de.size());
  for (Eigen::Index j = 0; j < de.size(); ++j) dz(j) = de(j) * leaky_relu_grad(tr.z(j), slope);
  const double dz_sum = dz.sum();
  da.head(h) += dz_sum * tr.u;
  da.tail(h) += tr.v.transpose() * dz;
  const Vector du = dz_sum * a.head(h);
  dv += dz * a.tail(h).transpose();
  dw.noalias() += du * t.transpose();
  dw.noalias() += dv.transpose() * heads;
  dt.noalias() += w.transpose() * du;
  dheads.noalias() += dv * w;
}

}  // namespace graphmert
