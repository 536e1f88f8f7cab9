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

// Distance-decay attention mask f(i, j) = lambda^GELU(sqrt(sp(i, j)) - p).
// The mask multiplies post-softmax attention weights; rows are not
// renormalized afterwards.

#pragma once

#include <vector>

#include "graphmert/chaingraph.hpp"
#include "graphmert/model/tensor.hpp"

namespace graphmert {

inline double decay_value(int distance, double lambda, double offset) {
  return std::pow(lambda, gelu(std::sqrt(static_cast<double>(distance)) - offset));
}

// d f / d offset.
inline double decay_offset_grad(int distance, double lambda, double offset) {
  const double x = std::sqrt(static_cast<double>(distance)) - offset;
  return -decay_value(distance, lambda, offset) * std::log(lambda) * gelu_grad(x);
}

// Mask values indexed by distance. Every pair at the same distance shares a
// value, so this is all the state the mask needs.
struct DecayTable {
  std::vector<double> value;
  std::vector<double> offset_grad;

  DecayTable(int max_distance, double lambda, double offset)
      : value(static_cast<size_t>(max_distance) + 1),
        offset_grad(static_cast<size_t>(max_distance) + 1) {
    for (int d = 0; d <= max_distance; ++d) {
      value[d] = decay_value(d, lambda, offset);
      offset_grad[d] = decay_offset_grad(d, lambda, offset);
    }
  }
};

inline Matrix build_decay_mask(const DistanceMatrix& sp, double lambda, double offset) {
  const DecayTable table(sp.max_finite(), lambda, offset);
  Matrix f(sp.n, sp.n);
  for (int i = 0; i < sp.n; ++i) {
    for (int j = 0; j < sp.n; ++j) f(i, j) = table.value[sp(i, j)];
  }
  return f;
}

inline Matrix masked_attention(const Matrix& attention, const Matrix& mask) {
  if (attention.rows() != mask.rows() || attention.cols() != mask.cols()) {
    throw invalid_argument("masked_attention: shape mismatch");
  }
  return attention.cwiseProduct(mask);
}

}  // namespace graphmert
