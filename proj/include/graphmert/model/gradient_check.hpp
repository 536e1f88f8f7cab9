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

// Central-difference check of the analytic gradients.

#pragma once

#include <string>
#include <vector>

#include "graphmert/model/graphmert.hpp"

namespace graphmert {

struct GradCoordinate {
  std::string tensor;
  Eigen::Index index = 0;  // flat, row-major
};

struct GradCheckEntry {
  GradCoordinate coord;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> entries;
};

inline Matrix& find_tensor(Parameters& p, const std::string& name) {
  Matrix* found = nullptr;
  p.visit([&](const std::string& n, Matrix& m) {
    if (n == name) found = &m;
  });
  if (!found) throw invalid_argument("unknown tensor: " + name);
  return *found;
}

// `count` coordinates drawn uniformly from the tensors whose names start with
// one of `prefixes`, proportionally to nothing: each draw first picks a tensor,
// then an element, so small tensors like the decay offset get sampled.
inline std::vector<GradCoordinate> sample_coordinates(const Parameters& p,
                                                      const std::vector<std::string>& prefixes,
                                                      int count, Rng& rng) {
  std::vector<std::pair<std::string, Eigen::Index>> tensors;
  p.visit([&](const std::string& n, const Matrix& m) {
    for (const auto& pre : prefixes) {
      if (n.rfind(pre, 0) == 0 && m.size() > 0) {
        tensors.emplace_back(n, m.size());
        break;
      }
    }
  });
  if (tensors.empty()) throw invalid_argument("no tensors match the requested prefixes");
  std::vector<GradCoordinate> out;
  for (int i = 0; i < count; ++i) {
    const auto& [name, size] = tensors[rng.uniform_int(tensors.size())];
    out.push_back({name, static_cast<Eigen::Index>(rng.uniform_int(static_cast<uint64_t>(size)))});
  }
  return out;
}

// Dropout is disabled for both the analytic and the numeric evaluation.
inline GradCheckResult gradient_check(const GraphmertModel& model,
                                      const std::vector<PreparedExample>& batch,
                                      const std::vector<GradCoordinate>& coords,
                                      double step = 1e-5) {
  Parameters grads = Parameters::zeros(model.config());
  loss_and_gradients(model, batch, false, 0, &grads);
  if (!grads.all_finite()) throw Error(ErrorKind::kNonFiniteLoss, "non-finite gradients");
  GraphmertModel probe = model;
  GradCheckResult result;
  for (const auto& c : coords) {
    Matrix& w = find_tensor(probe.params(), c.tensor);
    const double saved = w.data()[c.index];
    w.data()[c.index] = saved + step;
    const double up = loss_and_gradients(probe, batch, false, 0, nullptr).total;
    w.data()[c.index] = saved - step;
    const double down = loss_and_gradients(probe, batch, false, 0, nullptr).total;
    w.data()[c.index] = saved;
    GradCheckEntry e{c, find_tensor(grads, c.tensor).data()[c.index], (up - down) / (2 * step), 0};
    e.rel_error = std::abs(e.analytic - e.numeric) / std::max(1e-8, std::abs(e.numeric));
    result.max_rel_error = std::max(result.max_rel_error, e.rel_error);
    result.entries.push_back(e);
  }
  return result;
}

}  // namespace graphmert
