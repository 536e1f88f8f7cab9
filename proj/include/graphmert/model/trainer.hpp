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

#include <cmath>
#include <string>
#include <vector>

#include "graphmert/model/graphmert.hpp"

namespace graphmert {

struct TrainConfig {
  double max_lr = 4e-4;
  int warmup_steps = 500;
  int total_steps = 10000;
  double min_lr = 0.0;
  double weight_decay = 0.01;  // decoupled, scaled by the current lr
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables
};

inline json to_json(const TrainConfig& c) {
  return json{{"max_lr", c.max_lr},       {"warmup_steps", c.warmup_steps},
              {"total_steps", c.total_steps}, {"min_lr", c.min_lr},
              {"weight_decay", c.weight_decay}, {"beta1", c.beta1},
              {"beta2", c.beta2},         {"eps", c.eps},
              {"grad_clip", c.grad_clip}};
}

inline TrainConfig train_config_from_json(const json& j, TrainConfig c = {}) {
  c.max_lr = j.value("max_lr", c.max_lr);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.min_lr = j.value("min_lr", c.min_lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  return c;
}

// Linear warm-up to max_lr (reached exactly at step == warmup_steps), then
// cosine decay to min_lr at total_steps.
inline double learning_rate(const TrainConfig& c, int step) {
  if (c.warmup_steps > 0 && step < c.warmup_steps) {
    return c.max_lr * static_cast<double>(step) / c.warmup_steps;
  }
  const int decay_steps = std::max(1, c.total_steps - c.warmup_steps);
  const double progress = std::min(1.0, static_cast<double>(step - c.warmup_steps) / decay_steps);
  return c.min_lr + 0.5 * (c.max_lr - c.min_lr) * (1.0 + std::cos(M_PI * progress));
}

// Adam moments with decoupled weight decay on weight matrices. Vectors (bias,
// layer-norm, the decay offset) are not decayed.
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(const ModelConfig& mc) : m_(Parameters::zeros(mc)), v_(Parameters::zeros(mc)) {}

  int step() const { return step_; }
  void set_step(int s) { step_ = s; }
  const Parameters& first_moment() const { return m_; }
  const Parameters& second_moment() const { return v_; }
  Parameters& first_moment() { return m_; }
  Parameters& second_moment() { return v_; }

  void apply(Parameters& params, const Parameters& grads, double lr, const TrainConfig& c) {
    ++step_;
    const double bc1 = 1.0 - std::pow(c.beta1, step_);
    const double bc2 = 1.0 - std::pow(c.beta2, step_);
    std::vector<const Matrix*> g;
    grads.visit([&](const std::string&, const Matrix& x) { g.push_back(&x); });
    std::vector<Matrix*> m, v;
    m_.visit([&](const std::string&, Matrix& x) { m.push_back(&x); });
    v_.visit([&](const std::string&, Matrix& x) { v.push_back(&x); });
    size_t i = 0;
    params.visit([&](const std::string&, Matrix& w) {
      const Matrix& gi = *g[i];
      Matrix& mi = *m[i];
      Matrix& vi = *v[i];
      mi = c.beta1 * mi + (1.0 - c.beta1) * gi;
      vi = c.beta2 * vi + (1.0 - c.beta2) * gi.cwiseProduct(gi);
      if (lr != 0.0) {
        if (w.rows() > 1 && c.weight_decay > 0.0) w *= 1.0 - lr * c.weight_decay;
        w.array() -= lr * (mi.array() / bc1) / ((vi.array() / bc2).sqrt() + c.eps);
      }
      ++i;
    });
  }

 private:
  Parameters m_, v_;
  int step_ = 0;
};

inline double global_norm(const Parameters& g) {
  double s = 0.0;
  g.visit([&](const std::string&, const Matrix& m) { s += m.squaredNorm(); });
  return std::sqrt(s);
}

struct StepMetrics {
  int step = 0;
  double loss = 0.0;
  double mlm = 0.0;
  double mnm = 0.0;
  double lr = 0.0;
  double p = 0.0;
};

inline json to_json(const StepMetrics& m) {
  return json{{"step", m.step}, {"loss", m.loss}, {"mlm", m.mlm},
              {"mnm", m.mnm},   {"lr", m.lr},     {"p", m.p}};
}

class Trainer {
 public:
  Trainer(GraphmertModel& model, TrainConfig config)
      : model_(model), config_(config), optimizer_(model.config()) {}

  AdamW& optimizer() { return optimizer_; }
  const TrainConfig& config() const { return config_; }

  // One update on `batch`. Throws kNonFiniteLoss before touching the
  // parameters if the loss or any gradient is not finite.
  StepMetrics step(const std::vector<PreparedExample>& batch, uint64_t dropout_seed, int jobs = 1) {
    const int s = optimizer_.step();
    Parameters grads = Parameters::zeros(model_.config());
    const LossBreakdown lb = loss_and_gradients(model_, batch, true, dropout_seed, &grads, jobs);
    if (!std::isfinite(lb.total) || !grads.all_finite()) {
      throw Error(ErrorKind::kNonFiniteLoss,
                  "non-finite loss at step " + std::to_string(s) + " (loss=" +
                      std::to_string(lb.total) + ", mlm=" + std::to_string(lb.mlm) +
                      ", mnm=" + std::to_string(lb.mnm) + ")");
    }
    if (config_.grad_clip > 0.0) {
      const double norm = global_norm(grads);
      if (norm > config_.grad_clip) {
        const double f = config_.grad_clip / norm;
        grads.visit([&](const std::string&, Matrix& m) { m *= f; });
      }
    }
    const double lr = learning_rate(config_, s);
    optimizer_.apply(model_.params(), grads, lr, config_);
    return {s, lb.total, lb.mlm, lb.mnm, lr, model_.decay_offset()};
  }

 private:
  GraphmertModel& model_;
  TrainConfig config_;
  AdamW optimizer_;
};

}  // namespace graphmert
