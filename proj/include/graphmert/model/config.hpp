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

#include "graphmert/common.hpp"

namespace graphmert {

struct ModelConfig {
  int layers = 12;
  int heads = 8;
  int hidden = 512;
  int intermediate = 2048;
  int vocab = 30522;
  int relations = 28;
  int max_len = 1024;
  double lambda = 0.6;  // decay-mask base
  double dropout = 0.1;  // hidden, attention and activation dropout
  double relation_dropout = 0.3;
  double mu = 1.0;  // weight of the leaf (MNM) loss
  double leaky_slope = 0.01;
  double init_decay_offset = 1.0;  // initial value of the learnable offset p
  double init_std = 0.02;
  int max_span = 7;  // span-boundary position table size
  bool use_hgat = true;

  void validate() const {
    if (layers < 1 || heads < 1 || hidden < 1 || intermediate < 1 || vocab < 4) {
      throw invalid_argument("model config: sizes must be positive");
    }
    if (hidden % heads != 0) throw invalid_argument("model config: hidden % heads != 0");
    if (!(lambda > 0.0 && lambda < 1.0)) throw invalid_argument("model config: lambda must be in (0,1)");
    if (!(mu > 0.0)) throw invalid_argument("model config: mu must be > 0");
    if (dropout < 0.0 || dropout >= 1.0 || relation_dropout < 0.0 || relation_dropout > 1.0) {
      throw invalid_argument("model config: dropout out of range");
    }
    if (relations < 0) throw invalid_argument("model config: negative relation count");
  }
};

inline json to_json(const ModelConfig& c) {
  return json{{"layers", c.layers},
              {"heads", c.heads},
              {"hidden", c.hidden},
              {"intermediate", c.intermediate},
              {"vocab", c.vocab},
              {"relations", c.relations},
              {"max_len", c.max_len},
              {"lambda", c.lambda},
              {"dropout", c.dropout},
              {"relation_dropout", c.relation_dropout},
              {"mu", c.mu},
              {"leaky_slope", c.leaky_slope},
              {"init_decay_offset", c.init_decay_offset},
              {"init_std", c.init_std},
              {"max_span", c.max_span},
              {"use_hgat", c.use_hgat}};
}

// Missing keys keep their defaults.
inline ModelConfig model_config_from_json(const json& j, ModelConfig c = {}) {
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.hidden = j.value("hidden", c.hidden);
  c.intermediate = j.value("intermediate", c.intermediate);
  c.vocab = j.value("vocab", c.vocab);
  c.relations = j.value("relations", c.relations);
  c.max_len = j.value("max_len", c.max_len);
  c.lambda = j.value("lambda", c.lambda);
  c.dropout = j.value("dropout", c.dropout);
  c.relation_dropout = j.value("relation_dropout", c.relation_dropout);
  c.mu = j.value("mu", c.mu);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  c.init_decay_offset = j.value("init_decay_offset", c.init_decay_offset);
  c.init_std = j.value("init_std", c.init_std);
  c.max_span = j.value("max_span", c.max_span);
  c.use_hgat = j.value("use_hgat", c.use_hgat);
  return c;
}

}  // namespace graphmert
