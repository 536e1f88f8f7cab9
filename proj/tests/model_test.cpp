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


#include <cmath>

#include <gtest/gtest.h>

#include "graphmert/model/checkpoint.hpp"
#include "graphmert/model/gradient_check.hpp"
#include "test_util.hpp"

namespace graphmert {
namespace {

ModelConfig tiny_config(int vocab, int relations) {
  ModelConfig c;
  c.layers = 2;
  c.heads = 2;
  c.hidden = 8;
  c.intermediate = 16;
  c.vocab = vocab;
  c.relations = relations;
  c.dropout = 0.0;
  c.relation_dropout = 0.0;
  return c;
}

std::vector<PreparedExample> tiny_batch(const Vocabulary& v, int relations, uint64_t seed, int n = 3) {
  Rng rng(seed);
  MaskingConfig mc;
  mc.leaf_rate = 0.6;
  std::vector<PreparedExample> batch;
  const auto rep = replaceable_ids(v);
  while (static_cast<int>(batch.size()) < n) {
    const ChainGraph g = testing::random_graph("b" + std::to_string(batch.size()), v, relations, 6, rng);
    const MaskPlan plan = make_mask_plan(g, v, rep, rng, mc);
    if (plan.tokens.empty()) continue;
    batch.push_back(prepare_example(g, plan, v.pad_id()));
  }
  return batch;
}

// --- decay mask -------------------------------------------------------------

TEST(DecayMask, ClosedFormValues) {
  // lambda^gelu(sqrt(d) - p) evaluated independently.
  auto oracle = [](int d, double lambda, double p) {
    const double x = std::sqrt(d) - p;
    return std::pow(lambda, 0.5 * x * (1 + std::erf(x / std::sqrt(2.0))));
  };
  for (double lambda : {0.3, 0.6, 0.9}) {
    for (double p : {0.0, 0.5, 1.0, 2.0}) {
      for (int d : {0, 1, 2, 5, 9, 50, 129}) {
        EXPECT_NEAR(decay_value(d, lambda, p), oracle(d, lambda, p), 1e-14);
      }
    }
  }
  EXPECT_EQ(decay_value(0, 0.6, 0.0), 1.0);
  EXPECT_NEAR(decay_value(9, 0.6, 1.0), 0.3684653701841524, 1e-12);
}

TEST(DecayMask, OffsetGradientMatchesFiniteDifference) {
  for (int d : {0, 1, 4, 9, 30}) {
    const double h = 1e-6;
    const double num = (decay_value(d, 0.6, 1.2 + h) - decay_value(d, 0.6, 1.2 - h)) / (2 * h);
    EXPECT_NEAR(decay_offset_grad(d, 0.6, 1.2), num, 1e-8) << d;
  }
}

// GELU is decreasing left of its minimum (x ~ -0.7518), so the mask only
// decays with distance once sqrt(d) - p is past it. Right of it: the mask is
// non-increasing in d and non-decreasing in p.
TEST(DecayMask, MonotoneRightOfTheGeluMinimum) {
  const double x_min = -0.75179;
  for (double p : {0.0, 0.7, 1.0, 3.0}) {
    const DecayTable t(129, 0.6, p);
    for (int d = 1; d <= 129; ++d) {
      EXPECT_GT(t.value[d], 0.0);
      if (std::sqrt(d - 1.0) - p >= x_min) {
        EXPECT_LE(t.value[d], t.value[d - 1] + 1e-15) << p << " " << d;
      }
      if (std::sqrt(d) - p - 0.1 >= x_min) {
        EXPECT_GE(decay_value(d, 0.6, p + 0.1), t.value[d]);
      }
    }
  }
  // At p = 0 there is nothing left of the minimum: monotone everywhere.
  const DecayTable t0(129, 0.6, 0.0);
  EXPECT_TRUE(std::is_sorted(t0.value.rbegin(), t0.value.rend()));
}

TEST(DecayMask, FullMaskIsSymmetricWithUnitDiagonal) {
  const Matrix f = build_decay_mask(chain_shortest_paths(), 0.6, 0.0);
  ASSERT_EQ(f.rows(), 1024);
  EXPECT_TRUE(f.isApprox(f.transpose(), 0.0));
  for (int i = 0; i < 1024; i += 37) EXPECT_EQ(f(i, i), 1.0);
  const Matrix a = Matrix::Constant(1024, 1024, 2.0);
  EXPECT_EQ(masked_attention(a, f)(3, 900), 2.0 * f(3, 900));
  EXPECT_THROW(masked_attention(Matrix::Zero(2, 3), f), Error);
}

// --- H-GAT ------------------------------------------------------------------

TEST(Hgat, FusionMatchesAHandWrittenLoop) {
  const int h = 4, m = 3;
  Rng rng(3);
  Vector t(h), a(2 * h);
  Matrix heads(m, h), w(h, h);
  for (int i = 0; i < h; ++i) t(i) = rng.normal();
  for (int i = 0; i < 2 * h; ++i) a(i) = rng.normal();
  for (int i = 0; i < m * h; ++i) heads.data()[i] = rng.normal();
  for (int i = 0; i < h * h; ++i) w.data()[i] = rng.normal();
  // e_j = LeakyReLU(a . [W t ; W h_j]); alpha = softmax(e); t + sum alpha_j W h_j
  std::vector<std::vector<double>> wh(m, std::vector<double>(h, 0.0));
  std::vector<double> wt(h, 0.0), e(m, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < h; ++c) {
      wt[r] += w(r, c) * t(c);
      for (int j = 0; j < m; ++j) wh[j][r] += w(r, c) * heads(j, c);
    }
  }
  double z = 0.0;
  for (int j = 0; j < m; ++j) {
    for (int r = 0; r < h; ++r) e[j] += a(r) * wt[r] + a(h + r) * wh[j][r];
    e[j] = e[j] >= 0 ? e[j] : 0.2 * e[j];
    z += std::exp(e[j]);
  }
  const Vector fused = hgat_fuse(t, heads, w, a, 0.2);
  for (int r = 0; r < h; ++r) {
    double want = t(r);
    for (int j = 0; j < m; ++j) want += std::exp(e[j]) / z * wh[j][r];
    EXPECT_NEAR(fused(r), want, 1e-12);
  }
  EXPECT_THROW(hgat_fuse(t, Matrix(0, h), w, a, 0.2), Error);
}

// --- model ------------------------------------------------------------------

TEST(Model, AnalyticGradientsMatchCentralDifferencesEverywhere) {
  const Vocabulary v = testing::word_vocab(15);
  ModelConfig c = tiny_config(v.size(), 3);
  // A wider init keeps attention gradients well above finite-difference
  // round-off (about 1e-10 here).
  c.init_std = 0.3;
  GraphmertModel model = GraphmertModel::create(c, 11);
  model.params().decay_offset(0, 0) = 0.6;
  const auto batch = tiny_batch(v, 3, 5);
  Rng rng(1);
  // Every tensor family except the key bias, which is covered below.
  std::vector<std::string> families;
  model.params().visit([&](const std::string& n, const Matrix&) {
    if (n.find("attn.bk") == std::string::npos) families.push_back(n);
  });
  const auto coords = sample_coordinates(model.params(), families, 200, rng);
  const GradCheckResult r = gradient_check(model, batch, coords);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

// Softmax is invariant to a per-row shift, so the key bias cannot move the
// loss: its gradient is zero up to round-off.
TEST(Model, KeyBiasGradientVanishes) {
  const Vocabulary v = testing::word_vocab(15);
  ModelConfig c = tiny_config(v.size(), 3);
  c.init_std = 0.3;
  const GraphmertModel model = GraphmertModel::create(c, 11);
  Parameters g = Parameters::zeros(c);
  loss_and_gradients(model, tiny_batch(v, 3, 5), false, 0, &g);
  EXPECT_LT(g.layers[0].bk.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GT(g.layers[0].bq.cwiseAbs().maxCoeff(), 1e-6);
}

// Relations absent from the batch have no path to the loss.
TEST(Model, UnusedRelationHasExactlyZeroGradient) {
  const Vocabulary v = testing::word_vocab(15);
  const GraphmertModel model = GraphmertModel::create(tiny_config(v.size(), 4), 11);
  // tiny_batch only injects relations 0..2.
  Parameters g = Parameters::zeros(model.config());
  loss_and_gradients(model, tiny_batch(v, 3, 5), false, 0, &g);
  EXPECT_EQ(g.rel_w[3].cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.rel_a[3].cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NE(g.decay_offset(0, 0), 0.0);
}

TEST(Model, BatchLossIsIndependentOfWorkerCount) {
  const Vocabulary v = testing::word_vocab(15);
  ModelConfig c = tiny_config(v.size(), 3);
  c.dropout = 0.1;
  c.relation_dropout = 0.3;
  const GraphmertModel model = GraphmertModel::create(c, 11);
  const auto batch = tiny_batch(v, 3, 9, 5);
  Parameters g1 = Parameters::zeros(c), g3 = Parameters::zeros(c);
  const double l1 = loss_and_gradients(model, batch, true, 77, &g1, 1).total;
  const double l3 = loss_and_gradients(model, batch, true, 77, &g3, 3).total;
  EXPECT_NEAR(l1, l3, 1e-12);
  std::vector<double> a, b;
  g1.visit([&](const std::string&, const Matrix& m) { a.insert(a.end(), m.data(), m.data() + m.size()); });
  g3.visit([&](const std::string&, const Matrix& m) { b.insert(b.end(), m.data(), m.data() + m.size()); });
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Model, InitialLossIsNearUniform) {
  const Vocabulary v = testing::word_vocab(60);
  const GraphmertModel model = GraphmertModel::create(tiny_config(v.size(), 3), 2);
  const auto batch = tiny_batch(v, 3, 4, 4);
  const LossBreakdown lb = loss_and_gradients(model, batch, false, 0, nullptr);
  // Token CE and span-boundary CE each start near ln V.
  const double lnv = std::log(v.size());
  EXPECT_NEAR(lb.mlm, 2 * lnv, 0.5);
  EXPECT_NEAR(lb.mnm, lnv, 0.5);
  EXPECT_NEAR(lb.total, lb.mlm + lb.mnm, 1e-12);
}

TEST(Model, PredictionRowsAreDistributions) {
  const Vocabulary v = testing::word_vocab(20);
  const GraphmertModel model = GraphmertModel::create(tiny_config(v.size(), 2), 2);
  Rng rng(8);
  const ChainGraph g = empty_graph(testing::random_sequence("s", v, 40, rng), v.pad_id());
  const PreparedExample q = prepare_query(g, 1, Span{4, 6}, v);
  ASSERT_EQ(q.targets.size(), 7u);
  EXPECT_EQ(q.fusions.size(), 7u);
  const Matrix p = predict_probabilities(model, q);
  for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
}

TEST(Model, PreparedExampleRejectsForeignPlans) {
  const Vocabulary v = testing::word_vocab(20);
  Rng rng(8);
  const ChainGraph a = testing::random_graph("a", v, 2, 4, rng);
  const ChainGraph b = testing::random_graph("b", v, 2, 4, rng);
  const MaskPlan plan = make_mask_plan(a, v, replaceable_ids(v), rng);
  EXPECT_THROW(prepare_example(b, plan, v.pad_id()), Error);
}

TEST(ModelConfig, ValidationAndJsonRoundTrip) {
  ModelConfig c = tiny_config(30, 4);
  EXPECT_EQ(to_json(model_config_from_json(to_json(c))).dump(), to_json(c).dump());
  c.heads = 3;
  EXPECT_THROW(c.validate(), Error);
  c = tiny_config(30, 4);
  c.lambda = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

// --- trainer ----------------------------------------------------------------

TEST(Trainer, WarmupThenCosineSchedule) {
  TrainConfig c;
  c.max_lr = 1e-3;
  c.warmup_steps = 10;
  c.total_steps = 110;
  EXPECT_EQ(learning_rate(c, 0), 0.0);
  EXPECT_NEAR(learning_rate(c, 5), 5e-4, 1e-15);
  EXPECT_NEAR(learning_rate(c, 10), 1e-3, 1e-15);
  EXPECT_NEAR(learning_rate(c, 60), 5e-4, 1e-15);
  EXPECT_NEAR(learning_rate(c, 110), 0.0, 1e-15);
  EXPECT_NEAR(learning_rate(c, 500), 0.0, 1e-15);
  for (int s = 11; s <= 110; ++s) EXPECT_LE(learning_rate(c, s), learning_rate(c, s - 1));
}

TEST(Trainer, AdamWStepMatchesHandComputation) {
  ModelConfig mc = tiny_config(10, 1);
  Parameters params = Parameters::zeros(mc), grads = Parameters::zeros(mc);
  params.token_emb(0, 0) = 1.0;  // matrix: decayed
  params.decay_offset(0, 0) = 1.0;  // 1x1: not decayed
  grads.token_emb(0, 0) = 0.5;
  grads.decay_offset(0, 0) = -2.0;
  TrainConfig c;
  c.weight_decay = 0.1;
  AdamW opt(mc);
  const double lr = 0.01;
  opt.apply(params, grads, lr, c);
  // Step 1: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  EXPECT_NEAR(params.token_emb(0, 0), 1.0 * (1 - lr * 0.1) - lr * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(params.decay_offset(0, 0), 1.0 + lr * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_NEAR(opt.first_moment().token_emb(0, 0), 0.1 * 0.5, 1e-15);
  EXPECT_NEAR(opt.second_moment().decay_offset(0, 0), 0.001 * 4.0, 1e-15);
  EXPECT_EQ(opt.step(), 1);
}

TEST(Trainer, LossDecreasesOnAFixedBatch) {
  const Vocabulary v = testing::word_vocab(15);
  GraphmertModel model = GraphmertModel::create(tiny_config(v.size(), 3), 11);
  TrainConfig tc;
  tc.max_lr = 5e-3;
  tc.warmup_steps = 5;
  tc.total_steps = 80;
  Trainer trainer(model, tc);
  const auto batch = tiny_batch(v, 3, 5);
  const double before = loss_and_gradients(model, batch, false, 0, nullptr).total;
  for (int s = 0; s < 80; ++s) trainer.step(batch, s);
  const double after = loss_and_gradients(model, batch, false, 0, nullptr).total;
  EXPECT_LT(after, 0.7 * before);
}

TEST(Trainer, NonFiniteLossAbortsWithoutUpdating) {
  const Vocabulary v = testing::word_vocab(15);
  GraphmertModel model = GraphmertModel::create(tiny_config(v.size(), 3), 11);
  model.params().token_emb(6, 0) = std::numeric_limits<double>::quiet_NaN();
  const Parameters before = model.params();
  Trainer trainer(model, TrainConfig{});
  try {
    trainer.step(tiny_batch(v, 3, 5), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNonFiniteLoss);
  }
  EXPECT_EQ(trainer.optimizer().step(), 0);
  EXPECT_EQ(model.params().token_emb(7, 3), before.token_emb(7, 3));
}

TEST(Trainer, GradientClippingBoundsTheFirstUpdate) {
  // With clipping at norm c, Adam's first step still moves each coordinate by
  // about lr, but the first moment holds the clipped gradient.
  const Vocabulary v = testing::word_vocab(15);
  GraphmertModel model = GraphmertModel::create(tiny_config(v.size(), 3), 11);
  TrainConfig tc;
  tc.warmup_steps = 0;
  tc.grad_clip = 1e-3;
  Trainer trainer(model, tc);
  trainer.step(tiny_batch(v, 3, 5), 0);
  Parameters m = trainer.optimizer().first_moment();
  EXPECT_NEAR(global_norm(m), 0.1 * 1e-3, 1e-12);
}

// --- checkpoint ---------------------------------------------------------------

TEST(Checkpoint, RoundTripIsByteExact) {
  const Vocabulary v = testing::word_vocab(15);
  GraphmertModel model = GraphmertModel::create(tiny_config(v.size(), 3), 11);
  Trainer trainer(model, TrainConfig{});
  trainer.step(tiny_batch(v, 3, 5), 0);
  Checkpoint ck{model.config(), {"a", "b", "c"}, model.params(), trainer.optimizer().first_moment(),
                trainer.optimizer().second_moment(), 1, 42, json{{"note", "x"}}};
  const std::string bytes = serialize_checkpoint(ck);
  const Checkpoint back = deserialize_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_EQ(back.relations, ck.relations);
  EXPECT_EQ(back.step, 1);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.params.token_emb, model.params().token_emb);

  const std::string dir = testing::scratch_dir("ckpt");
  save_checkpoint(dir + "/m.bin", ck);
  EXPECT_EQ(serialize_checkpoint(load_checkpoint(dir + "/m.bin")), bytes);
}

TEST(Checkpoint, CorruptDataIsASchemaError) {
  const Vocabulary v = testing::word_vocab(15);
  const GraphmertModel model = GraphmertModel::create(tiny_config(v.size(), 3), 11);
  const Checkpoint ck{model.config(), {"a", "b", "c"}, model.params(), Parameters::zeros(model.config()),
                      Parameters::zeros(model.config()), 0, 1, json::object()};
  const std::string bytes = serialize_checkpoint(ck);
  for (const std::string& bad : {std::string("nonsense"), bytes.substr(0, bytes.size() - 8),
                                 bytes + "x", "GMERTCK2" + bytes.substr(8)}) {
    try {
      deserialize_checkpoint(bad);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kSchemaMismatch);
    }
  }
}

}  // namespace
}  // namespace graphmert
