// Copyright 2026 The SpikeAudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spikeaudit/dropout.hpp"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "spikeaudit/attacks.hpp"
#include "spikeaudit/dataset.hpp"
#include "spikeaudit/rng.hpp"

namespace spikeaudit {
namespace {

AnyNetwork tiny_snn(int in_dim, std::uint64_t seed) {
  Rng rng(seed);
  SpikingNetwork net;
  net.stack.input_shape = {in_dim};
  net.stack.layers.push_back(init_linear(5, in_dim, rng));
  net.stack.layers.push_back(init_linear(2, 5, rng));
  net.latency = 2;
  net.decay = 0.9f;
  net.thresholds = {0.5f};
  net.validate();
  return net;
}

AnyNetwork one_layer_ann(const Tensor& weight) {
  AnnNetwork net;
  net.stack.input_shape = {weight.shape[1]};
  LinearLayer l;
  l.weight = weight;
  l.bias = Tensor::zeros({weight.shape[0]});
  net.stack.layers.push_back(l);
  net.validate();
  return net;
}

TEST(DropoutSpecValidation, BoundsEnforced) {
  DropoutSpec ok{0.5f, 4, 1};
  ok.validate();
  EXPECT_THROW((DropoutSpec{-0.1f, 1, 1}).validate(), std::invalid_argument);
  EXPECT_THROW((DropoutSpec{1.1f, 1, 1}).validate(), std::invalid_argument);
  EXPECT_THROW((DropoutSpec{0.5f, 0, 1}).validate(), std::invalid_argument);
}

TEST(DropoutMask, DeterministicPerSampleAndPass) {
  DropoutSpec spec{0.3f, 4, 99};
  Tensor a = dropout_mask(16, spec, 7, 2);
  Tensor b = dropout_mask(16, spec, 7, 2);
  ASSERT_EQ(a.data, b.data);
  Tensor other_pass = dropout_mask(16, spec, 7, 3);
  Tensor other_sample = dropout_mask(16, spec, 8, 2);
  EXPECT_NE(a.data, other_pass.data);
  EXPECT_NE(a.data, other_sample.data);
}

TEST(DropoutMask, ElementsAreBinaryWithConfiguredRate) {
  DropoutSpec spec{0.25f, 1, 5};
  int zeros = 0, total = 0;
  for (int sample = 0; sample < 50; ++sample) {
    Tensor m = dropout_mask(40, spec, sample, 0);
    for (float v : m.data) {
      ASSERT_TRUE(v == 0.0f || v == 1.0f);
      zeros += v == 0.0f;
      ++total;
    }
  }
  const double rate = static_cast<double>(zeros) / total;
  EXPECT_NEAR(rate, 0.25, 0.03);
}

TEST(DropoutMask, EdgeRates) {
  DropoutSpec keep_all{0.0f, 1, 5};
  for (float v : dropout_mask(32, keep_all, 0, 0).data) ASSERT_EQ(v, 1.0f);
  DropoutSpec drop_all{1.0f, 1, 5};
  for (float v : dropout_mask(32, drop_all, 0, 0).data) ASSERT_EQ(v, 0.0f);
}

TEST(DropoutConfidence, ZeroRateEqualsPlainConfidenceExactly) {
  AnyNetwork net = tiny_snn(6, 71);
  Rng rng(3);
  Tensor x = Tensor::zeros({6});
  for (float& v : x.data) v = rng.normal_float(0.0f, 1.0f);
  DropoutSpec spec{0.0f, 5, 123};
  const double plain = confidence(net, x, 1);
  EXPECT_EQ(dropout_confidence(net, x, 1, spec, 42), plain);
}

TEST(DropoutConfidence, FullRateEqualsZeroInput) {
  AnyNetwork net = tiny_snn(6, 72);
  Rng rng(4);
  Tensor x = Tensor::zeros({6});
  for (float& v : x.data) v = rng.normal_float(0.0f, 1.0f);
  DropoutSpec spec{1.0f, 3, 9};
  const double zero_conf = confidence(net, Tensor::zeros({6}), 0);
  EXPECT_EQ(dropout_confidence(net, x, 0, spec, 1), zero_conf);
}

TEST(DropoutConfidence, ManyPassesApproachEnumeratedExpectation) {
  // 4 inputs: all 16 masks enumerable, so the expectation and its variance
  // are exact. The Monte Carlo mean must land within three standard errors.
  Tensor weight({2, 4}, {0.8f, -0.4f, 0.6f, 0.2f,
                         -0.3f, 0.5f, -0.7f, 0.4f});
  AnyNetwork net = one_layer_ann(weight);
  Tensor x({4}, {0.9f, -1.2f, 0.5f, 1.4f});
  const double p = 0.3;
  const int y = 1;

  double mean = 0.0, second = 0.0;
  for (int bitsmask = 0; bitsmask < 16; ++bitsmask) {
    Tensor masked = x;
    double prob = 1.0;
    for (int k = 0; k < 4; ++k) {
      const bool dropped = (bitsmask >> k) & 1;
      if (dropped) masked.data[static_cast<size_t>(k)] = 0.0f;
      prob *= dropped ? p : (1.0 - p);
    }
    const double c = confidence(net, masked, y);
    mean += prob * c;
    second += prob * c * c;
  }
  const double variance = second - mean * mean;

  const int passes = 4000;
  DropoutSpec spec{static_cast<float>(p), passes, 2024};
  const double estimate = dropout_confidence(net, x, y, spec, 0);
  const double stderr_bound = 3.0 * std::sqrt(variance / passes);
  EXPECT_NEAR(estimate, mean, stderr_bound);
}

TEST(InputWeightIdentity, HoldsForRandomMasks) {
  Rng rng(88);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor w = Tensor::zeros({3, 5});
    for (float& v : w.data) v = rng.normal_float(0.0f, 1.0f);
    Tensor x = Tensor::zeros({5});
    for (float& v : x.data) v = rng.normal_float(0.0f, 1.0f);
    Tensor m = Tensor::zeros({5});
    for (float& v : m.data) v = rng.bernoulli(0.4) ? 0.0f : 1.0f;
    ASSERT_TRUE(
        input_weight_dropout_identity_check(w, x, m, Activation::kSigmoid));
    ASSERT_TRUE(
        input_weight_dropout_identity_check(w, x, m, Activation::kRelu));
  }
}

TEST(InputWeightIdentity, DegenerateMasks) {
  Rng rng(89);
  Tensor w = Tensor::zeros({2, 3});
  for (float& v : w.data) v = rng.normal_float(0.0f, 1.0f);
  Tensor x({3}, {0.5f, -0.25f, 1.0f});
  EXPECT_TRUE(input_weight_dropout_identity_check(
      w, x, Tensor({3}, {1.0f, 1.0f, 1.0f}), Activation::kSigmoid));
  EXPECT_TRUE(input_weight_dropout_identity_check(
      w, x, Tensor({3}, {0.0f, 0.0f, 0.0f}), Activation::kSigmoid));
}

TEST(InputWeightIdentity, ShapeMismatchRejected) {
  Tensor w = Tensor::zeros({2, 3});
  Tensor x = Tensor::zeros({4});
  Tensor m = Tensor::zeros({3});
  EXPECT_THROW(input_weight_dropout_identity_check(w, x, m,
                                                   Activation::kSigmoid),
               std::invalid_argument);
}

struct GridFixture {
  Dataset d;
  std::vector<AnyNetwork> nets;
  std::vector<const AnyNetwork*> pool;
  std::vector<std::vector<std::uint8_t>> in_bits;

  GridFixture() : d(make_blobs(6, 2, 2, 4.0f, 17)) {
    SplitPlan plan = plan_splits(d, 1, 17);
    nets.push_back(tiny_snn(2, 100));
    nets.push_back(tiny_snn(2, 101));
    for (const AnyNetwork& n : nets) pool.push_back(&n);
    in_bits = plan.in_reference;
  }
};

TEST(GridSearch, SingletonGridReturnsNoDropout) {
  GridFixture fx;
  GridSearchResult r = grid_search_dropout(fx.pool, fx.d, fx.in_bits, {0.0f},
                                           {1}, AttackKind::kAttackP, 5);
  EXPECT_EQ(r.best.p, 0.0f);
  EXPECT_EQ(r.best.passes, 1);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_DOUBLE_EQ(r.best_auc, r.cells[0].auc);
}

TEST(GridSearch, BestCellAttainsMaximumWithTieBreaks) {
  GridFixture fx;
  GridSearchResult r = grid_search_dropout(
      fx.pool, fx.d, fx.in_bits, {0.0f, 0.1f, 0.2f}, {2, 4},
      AttackKind::kRmia, 5);
  ASSERT_EQ(r.cells.size(), 6u);
  double best = -1.0;
  for (const GridCell& c : r.cells) best = std::max(best, c.auc);
  EXPECT_DOUBLE_EQ(r.best_auc, best);
  // First cell in p-major order attaining the maximum wins the tie.
  for (const GridCell& c : r.cells) {
    if (c.auc == best) {
      EXPECT_EQ(r.best.p, c.p);
      EXPECT_EQ(r.best.passes, c.passes);
      break;
    }
  }
}

TEST(GridSearch, DeterministicUnderSeed) {
  GridFixture fx;
  GridSearchResult a = grid_search_dropout(
      fx.pool, fx.d, fx.in_bits, {0.1f, 0.2f}, {2, 4}, AttackKind::kRmia, 5);
  GridSearchResult b = grid_search_dropout(
      fx.pool, fx.d, fx.in_bits, {0.1f, 0.2f}, {2, 4}, AttackKind::kRmia, 5);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (size_t i = 0; i < a.cells.size(); ++i) {
    ASSERT_EQ(a.cells[i].auc, b.cells[i].auc);
  }
  EXPECT_EQ(a.best.p, b.best.p);
  EXPECT_EQ(a.best.passes, b.best.passes);
}

TEST(GridSearch, ParallelCellsMatchSequential) {
  GridFixture fx;
  GridSearchResult seq = grid_search_dropout(
      fx.pool, fx.d, fx.in_bits, {0.1f, 0.2f}, {2, 4}, AttackKind::kRmia, 5,
      1);
  GridSearchResult par = grid_search_dropout(
      fx.pool, fx.d, fx.in_bits, {0.1f, 0.2f}, {2, 4}, AttackKind::kRmia, 5,
      4);
  for (size_t i = 0; i < seq.cells.size(); ++i) {
    ASSERT_EQ(seq.cells[i].auc, par.cells[i].auc);
  }
}

TEST(GridSearch, PreconditionsEnforced) {
  GridFixture fx;
  std::vector<const AnyNetwork*> single = {fx.pool[0]};
  EXPECT_THROW(grid_search_dropout(single, fx.d, {fx.in_bits[0]}, {0.1f}, {2},
                                   AttackKind::kRmia, 5),
               std::invalid_argument);
  EXPECT_THROW(grid_search_dropout(fx.pool, fx.d, fx.in_bits, {}, {2},
                                   AttackKind::kRmia, 5),
               std::invalid_argument);
  EXPECT_THROW(grid_search_dropout(fx.pool, fx.d, fx.in_bits, {0.1f}, {},
                                   AttackKind::kRmia, 5),
               std::invalid_argument);
}

}  // namespace
}  // namespace spikeaudit
