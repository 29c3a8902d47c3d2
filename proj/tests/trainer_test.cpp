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

#include "spikeaudit/trainer.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "json.hpp"
#include "spikeaudit/checkpoint.hpp"

namespace spikeaudit {
namespace {

SpikingNetwork fresh_snn(int in_dim, int hidden, int classes, int latency,
                         std::uint64_t seed) {
  Rng rng(seed);
  SpikingNetwork net;
  net.stack.input_shape = {in_dim};
  net.stack.layers.push_back(init_linear(hidden, in_dim, rng));
  net.stack.layers.push_back(init_linear(classes, hidden, rng));
  net.latency = latency;
  net.decay = 1.0f;
  net.thresholds = {0.5f};
  net.validate();
  return net;
}

AnnNetwork fresh_ann(int in_dim, int hidden, int classes, std::uint64_t seed) {
  Rng rng(seed);
  AnnNetwork net;
  net.stack.input_shape = {in_dim};
  net.stack.layers.push_back(init_linear(hidden, in_dim, rng));
  net.stack.layers.push_back(init_linear(classes, hidden, rng));
  net.activation = Activation::kSigmoid;
  net.validate();
  return net;
}

struct BlobSplit {
  Dataset train;
  Dataset test;
};

BlobSplit blob_split(int n_per_class, std::uint64_t seed) {
  Dataset d = make_blobs(n_per_class, 2, 2, 4.0f, seed);
  SplitPlan plan = plan_splits(d, 1, seed);
  return {d.subset(plan.target.train), d.subset(plan.target.test)};
}

TEST(Surrogate, PeakValueIsInverseWidth) {
  EXPECT_FLOAT_EQ(triangular_surrogate(1.0f, 1.0f, 1.0f), 1.0f);
  EXPECT_FLOAT_EQ(triangular_surrogate(0.3f, 0.3f, 0.5f), 2.0f);
  EXPECT_FLOAT_EQ(triangular_surrogate(-2.0f, -2.0f, 2.0f), 0.5f);
}

TEST(Surrogate, SupportWidthIsTwiceA) {
  const float theta = 1.0f;
  for (float a : {0.5f, 1.0f, 2.0f}) {
    EXPECT_GT(triangular_surrogate(theta - a + 1e-3f, theta, a), 0.0f);
    EXPECT_GT(triangular_surrogate(theta + a - 1e-3f, theta, a), 0.0f);
    EXPECT_EQ(triangular_surrogate(theta - a, theta, a), 0.0f);
    EXPECT_EQ(triangular_surrogate(theta + a, theta, a), 0.0f);
    EXPECT_EQ(triangular_surrogate(theta + 10.0f * a, theta, a), 0.0f);
  }
}

TEST(Surrogate, IntegratesToOne) {
  const float theta = 0.7f;
  for (float a : {0.5f, 1.0f, 2.0f}) {
    const int steps = 4000;
    const double lo = theta - 2.0 * a, hi = theta + 2.0 * a;
    const double h = (hi - lo) / steps;
    double integral = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double u = lo + h * i;
      const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
      integral +=
          w * triangular_surrogate(static_cast<float>(u), theta, a) * h;
    }
    EXPECT_NEAR(integral, 1.0, 1e-3) << "width " << a;
  }
}

TEST(Train, SeparableBlobsReachHighTrainAccuracy) {
  BlobSplit s = blob_split(40, 15);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.1f;
  cfg.seed = 15;
  TrainedModel m = train(fresh_snn(2, 8, 2, 1, 15), s.train, s.test, cfg);
  EXPECT_GE(m.train_accuracy, 0.95);
  ASSERT_EQ(static_cast<int>(m.loss_trace.size()), cfg.epochs);
  ASSERT_EQ(m.epoch_log.size(), m.loss_trace.size());
  EXPECT_GE(m.test_accuracy, 0.0);
  EXPECT_LE(m.test_accuracy, 1.0);
}

TEST(Train, LossDropsAcrossEpochWindows) {
  BlobSplit s = blob_split(40, 23);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.1f;
  cfg.seed = 23;
  TrainedModel m = train(fresh_snn(2, 8, 2, 1, 23), s.train, s.test, cfg);
  auto window_mean = [&](int start) {
    double sum = 0.0;
    for (int e = start; e < start + 10; ++e) {
      sum += m.loss_trace[static_cast<size_t>(e)];
    }
    return sum / 10.0;
  };
  const double w0 = window_mean(0), w1 = window_mean(10), w2 = window_mean(20);
  EXPECT_LE(w1, w0 + 1e-6);
  EXPECT_LE(w2, w1 + 1e-6);
}

TEST(Train, ZeroLearningRateLeavesWeightsUntouched) {
  BlobSplit s = blob_split(20, 3);
  SpikingNetwork net = fresh_snn(2, 6, 2, 1, 3);
  AnyNetwork before = net;
  const double init_acc = accuracy(before, s.train);

  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.0f;
  cfg.seed = 3;
  TrainedModel m = train(before, s.train, s.test, cfg);
  EXPECT_EQ(serialize_checkpoint(m.network), serialize_checkpoint(before));
  EXPECT_DOUBLE_EQ(m.train_accuracy, init_acc);
}

TEST(Train, SameSeedGivesBitIdenticalCheckpoints) {
  BlobSplit s = blob_split(20, 8);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.05f;
  cfg.seed = 77;
  TrainedModel a = train(fresh_snn(2, 6, 2, 2, 8), s.train, s.test, cfg);
  TrainedModel b = train(fresh_snn(2, 6, 2, 2, 8), s.train, s.test, cfg);
  EXPECT_EQ(serialize_checkpoint(a.network), serialize_checkpoint(b.network));
  EXPECT_EQ(a.loss_trace, b.loss_trace);
}

TEST(Train, NonFiniteLossReportsOffendingEpoch) {
  BlobSplit s = blob_split(20, 5);
  SpikingNetwork net = fresh_snn(2, 6, 2, 1, 5);
  // A poisoned hidden weight would be masked by the spike threshold (NaN
  // comparisons never fire), so corrupt the readout, which feeds the loss.
  std::get<LinearLayer>(net.stack.layers.back()).weight.data[0] =
      std::nanf("");
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 5;
  try {
    train(net, s.train, s.test, cfg);
    FAIL() << "expected divergence";
  } catch (const TrainDivergenceError& e) {
    EXPECT_EQ(e.epoch, 0);
  }
}

TEST(Train, AdamOptimizerLearnsBlobs) {
  BlobSplit s = blob_split(40, 31);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01f;
  cfg.optimizer = Optimizer::kAdam;
  cfg.seed = 31;
  TrainedModel m = train(fresh_snn(2, 8, 2, 1, 31), s.train, s.test, cfg);
  EXPECT_GE(m.train_accuracy, 0.9);
}

TEST(Train, PlainNetworkLearnsBlobs) {
  BlobSplit s = blob_split(40, 41);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.5f;
  cfg.seed = 41;
  TrainedModel m = train(fresh_ann(2, 8, 2, 41), s.train, s.test, cfg);
  EXPECT_GE(m.train_accuracy, 0.95);
}

TEST(SequentialLatency, ZeroEpochCopyKeepsWeights) {
  BlobSplit s = blob_split(20, 51);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.1f;
  cfg.seed = 51;
  TrainedModel base = train(fresh_snn(2, 6, 2, 1, 51), s.train, s.test, cfg);

  TrainConfig none = cfg;
  none.epochs = 0;
  TrainedModel lifted =
      sequential_latency_train(base, 2, s.train, s.test, none);
  const auto& net = std::get<SpikingNetwork>(lifted.network);
  EXPECT_EQ(net.latency, 2);
  const auto& base_net = std::get<SpikingNetwork>(base.network);
  for (size_t l = 0; l < net.stack.layers.size(); ++l) {
    ASSERT_EQ(std::get<LinearLayer>(net.stack.layers[l]).weight.data,
              std::get<LinearLayer>(base_net.stack.layers[l]).weight.data);
  }
  // Accuracy is re-evaluated at the longer latency.
  EXPECT_DOUBLE_EQ(lifted.train_accuracy, accuracy(lifted.network, s.train));
}

TEST(SequentialLatency, ChainExtendsWithoutError) {
  BlobSplit s = blob_split(20, 61);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.1f;
  cfg.seed = 61;
  TrainedModel t1 = train(fresh_snn(2, 6, 2, 1, 61), s.train, s.test, cfg);
  TrainedModel t2 = sequential_latency_train(t1, 2, s.train, s.test, cfg);
  TrainedModel t4 = sequential_latency_train(t2, 4, s.train, s.test, cfg);
  EXPECT_EQ(std::get<SpikingNetwork>(t4.network).latency, 4);
  EXPECT_EQ(static_cast<int>(t4.loss_trace.size()), cfg.epochs);
}

TEST(SequentialLatency, RequiresStrictlyLargerLatency) {
  BlobSplit s = blob_split(20, 71);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.seed = 71;
  TrainedModel base = train(fresh_snn(2, 6, 2, 2, 71), s.train, s.test, cfg);
  EXPECT_THROW(sequential_latency_train(base, 2, s.train, s.test, cfg),
               std::invalid_argument);
  EXPECT_THROW(sequential_latency_train(base, 1, s.train, s.test, cfg),
               std::invalid_argument);

  TrainedModel ann = train(fresh_ann(2, 6, 2, 71), s.train, s.test, cfg);
  EXPECT_THROW(sequential_latency_train(ann, 2, s.train, s.test, cfg),
               std::invalid_argument);
}

TEST(OverfitRegime, ExtendsEpochsAndDropsDecay) {
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.weight_decay = 0.01f;
  cfg.learning_rate = 0.05f;
  TrainConfig tuned = overfit_regime(cfg);
  EXPECT_EQ(tuned.epochs, 30);
  EXPECT_EQ(tuned.weight_decay, 0.0f);
  EXPECT_EQ(tuned.learning_rate, cfg.learning_rate);
  EXPECT_EQ(tuned.batch_size, cfg.batch_size);
}

TEST(TrainingLog, OneJsonLinePerEpoch) {
  BlobSplit s = blob_split(20, 81);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 81;
  TrainedModel m = train(fresh_snn(2, 6, 2, 1, 81), s.train, s.test, cfg);
  std::ostringstream out;
  write_training_log(out, m);
  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line);
    EXPECT_EQ(row.at("epoch").get<int>(), lines);
    EXPECT_TRUE(row.contains("loss"));
    EXPECT_TRUE(row.contains("train_acc"));
    EXPECT_TRUE(row.contains("test_acc"));
    ++lines;
  }
  EXPECT_EQ(lines, cfg.epochs);
}

TEST(TrainConfigValidation, RejectsBadSettings) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.learning_rate = -0.1f;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.momentum = 1.0f;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.surrogate_width = 0.0f;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.validate();
}

}  // namespace
}  // namespace spikeaudit
