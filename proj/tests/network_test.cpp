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

#include "spikeaudit/network.hpp"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "spikeaudit/rng.hpp"

namespace spikeaudit {
namespace {

LinearLayer make_linear(int out_dim, int in_dim,
                        const std::vector<float>& w,
                        const std::vector<float>& b) {
  LinearLayer l;
  l.weight = Tensor({out_dim, in_dim}, w);
  l.bias = Tensor({out_dim}, b);
  return l;
}

// Plain-loop re-implementation of the time-unrolled dynamics, kept
// independent of the library's forward path. Dense layers only.
Tensor scripted_forward(const SpikingNetwork& net, const Tensor& batch) {
  const int rows = batch.shape[0];
  const size_t num_layers = net.stack.layers.size();
  std::vector<std::vector<float>> mem(num_layers - 1);
  std::vector<float> out;

  auto dense = [&](size_t l, const std::vector<float>& x, int in_dim) {
    const auto& lin = std::get<LinearLayer>(net.stack.layers[l]);
    const int out_dim = lin.weight.shape[0];
    std::vector<float> y(static_cast<size_t>(rows) * out_dim);
    for (int r = 0; r < rows; ++r) {
      for (int o = 0; o < out_dim; ++o) {
        float acc = lin.bias.data[static_cast<size_t>(o)];
        for (int k = 0; k < in_dim; ++k) {
          acc += x[static_cast<size_t>(r) * in_dim + k] *
                 lin.weight.data[static_cast<size_t>(o) * in_dim + k];
        }
        y[static_cast<size_t>(r) * out_dim + o] = acc;
      }
    }
    return y;
  };

  for (int t = 0; t < net.latency; ++t) {
    std::vector<float> o = batch.data;
    int width = batch.shape[1];
    for (size_t l = 0; l + 1 < num_layers; ++l) {
      std::vector<float> current = dense(l, o, width);
      width = std::get<LinearLayer>(net.stack.layers[l]).weight.shape[0];
      if (t == 0) mem[l].assign(current.size(), 0.0f);
      std::vector<float> spikes(current.size());
      for (size_t i = 0; i < current.size(); ++i) {
        float u = net.decay * mem[l][i] + current[i];
        if (u >= net.thresholds[l]) {
          spikes[i] = 1.0f;
          mem[l][i] = net.u_reset;
        } else {
          spikes[i] = 0.0f;
          mem[l][i] = u;
        }
      }
      o = spikes;
    }
    std::vector<float> current = dense(num_layers - 1, o, width);
    if (t == 0) {
      out = current;
    } else {
      for (size_t i = 0; i < out.size(); ++i) {
        out[i] = net.decay * out[i] + current[i];
      }
    }
  }
  const auto& last = std::get<LinearLayer>(net.stack.layers.back());
  return Tensor({rows, last.weight.shape[0]}, out);
}

SpikingNetwork random_net(int in_dim, int hidden, int classes, int latency,
                          float decay, float threshold, std::uint64_t seed) {
  Rng rng(seed);
  SpikingNetwork net;
  net.stack.input_shape = {in_dim};
  net.stack.layers.push_back(init_linear(hidden, in_dim, rng));
  net.stack.layers.push_back(init_linear(classes, hidden, rng));
  net.latency = latency;
  net.decay = decay;
  net.thresholds = {threshold};
  net.u_reset = 0.0f;
  net.validate();
  return net;
}

TEST(ConstantEncode, ReplicatesInputAcrossFrames) {
  Tensor x = Tensor::row({0.2f, 0.8f});
  EncodedInput enc = constant_encode(x, 3);
  ASSERT_EQ(enc.latency(), 3);
  for (int t = 0; t < 3; ++t) {
    ASSERT_EQ(enc.slice(t).data, x.data);
  }
}

TEST(ConstantEncode, SingleFrameIsIdentity) {
  Tensor x = Tensor({2, 2}, {0.1f, 0.2f, 0.3f, 0.4f});
  EncodedInput enc = constant_encode(x, 1);
  ASSERT_EQ(enc.latency(), 1);
  ASSERT_EQ(enc.slice(0).data, x.data);
  ASSERT_EQ(enc.slice(0).shape, x.shape);
}

TEST(ConstantEncode, RejectsNonPositiveFrameCount) {
  EXPECT_THROW(constant_encode(Tensor::row({1.0f}), 0), std::invalid_argument);
  EXPECT_THROW(constant_encode(Tensor::row({1.0f}), -2),
               std::invalid_argument);
}

TEST(ConstantEncode, FrameIndexIsBoundsChecked) {
  EncodedInput enc = constant_encode(Tensor::row({1.0f}), 2);
  EXPECT_THROW(enc.slice(2), std::out_of_range);
  EXPECT_THROW(enc.slice(-1), std::out_of_range);
}

TEST(LifStep, SubthresholdIntegration) {
  NeuronConfig cfg{1.0f, 1.0f, 0.0f, 1.0f};
  auto [u, s] = lif_step(Tensor::row({0.0f}), Tensor::row({0.5f}), cfg);
  EXPECT_FLOAT_EQ(u.data[0], 0.5f);
  EXPECT_FLOAT_EQ(s.data[0], 0.0f);
}

TEST(LifStep, FiringResetsHard) {
  NeuronConfig cfg{1.0f, 1.0f, 0.0f, 1.0f};
  auto [u, s] = lif_step(Tensor::row({0.7f}), Tensor::row({0.5f}), cfg);
  EXPECT_FLOAT_EQ(s.data[0], 1.0f);
  EXPECT_FLOAT_EQ(u.data[0], 0.0f);
}

TEST(LifStep, LeakDecaysPotential) {
  NeuronConfig cfg{0.5f, 1.0f, 0.0f, 1.0f};
  auto [u, s] = lif_step(Tensor::row({0.8f}), Tensor::row({0.0f}), cfg);
  EXPECT_FLOAT_EQ(u.data[0], 0.4f);
  EXPECT_FLOAT_EQ(s.data[0], 0.0f);
}

TEST(LifStep, ThresholdComparisonIsNonStrict) {
  NeuronConfig cfg{1.0f, 1.0f, 0.25f, 1.0f};
  auto [u, s] = lif_step(Tensor::row({0.0f}), Tensor::row({1.0f}), cfg);
  EXPECT_FLOAT_EQ(s.data[0], 1.0f);
  EXPECT_FLOAT_EQ(u.data[0], 0.25f);
}

TEST(LifStep, SpikesAreBinaryEverywhere) {
  Rng rng(404);
  NeuronConfig cfg{0.9f, 0.8f, 0.0f, 1.0f};
  Tensor u_prev = Tensor::zeros({4, 8});
  for (int step = 0; step < 20; ++step) {
    Tensor current = Tensor::zeros({4, 8});
    for (float& v : current.data) v = rng.normal_float(0.0f, 1.0f);
    auto [u, s] = lif_step(u_prev, current, cfg);
    for (float v : s.data) {
      ASSERT_TRUE(v == 0.0f || v == 1.0f);
    }
    u_prev = u;
  }
}

TEST(SpikingForward, ZeroWeightsGiveZeroLogits) {
  SpikingNetwork net;
  net.stack.input_shape = {3};
  net.stack.layers.push_back(
      make_linear(2, 3, {0, 0, 0, 0, 0, 0}, {0, 0}));
  net.latency = 2;
  net.thresholds = {};
  net.validate();
  Tensor logits = snn_logits(net, Tensor({1, 3}, {0.5f, -1.0f, 2.0f}));
  EXPECT_FLOAT_EQ(logits.data[0], 0.0f);
  EXPECT_FLOAT_EQ(logits.data[1], 0.0f);
}

TEST(SpikingForward, MatchesScriptedOracle) {
  for (int latency : {1, 2, 4}) {
    for (float decay : {1.0f, 0.5f}) {
      SpikingNetwork net =
          random_net(3, 5, 2, latency, decay, 0.6f, 90 + latency);
      Rng rng(17);
      Tensor batch = Tensor::zeros({4, 3});
      for (float& v : batch.data) v = rng.normal_float(0.0f, 1.0f);
      Tensor got = snn_logits(net, batch);
      Tensor want = scripted_forward(net, batch);
      ASSERT_EQ(got.shape, want.shape);
      for (size_t i = 0; i < got.data.size(); ++i) {
        ASSERT_NEAR(got.data[i], want.data[i], 1e-5f)
            << "latency " << latency << " decay " << decay << " cell " << i;
      }
    }
  }
}

TEST(SpikingForward, RepeatRunsAreBitIdentical) {
  SpikingNetwork net = random_net(4, 6, 3, 3, 0.9f, 0.7f, 2024);
  Rng rng(5);
  Tensor batch = Tensor::zeros({5, 4});
  for (float& v : batch.data) v = rng.normal_float(0.0f, 1.0f);
  Tensor a = snn_logits(net, batch);
  Tensor b = snn_logits(net, batch);
  ASSERT_EQ(a.data, b.data);
}

TEST(SpikingForward, SingleLayerAccumulationScalesWithFrames) {
  // One dense layer and no leak: each frame adds the same current, so two
  // frames produce exactly twice the one-frame output.
  SpikingNetwork net;
  net.stack.input_shape = {2};
  net.stack.layers.push_back(
      make_linear(2, 2, {0.3f, -0.2f, 0.1f, 0.4f}, {0.05f, -0.1f}));
  net.thresholds = {};
  net.decay = 1.0f;
  Tensor x = Tensor({1, 2}, {0.9f, -0.4f});

  net.latency = 1;
  Tensor one = snn_logits(net, x);
  net.latency = 2;
  Tensor two = snn_logits(net, x);
  for (size_t i = 0; i < one.data.size(); ++i) {
    ASSERT_FLOAT_EQ(two.data[i], 2.0f * one.data[i]);
  }
}

TEST(SpikingForward, SilentHiddenLayerLeavesOnlyBias) {
  // Thresholds far above any reachable potential: hidden spikes stay zero,
  // so the readout integrates its bias alone.
  SpikingNetwork net = random_net(3, 4, 2, 3, 1.0f, 1e6f, 11);
  auto& readout = std::get<LinearLayer>(net.stack.layers.back());
  readout.bias = Tensor({2}, {0.25f, -0.5f});
  Tensor logits = snn_logits(net, Tensor({1, 3}, {0.2f, 0.4f, 0.6f}));
  EXPECT_FLOAT_EQ(logits.data[0], 3.0f * 0.25f);
  EXPECT_FLOAT_EQ(logits.data[1], 3.0f * -0.5f);
}

TEST(SpikingForward, EncodedInputMustMatchNetworkLatency) {
  SpikingNetwork net = random_net(2, 3, 2, 2, 1.0f, 0.5f, 3);
  Tensor x = Tensor({1, 2}, {0.1f, 0.2f});
  EXPECT_THROW(snn_logits(net, constant_encode(x, 3)), std::invalid_argument);
  Tensor ok = snn_logits(net, constant_encode(x, 2));
  Tensor direct = snn_logits(net, x);
  ASSERT_EQ(ok.data, direct.data);
}

TEST(SpikingForward, TapedValuesMatchEagerBitForBit) {
  SpikingNetwork net = random_net(3, 5, 2, 3, 0.9f, 0.6f, 77);
  Rng rng(8);
  Tensor batch = Tensor::zeros({4, 3});
  for (float& v : batch.data) v = rng.normal_float(0.0f, 1.0f);

  Tensor eager = snn_logits(net, batch);
  GradTape tape;
  auto params = register_params(tape, net.stack);
  GradTape::NodeId out = snn_forward_on_tape(tape, net, params, batch, 1.0f);
  ASSERT_EQ(tape.value(out).data, eager.data);
}

TEST(AnnForward, TapedValuesMatchEagerBitForBit) {
  Rng rng(31);
  AnnNetwork net;
  net.stack.input_shape = {3};
  net.stack.layers.push_back(init_linear(5, 3, rng));
  net.stack.layers.push_back(init_linear(2, 5, rng));
  net.activation = Activation::kSigmoid;
  net.validate();

  Tensor batch = Tensor::zeros({3, 3});
  for (float& v : batch.data) v = rng.normal_float(0.0f, 1.0f);
  Tensor eager = ann_logits(net, batch);
  GradTape tape;
  auto params = register_params(tape, net.stack);
  GradTape::NodeId out = ann_forward_on_tape(tape, net, params, batch);
  ASSERT_EQ(tape.value(out).data, eager.data);
}

TEST(Confidence, SymmetricLogitsGiveHalf) {
  SpikingNetwork net;
  net.stack.input_shape = {3};
  net.stack.layers.push_back(make_linear(2, 3, std::vector<float>(6, 0.0f),
                                         {0.0f, 0.0f}));
  net.thresholds = {};
  net.validate();
  AnyNetwork any = net;
  EXPECT_DOUBLE_EQ(confidence(any, Tensor({1, 3}, {1.0f, 2.0f, 3.0f}), 0),
                   0.5);
  EXPECT_DOUBLE_EQ(confidence(any, Tensor({1, 3}, {1.0f, 2.0f, 3.0f}), 1),
                   0.5);
}

TEST(Confidence, ClosedFormSoftmaxValue) {
  Tensor logits({1, 2}, {std::log(2.0f), 0.0f});
  std::vector<double> conf = true_label_confidences(logits, {0});
  EXPECT_NEAR(conf[0], 2.0 / 3.0, 1e-6);
}

TEST(Confidence, SingleClassHeadIsCertain) {
  Tensor logits({1, 1}, {-3.5f});
  EXPECT_DOUBLE_EQ(true_label_confidences(logits, {0})[0], 1.0);
}

TEST(Confidence, LabelOutOfRangeThrows) {
  Tensor logits({1, 2}, {0.0f, 0.0f});
  EXPECT_THROW(true_label_confidences(logits, {2}), std::invalid_argument);
  EXPECT_THROW(true_label_confidences(logits, {-1}), std::invalid_argument);
}

TEST(Confidence, ExtremeLogitsStayFiniteAndNormalized) {
  Tensor logits({1, 2}, {1000.0f, 0.0f});
  std::vector<double> conf = true_label_confidences(logits, {0});
  EXPECT_NEAR(conf[0], 1.0, 1e-12);
  // The losing class may underflow to exactly zero but never to NaN.
  const double losing = true_label_confidences(logits, {1})[0];
  EXPECT_TRUE(std::isfinite(losing));
  EXPECT_GE(losing, 0.0);
  Tensor mild({1, 2}, {40.0f, 0.0f});
  EXPECT_GT(true_label_confidences(mild, {1})[0], 0.0);
}

TEST(NeuronConfigValidation, RejectsBadParameters) {
  EXPECT_THROW((NeuronConfig{0.0f, 1.0f, 0.0f, 1.0f}).validate(),
               std::invalid_argument);
  EXPECT_THROW((NeuronConfig{1.2f, 1.0f, 0.0f, 1.0f}).validate(),
               std::invalid_argument);
  EXPECT_THROW((NeuronConfig{1.0f, 0.0f, -1.0f, 1.0f}).validate(),
               std::invalid_argument);
  EXPECT_THROW((NeuronConfig{1.0f, 0.5f, 0.5f, 1.0f}).validate(),
               std::invalid_argument);
  EXPECT_THROW((NeuronConfig{1.0f, 1.0f, 0.0f, 0.0f}).validate(),
               std::invalid_argument);
  (NeuronConfig{1.0f, 1.0f, 0.0f, 1.0f}).validate();
}

TEST(NetworkValidation, ThresholdCountMustMatchHiddenLayers) {
  SpikingNetwork net = random_net(2, 3, 2, 1, 1.0f, 0.5f, 1);
  net.thresholds = {0.5f, 0.5f};
  EXPECT_THROW(net.validate(), std::invalid_argument);
  net.thresholds = {};
  EXPECT_THROW(net.validate(), std::invalid_argument);
}

TEST(NetworkValidation, LatencyMustBePositive) {
  SpikingNetwork net = random_net(2, 3, 2, 1, 1.0f, 0.5f, 1);
  net.latency = 0;
  EXPECT_THROW(net.validate(), std::invalid_argument);
}

TEST(Initialization, SameSeedSameWeights) {
  Rng a(99), b(99);
  LinearLayer la = init_linear(4, 3, a);
  LinearLayer lb = init_linear(4, 3, b);
  ASSERT_EQ(la.weight.data, lb.weight.data);
  for (float v : la.bias.data) ASSERT_EQ(v, 0.0f);
}

}  // namespace
}  // namespace spikeaudit
