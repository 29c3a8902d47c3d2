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
//
// Spiking and plain feed-forward classifiers over a shared layer stack.
//
// The spiking path runs leaky integrate-and-fire dynamics over a constant
// input encoding: each hidden layer keeps a membrane potential that decays,
// integrates the incoming current, fires a binary spike when the potential
// reaches its threshold, and hard-resets where it fired. The output layer
// integrates without firing; its potential after the last time step is the
// logit vector. The plain (non-spiking) path applies a smooth activation
// between layers and is used as a baseline and as a cross-family reference.
//
// Both the immediate (inference) forward pass and the taped (training)
// forward pass are generated from one skeleton, so the logits they produce
// are bit-identical for the same weights and inputs.

#ifndef SPIKEAUDIT_NETWORK_HPP_
#define SPIKEAUDIT_NETWORK_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spikeaudit/autograd.hpp"
#include "spikeaudit/rng.hpp"
#include "spikeaudit/tensor.hpp"

namespace spikeaudit {

struct LinearLayer {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
};

struct Conv2dLayer {
  Tensor kernel;  // [out_ch, in_ch, kh, kw]
  Tensor bias;    // [out_ch]
};

using Layer = std::variant<LinearLayer, Conv2dLayer>;

// Ordered layers plus the per-sample input shape (e.g. {16} for flat
// features, {1, 8, 8} for a one-channel image fed to a conv head).
struct LayerStack {
  std::vector<Layer> layers;
  std::vector<int> input_shape;
};

// Per-layer neuron parameters. decay = 1 integrates without leak; decay < 1
// leaks. The surrogate width only shapes the training-time gradient of the
// firing nonlinearity; inference ignores it.
struct NeuronConfig {
  float decay = 1.0f;
  float threshold = 1.0f;
  float reset = 0.0f;
  float surrogate_width = 1.0f;

  void validate() const {
    if (!(decay > 0.0f && decay <= 1.0f)) {
      throw std::invalid_argument("neuron: decay must be in (0,1]");
    }
    if (!(threshold > 0.0f)) {
      throw std::invalid_argument("neuron: threshold must be positive");
    }
    if (!(threshold > reset)) {
      throw std::invalid_argument("neuron: threshold must exceed reset value");
    }
    if (!(surrogate_width > 0.0f)) {
      throw std::invalid_argument("neuron: surrogate width must be positive");
    }
  }
};

struct SpikingNetwork {
  LayerStack stack;
  int latency = 1;                // time steps per forward pass
  float decay = 1.0f;             // shared leak factor
  std::vector<float> thresholds;  // one per hidden layer
  float u_reset = 0.0f;

  NeuronConfig neuron_at(size_t hidden_layer, float surrogate_width) const {
    return NeuronConfig{decay, thresholds.at(hidden_layer), u_reset,
                        surrogate_width};
  }

  void validate() const {
    if (stack.layers.empty()) {
      throw std::invalid_argument("network: needs at least one layer");
    }
    if (latency < 1) {
      throw std::invalid_argument("network: latency must be at least 1");
    }
    if (thresholds.size() + 1 != stack.layers.size()) {
      throw std::invalid_argument("network: one threshold per hidden layer");
    }
    if (!std::holds_alternative<LinearLayer>(stack.layers.back())) {
      throw std::invalid_argument("network: output layer must be linear");
    }
    for (size_t l = 0; l < thresholds.size(); ++l) {
      neuron_at(l, 1.0f).validate();
    }
  }
};

enum class Activation : std::uint8_t { kSigmoid = 0, kRelu = 1 };

struct AnnNetwork {
  LayerStack stack;
  Activation activation = Activation::kSigmoid;

  void validate() const {
    if (stack.layers.empty()) {
      throw std::invalid_argument("network: needs at least one layer");
    }
    if (!std::holds_alternative<LinearLayer>(stack.layers.back())) {
      throw std::invalid_argument("network: output layer must be linear");
    }
  }
};

using AnyNetwork = std::variant<SpikingNetwork, AnnNetwork>;

// Constant encoding: the same frame is presented at every time step, so the
// replicas are never materialized.
class EncodedInput {
 public:
  EncodedInput(Tensor base, int latency)
      : base_(std::move(base)), latency_(latency) {
    if (latency < 1) {
      throw std::invalid_argument("encode: latency must be at least 1");
    }
  }

  int latency() const { return latency_; }
  const Tensor& base() const { return base_; }

  const Tensor& slice(int t) const {
    if (t < 0 || t >= latency_) {
      throw std::out_of_range("encode: time index out of range");
    }
    return base_;
  }

 private:
  Tensor base_;
  int latency_;
};

inline EncodedInput constant_encode(const Tensor& x, int latency) {
  return EncodedInput(x, latency);
}

// One leak-integrate-fire-reset step. Returns the post-reset potential and
// the binary spike map. The comparison is non-strict: a potential exactly at
// threshold fires.
inline std::pair<Tensor, Tensor> lif_step(const Tensor& u_prev,
                                          const Tensor& input_current,
                                          const NeuronConfig& cfg) {
  ops::check_same_shape(u_prev, input_current, "lif_step");
  Tensor u = ops::add(ops::affine(u_prev, cfg.decay, 0.0f), input_current);
  Tensor spikes = ops::heaviside_ge(u, cfg.threshold);
  Tensor u_next = ops::add(ops::hadamard(u, ops::affine(spikes, -1.0f, 1.0f)),
                           ops::affine(spikes, cfg.reset, 0.0f));
  return {std::move(u_next), std::move(spikes)};
}

namespace detail {

// Immediate evaluation: handles are plain tensors.
struct EagerCtx {
  const LayerStack* stack;

  Tensor apply(size_t l, const Tensor& x) const {
    const Layer& layer = stack->layers[l];
    if (std::holds_alternative<LinearLayer>(layer)) {
      const auto& lin = std::get<LinearLayer>(layer);
      if (x.rank() != 2) {
        const int batch = x.shape[0];
        return ops::linear(
            x.reshaped({batch, static_cast<int>(x.numel()) / batch}),
            lin.weight, lin.bias);
      }
      return ops::linear(x, lin.weight, lin.bias);
    }
    const auto& conv = std::get<Conv2dLayer>(layer);
    if (x.rank() == 2 && l == 0) {
      std::vector<int> shape = {x.shape[0]};
      shape.insert(shape.end(), stack->input_shape.begin(),
                   stack->input_shape.end());
      return ops::conv2d(x.reshaped(shape), conv.kernel, conv.bias);
    }
    return ops::conv2d(x, conv.kernel, conv.bias);
  }

  Tensor add(const Tensor& a, const Tensor& b) const { return ops::add(a, b); }
  Tensor mul(const Tensor& a, const Tensor& b) const {
    return ops::hadamard(a, b);
  }
  Tensor affine(const Tensor& a, float scale, float shift) const {
    return ops::affine(a, scale, shift);
  }
  Tensor spike(const Tensor& u, float threshold, float) const {
    return ops::heaviside_ge(u, threshold);
  }
  Tensor activation(const Tensor& a, Activation act) const {
    return act == Activation::kSigmoid ? ops::sigmoid(a) : ops::relu(a);
  }
};

// Recorded evaluation: handles are tape node ids, layer parameters are
// pre-registered leaves so their gradients survive backward().
struct TapeCtx {
  GradTape* tape;
  const LayerStack* stack;
  const std::vector<std::array<GradTape::NodeId, 2>>* params;

  GradTape::NodeId apply(size_t l, GradTape::NodeId x) const {
    const Layer& layer = stack->layers[l];
    const GradTape::NodeId w = (*params)[l][0];
    const GradTape::NodeId b = (*params)[l][1];
    const Tensor& xv = tape->value(x);
    if (std::holds_alternative<LinearLayer>(layer)) {
      if (xv.rank() != 2) {
        const int batch = xv.shape[0];
        return tape->linear(
            tape->reshape(x, {batch, static_cast<int>(xv.numel()) / batch}), w,
            b);
      }
      return tape->linear(x, w, b);
    }
    if (xv.rank() == 2 && l == 0) {
      std::vector<int> shape = {xv.shape[0]};
      shape.insert(shape.end(), stack->input_shape.begin(),
                   stack->input_shape.end());
      return tape->conv2d(tape->reshape(x, shape), w, b);
    }
    return tape->conv2d(x, w, b);
  }

  GradTape::NodeId add(GradTape::NodeId a, GradTape::NodeId b) const {
    return tape->add(a, b);
  }
  GradTape::NodeId mul(GradTape::NodeId a, GradTape::NodeId b) const {
    return tape->mul(a, b);
  }
  GradTape::NodeId affine(GradTape::NodeId a, float scale, float shift) const {
    return tape->affine(a, scale, shift);
  }
  GradTape::NodeId spike(GradTape::NodeId u, float threshold,
                         float width) const {
    return tape->spike(u, threshold, width);
  }
  GradTape::NodeId activation(GradTape::NodeId a, Activation act) const {
    return act == Activation::kSigmoid ? tape->sigmoid(a) : tape->relu(a);
  }
};

// Shared time-unrolled dynamics. Hidden layers: decay, integrate, fire,
// hard-reset where fired. Output layer: decay and integrate only; its state
// after the last step is the result.
template <typename Ctx, typename H>
H snn_forward_skeleton(const Ctx& ctx, const SpikingNetwork& net, H x,
                       float surrogate_width) {
  const size_t num_layers = net.stack.layers.size();
  std::vector<H> membrane(num_layers > 0 ? num_layers - 1 : 0);
  H out{};
  for (int t = 0; t < net.latency; ++t) {
    H o = x;
    for (size_t l = 0; l + 1 < num_layers; ++l) {
      H current = ctx.apply(l, o);
      H u = (t == 0) ? current
                     : ctx.add(ctx.affine(membrane[l], net.decay, 0.0f),
                               current);
      H s = ctx.spike(u, net.thresholds[l], surrogate_width);
      membrane[l] = ctx.add(ctx.mul(u, ctx.affine(s, -1.0f, 1.0f)),
                            ctx.affine(s, net.u_reset, 0.0f));
      o = s;
    }
    H current = ctx.apply(num_layers - 1, o);
    out = (t == 0) ? current
                   : ctx.add(ctx.affine(out, net.decay, 0.0f), current);
  }
  return out;
}

template <typename Ctx, typename H>
H ann_forward_skeleton(const Ctx& ctx, const AnnNetwork& net, H x) {
  H o = x;
  const size_t num_layers = net.stack.layers.size();
  for (size_t l = 0; l < num_layers; ++l) {
    o = ctx.apply(l, o);
    if (l + 1 < num_layers) o = ctx.activation(o, net.activation);
  }
  return o;
}

}  // namespace detail

// Batched inference. `batch` is [B, features] or [B, C, H, W].
inline Tensor snn_logits(const SpikingNetwork& net, const Tensor& batch) {
  detail::EagerCtx ctx{&net.stack};
  return detail::snn_forward_skeleton(ctx, net, batch, 1.0f);
}

// Encoded-input entry point; rejects a frame count that does not match the
// network's latency.
inline Tensor snn_logits(const SpikingNetwork& net, const EncodedInput& enc) {
  if (enc.latency() != net.latency) {
    throw std::invalid_argument("forward: encoded latency " +
                                std::to_string(enc.latency()) +
                                " does not match network latency " +
                                std::to_string(net.latency));
  }
  return snn_logits(net, enc.slice(0));
}

inline Tensor ann_logits(const AnnNetwork& net, const Tensor& batch) {
  detail::EagerCtx ctx{&net.stack};
  return detail::ann_forward_skeleton(ctx, net, batch);
}

inline Tensor logits_of(const AnyNetwork& net, const Tensor& batch) {
  if (std::holds_alternative<SpikingNetwork>(net)) {
    return snn_logits(std::get<SpikingNetwork>(net), batch);
  }
  return ann_logits(std::get<AnnNetwork>(net), batch);
}

inline const LayerStack& stack_of(const AnyNetwork& net) {
  if (std::holds_alternative<SpikingNetwork>(net)) {
    return std::get<SpikingNetwork>(net).stack;
  }
  return std::get<AnnNetwork>(net).stack;
}

inline int class_count(const LayerStack& stack) {
  const auto& out = std::get<LinearLayer>(stack.layers.back());
  return out.weight.shape[0];
}

inline int class_count(const AnyNetwork& net) {
  return class_count(stack_of(net));
}

// Registers every layer's weight and bias as tape leaves, in layer order.
inline std::vector<std::array<GradTape::NodeId, 2>> register_params(
    GradTape& tape, const LayerStack& stack) {
  std::vector<std::array<GradTape::NodeId, 2>> ids;
  ids.reserve(stack.layers.size());
  for (const Layer& layer : stack.layers) {
    if (std::holds_alternative<LinearLayer>(layer)) {
      const auto& lin = std::get<LinearLayer>(layer);
      ids.push_back({tape.leaf(lin.weight), tape.leaf(lin.bias)});
    } else {
      const auto& conv = std::get<Conv2dLayer>(layer);
      ids.push_back({tape.leaf(conv.kernel), tape.leaf(conv.bias)});
    }
  }
  return ids;
}

inline GradTape::NodeId snn_forward_on_tape(
    GradTape& tape, const SpikingNetwork& net,
    const std::vector<std::array<GradTape::NodeId, 2>>& params,
    const Tensor& batch, float surrogate_width) {
  detail::TapeCtx ctx{&tape, &net.stack, &params};
  return detail::snn_forward_skeleton(ctx, net, tape.leaf(batch),
                                      surrogate_width);
}

inline GradTape::NodeId ann_forward_on_tape(
    GradTape& tape, const AnnNetwork& net,
    const std::vector<std::array<GradTape::NodeId, 2>>& params,
    const Tensor& batch) {
  detail::TapeCtx ctx{&tape, &net.stack, &params};
  return detail::ann_forward_skeleton(ctx, net, tape.leaf(batch));
}

// Numerically stable softmax of one logit row, carried out in double so the
// resulting probabilities are smooth even when float logits tie.
inline std::vector<double> softmax_double(const float* logits, int n) {
  double mx = logits[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, static_cast<double>(logits[i]));
  std::vector<double> p(static_cast<size_t>(n));
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    p[static_cast<size_t>(i)] = std::exp(static_cast<double>(logits[i]) - mx);
    z += p[static_cast<size_t>(i)];
  }
  for (double& v : p) v /= z;
  return p;
}

// True-label confidences for every row of a logit matrix.
inline std::vector<double> true_label_confidences(
    const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("confidence: logits must be [batch, classes]");
  }
  const int batch = logits.shape[0], classes = logits.shape[1];
  if (static_cast<int>(labels.size()) != batch) {
    throw std::invalid_argument("confidence: label count mismatch");
  }
  std::vector<double> out(static_cast<size_t>(batch));
  for (int i = 0; i < batch; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= classes) {
      throw std::invalid_argument("confidence: label out of range");
    }
    std::vector<double> p =
        softmax_double(logits.data.data() + static_cast<size_t>(i) * classes,
                       classes);
    out[static_cast<size_t>(i)] = p[static_cast<size_t>(y)];
  }
  return out;
}

// Softmax score of the true label for a single sample; this scalar is the
// model's per-sample signal everywhere downstream.
inline double confidence(const AnyNetwork& net, const Tensor& x, int y_true) {
  Tensor batch = x.rank() >= 2 && x.shape[0] == 1
                     ? x
                     : x.reshaped({1, static_cast<int>(x.numel())});
  Tensor logits = logits_of(net, batch);
  return true_label_confidences(logits, {y_true})[0];
}

inline std::vector<int> predict_labels(const Tensor& logits) {
  return ops::argmax_rows(logits);
}

// Weight initialization: zero-mean normals scaled by sqrt(2 / fan_in), zero
// biases.
inline LinearLayer init_linear(int out_dim, int in_dim, Rng& rng) {
  LinearLayer l;
  l.weight = Tensor::zeros({out_dim, in_dim});
  const float stddev = std::sqrt(2.0f / static_cast<float>(in_dim));
  for (float& v : l.weight.data) v = rng.normal_float(0.0f, stddev);
  l.bias = Tensor::zeros({out_dim});
  return l;
}

inline Conv2dLayer init_conv(int out_ch, int in_ch, int kh, int kw, Rng& rng) {
  Conv2dLayer c;
  c.kernel = Tensor::zeros({out_ch, in_ch, kh, kw});
  const float stddev =
      std::sqrt(2.0f / static_cast<float>(in_ch * kh * kw));
  for (float& v : c.kernel.data) v = rng.normal_float(0.0f, stddev);
  c.bias = Tensor::zeros({out_ch});
  return c;
}

}  // namespace spikeaudit

#endif  // SPIKEAUDIT_NETWORK_HPP_
