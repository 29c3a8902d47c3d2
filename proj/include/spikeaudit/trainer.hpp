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
// Mini-batch training for both network families. Spiking networks train
// directly: the forward pass runs the full time-unrolled dynamics and the
// firing step backpropagates through a triangular surrogate. The loss is
// softmax cross-entropy on the output layer's final membrane potential.
// All stochasticity (shuffling order) derives from the config seed, so a
// repeated run produces a bit-identical model.

#ifndef SPIKEAUDIT_TRAINER_HPP_
#define SPIKEAUDIT_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spikeaudit/autograd.hpp"
#include "spikeaudit/dataset.hpp"
#include "spikeaudit/network.hpp"
#include "spikeaudit/rng.hpp"
#include "spikeaudit/tensor.hpp"

namespace spikeaudit {

enum class Optimizer : std::uint8_t { kSgdMomentum = 0, kAdam = 1 };

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  float learning_rate = 0.1f;
  float momentum = 0.9f;
  float weight_decay = 0.0f;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kSgdMomentum;
  float surrogate_width = 1.0f;

  void validate() const {
    if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
    if (batch_size < 1) {
      throw std::invalid_argument("train: batch size must be positive");
    }
    // Zero is allowed so a frozen-weights evaluation pass stays expressible.
    if (learning_rate < 0.0f) {
      throw std::invalid_argument("train: learning rate must be >= 0");
    }
    if (momentum < 0.0f || momentum >= 1.0f) {
      throw std::invalid_argument("train: momentum must be in [0,1)");
    }
    if (weight_decay < 0.0f) {
      throw std::invalid_argument("train: weight decay must be >= 0");
    }
    if (surrogate_width <= 0.0f) {
      throw std::invalid_argument("train: surrogate width must be positive");
    }
  }
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
};

struct TrainedModel {
  AnyNetwork network;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<double> loss_trace;     // one mean loss per epoch
  std::vector<EpochStats> epoch_log;  // same length as loss_trace
};

class TrainDivergenceError : public std::runtime_error {
 public:
  TrainDivergenceError(int epoch_idx, const std::string& what)
      : std::runtime_error("train: diverged at epoch " +
                           std::to_string(epoch_idx) + ": " + what),
        epoch(epoch_idx) {}
  int epoch;
};

namespace detail {

inline std::vector<Tensor*> param_tensors(LayerStack& stack) {
  std::vector<Tensor*> out;
  for (Layer& layer : stack.layers) {
    if (std::holds_alternative<LinearLayer>(layer)) {
      auto& lin = std::get<LinearLayer>(layer);
      out.push_back(&lin.weight);
      out.push_back(&lin.bias);
    } else {
      auto& conv = std::get<Conv2dLayer>(layer);
      out.push_back(&conv.kernel);
      out.push_back(&conv.bias);
    }
  }
  return out;
}

// Momentum SGD and Adam share the coupled weight-decay term g + wd*w.
class OptimizerState {
 public:
  OptimizerState(const std::vector<Tensor*>& params, const TrainConfig& cfg)
      : cfg_(cfg) {
    for (const Tensor* p : params) {
      slot1_.push_back(Tensor::zeros(p->shape));
      if (cfg.optimizer == Optimizer::kAdam) {
        slot2_.push_back(Tensor::zeros(p->shape));
      }
    }
  }

  void step(const std::vector<Tensor*>& params,
            const std::vector<const Tensor*>& grads) {
    ++t_;
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& w = *params[i];
      const Tensor& g = *grads[i];
      if (cfg_.optimizer == Optimizer::kSgdMomentum) {
        Tensor& v = slot1_[i];
        for (size_t k = 0; k < w.data.size(); ++k) {
          const float gk = g.data[k] + cfg_.weight_decay * w.data[k];
          v.data[k] = cfg_.momentum * v.data[k] + gk;
          w.data[k] -= cfg_.learning_rate * v.data[k];
        }
      } else {
        constexpr float kBeta1 = 0.9f, kBeta2 = 0.999f, kEps = 1e-8f;
        Tensor& m = slot1_[i];
        Tensor& v = slot2_[i];
        const float c1 = 1.0f - std::pow(kBeta1, static_cast<float>(t_));
        const float c2 = 1.0f - std::pow(kBeta2, static_cast<float>(t_));
        for (size_t k = 0; k < w.data.size(); ++k) {
          const float gk = g.data[k] + cfg_.weight_decay * w.data[k];
          m.data[k] = kBeta1 * m.data[k] + (1.0f - kBeta1) * gk;
          v.data[k] = kBeta2 * v.data[k] + (1.0f - kBeta2) * gk * gk;
          const float mhat = m.data[k] / c1;
          const float vhat = v.data[k] / c2;
          w.data[k] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + kEps);
        }
      }
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<Tensor> slot1_;  // velocity, or first moment
  std::vector<Tensor> slot2_;  // second moment (Adam only)
  int t_ = 0;
};

inline Tensor gather_rows(const Dataset& d, const std::vector<int>& order,
                          size_t begin, size_t end,
                          std::vector<int>* labels_out) {
  const int dim = d.feature_dim();
  Tensor batch = Tensor::zeros({static_cast<int>(end - begin), dim});
  labels_out->clear();
  for (size_t r = begin; r < end; ++r) {
    const int i = order[r];
    std::copy(
        d.features.data.begin() + static_cast<long>(i) * dim,
        d.features.data.begin() + (static_cast<long>(i) + 1) * dim,
        batch.data.begin() + static_cast<long>(r - begin) * dim);
    labels_out->push_back(d.labels[static_cast<size_t>(i)]);
  }
  return batch;
}

}  // namespace detail

// Fraction of samples whose argmax logit matches the label. Evaluated in
// chunks to bound scratch memory.
inline double accuracy(const AnyNetwork& net, const Dataset& d,
                       int chunk = 256) {
  if (d.size() == 0) return 0.0;
  std::vector<int> order(static_cast<size_t>(d.size()));
  std::iota(order.begin(), order.end(), 0);
  int correct = 0;
  std::vector<int> labels;
  for (size_t begin = 0; begin < order.size();
       begin += static_cast<size_t>(chunk)) {
    const size_t end = std::min(order.size(), begin + static_cast<size_t>(chunk));
    Tensor batch = detail::gather_rows(d, order, begin, end, &labels);
    std::vector<int> pred = predict_labels(logits_of(net, batch));
    for (size_t k = 0; k < pred.size(); ++k) {
      if (pred[k] == labels[k]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

// Trains a copy of `net` on `train_set`, reporting accuracy on both halves
// after every epoch. Throws TrainDivergenceError when the epoch loss stops
// being finite.
inline TrainedModel train(const AnyNetwork& net, const Dataset& train_set,
                          const Dataset& test_set, const TrainConfig& cfg) {
  cfg.validate();
  for (int y : train_set.labels) {
    if (y < 0 || y >= class_count(net)) {
      throw std::invalid_argument("train: label outside network class range");
    }
  }

  TrainedModel out;
  out.network = net;
  LayerStack& stack =
      std::holds_alternative<SpikingNetwork>(out.network)
          ? std::get<SpikingNetwork>(out.network).stack
          : std::get<AnnNetwork>(out.network).stack;
  std::vector<Tensor*> params = detail::param_tensors(stack);
  detail::OptimizerState opt(params, cfg);

  Rng shuffle_rng(derive_seed(cfg.seed, SeedStream::kBatchShuffle));
  std::vector<int> order(static_cast<size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), 0);

  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (size_t begin = 0; begin < order.size();
         begin += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
      Tensor batch =
          detail::gather_rows(train_set, order, begin, end, &batch_labels);

      GradTape tape;
      auto param_ids = register_params(tape, stack);
      GradTape::NodeId logits;
      if (std::holds_alternative<SpikingNetwork>(out.network)) {
        logits = snn_forward_on_tape(tape,
                                     std::get<SpikingNetwork>(out.network),
                                     param_ids, batch, cfg.surrogate_width);
      } else {
        logits = ann_forward_on_tape(tape, std::get<AnnNetwork>(out.network),
                                     param_ids, batch);
      }
      GradTape::NodeId loss = tape.softmax_cross_entropy(logits, batch_labels);
      const float batch_loss = tape.value(loss).data[0];
      if (!std::isfinite(batch_loss)) {
        throw TrainDivergenceError(epoch, "batch loss not finite");
      }
      loss_sum += static_cast<double>(batch_loss) *
                  static_cast<double>(end - begin);
      tape.backward(loss);

      std::vector<const Tensor*> grads;
      grads.reserve(params.size());
      for (const auto& ids : param_ids) {
        grads.push_back(&tape.grad(ids[0]));
        grads.push_back(&tape.grad(ids[1]));
      }
      opt.step(params, grads);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = loss_sum / static_cast<double>(train_set.size());
    stats.train_acc = accuracy(out.network, train_set);
    stats.test_acc = accuracy(out.network, test_set);
    out.loss_trace.push_back(stats.loss);
    out.epoch_log.push_back(stats);
  }

  out.train_accuracy = accuracy(out.network, train_set);
  out.test_accuracy = accuracy(out.network, test_set);
  return out;
}

// Warm-starts a longer-latency network from one trained at a shorter
// latency: weights are copied, the time horizon is extended, and training
// continues under `cfg`. Zero epochs keeps the weights untouched and only
// re-evaluates at the new latency.
inline TrainedModel sequential_latency_train(const TrainedModel& base,
                                             int target_latency,
                                             const Dataset& train_set,
                                             const Dataset& test_set,
                                             const TrainConfig& cfg) {
  if (!std::holds_alternative<SpikingNetwork>(base.network)) {
    throw std::invalid_argument("latency train: base must be spiking");
  }
  SpikingNetwork net = std::get<SpikingNetwork>(base.network);
  if (target_latency <= net.latency) {
    throw std::invalid_argument("latency train: target latency must exceed " +
                                std::to_string(net.latency));
  }
  net.latency = target_latency;
  return train(net, train_set, test_set, cfg);
}

// The audit-target variant of a config: extended training with the
// regularizer removed, so the model memorizes its (typically small) train
// half and opens the generalization gap the audit measures.
inline TrainConfig overfit_regime(TrainConfig cfg) {
  cfg.epochs *= 3;
  cfg.weight_decay = 0.0f;
  return cfg;
}

// JSON-lines log: one object per epoch with loss and both accuracies.
inline void write_training_log(std::ostream& out, const TrainedModel& model) {
  char buf[256];
  for (const EpochStats& s : model.epoch_log) {
    std::snprintf(buf, sizeof(buf),
                  "{\"epoch\":%d,\"loss\":%.17g,\"train_acc\":%.17g,"
                  "\"test_acc\":%.17g}\n",
                  s.epoch, s.loss, s.train_acc, s.test_acc);
    out << buf;
  }
}

inline void write_training_log(const std::string& path,
                               const TrainedModel& model) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("train: cannot open log " + path);
  write_training_log(f, model);
}

}  // namespace spikeaudit

#endif  // SPIKEAUDIT_TRAINER_HPP_
