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
// The online audit game. From one split plan this trains the target model
// plus 2n reference models (each sample sits in the train half of exactly n
// of them), evaluates every model's true-label confidence on every sample,
// and labels ground-truth membership by the target's train half. Membership
// prevalence is exactly one half because the whole pool is audited instead
// of sampling coin-toss challenges.

#ifndef SPIKEAUDIT_GAME_HPP_
#define SPIKEAUDIT_GAME_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spikeaudit/dataset.hpp"
#include "spikeaudit/dropout.hpp"
#include "spikeaudit/network.hpp"
#include "spikeaudit/parallel.hpp"
#include "spikeaudit/trainer.hpp"

namespace spikeaudit {

enum class ModelKind : std::uint8_t { kSpiking = 0, kPlain = 1 };

inline const char* model_kind_name(ModelKind kind) {
  return kind == ModelKind::kSpiking ? "snn" : "ann";
}

// Architecture recipe shared by the target and the reference pool. An
// optional conv head in front of the linear stack covers image inputs.
struct ModelSpec {
  ModelKind kind = ModelKind::kSpiking;
  std::vector<int> input_shape = {2};  // {dim} or {channels, h, w}
  std::vector<int> hidden_widths = {16};
  int classes = 2;
  int latency = 1;
  float decay = 1.0f;
  float threshold = 1.0f;
  float u_reset = 0.0f;
  Activation activation = Activation::kSigmoid;
  int conv_channels = 0;  // 0 disables the conv head
  int conv_kernel = 3;

  int flat_input_dim() const {
    int d = 1;
    for (int v : input_shape) d *= v;
    return d;
  }
};

inline AnyNetwork build_network(const ModelSpec& spec,
                                std::uint64_t init_seed) {
  if (spec.classes < 1) {
    throw std::invalid_argument("build: needs at least one class");
  }
  Rng rng(init_seed);
  LayerStack stack;
  stack.input_shape = spec.input_shape;

  int flat_dim = spec.flat_input_dim();
  if (spec.conv_channels > 0) {
    if (spec.input_shape.size() != 3) {
      throw std::invalid_argument("build: conv head needs {c,h,w} input");
    }
    const int c = spec.input_shape[0], h = spec.input_shape[1],
              w = spec.input_shape[2];
    const int k = spec.conv_kernel;
    if (h < k || w < k) {
      throw std::invalid_argument("build: conv kernel larger than input");
    }
    stack.layers.emplace_back(init_conv(spec.conv_channels, c, k, k, rng));
    flat_dim = spec.conv_channels * (h - k + 1) * (w - k + 1);
  }
  for (int width : spec.hidden_widths) {
    if (width < 1) throw std::invalid_argument("build: bad hidden width");
    stack.layers.emplace_back(init_linear(width, flat_dim, rng));
    flat_dim = width;
  }
  stack.layers.emplace_back(init_linear(spec.classes, flat_dim, rng));

  if (spec.kind == ModelKind::kPlain) {
    AnnNetwork ann;
    ann.stack = std::move(stack);
    ann.activation = spec.activation;
    ann.validate();
    return ann;
  }
  SpikingNetwork snn;
  snn.stack = std::move(stack);
  snn.latency = spec.latency;
  snn.decay = spec.decay;
  snn.thresholds.assign(snn.stack.layers.size() - 1, spec.threshold);
  snn.u_reset = spec.u_reset;
  snn.validate();
  return snn;
}

class GameError : public std::runtime_error {
 public:
  GameError(int model_idx, const std::string& what)
      : std::runtime_error("game: model " + std::to_string(model_idx) + ": " +
                           what),
        model_index(model_idx) {}
  int model_index;
};

struct ReferencePool {
  std::vector<TrainedModel> models;  // 2n, order matches plan.reference
  std::vector<std::vector<std::uint8_t>> in_bits;  // [2n][|D|]
  ModelKind kind = ModelKind::kSpiking;
  int latency = 1;
};

struct MembershipLabels {
  std::vector<int> member;  // per pool row, 1 = in target train half
};

struct GameResult {
  TrainedModel target;
  ReferencePool pool;
  MembershipLabels labels;
};

inline MembershipLabels membership_labels(const Dataset& d,
                                          const SplitPlan& plan) {
  MembershipLabels labels;
  labels.member.assign(static_cast<size_t>(d.size()), 0);
  for (int i : plan.target.train) labels.member[static_cast<size_t>(i)] = 1;
  return labels;
}

// Trains the target (model index 0) and the 2n reference models (indices
// 1..2n). Every model gets its own init and shuffle seed derived from
// (master seed, model index); a training divergence aborts the game and
// names the model.
inline GameResult run_game(const Dataset& d, const SplitPlan& plan,
                           const ModelSpec& target_spec,
                           const ModelSpec& pool_spec, const TrainConfig& cfg,
                           std::uint64_t master_seed, int workers = 1) {
  if (static_cast<int>(plan.member_counts.size()) != d.size()) {
    throw std::invalid_argument("game: plan does not match dataset size");
  }

  auto train_one = [&](const ModelSpec& spec, const Split& split,
                       int model_idx) {
    AnyNetwork net = build_network(
        spec, derive_seed(master_seed, SeedStream::kWeightInit,
                          static_cast<std::uint64_t>(model_idx)));
    TrainConfig model_cfg = cfg;
    model_cfg.seed = derive_seed(master_seed, SeedStream::kBatchShuffle,
                                 static_cast<std::uint64_t>(model_idx));
    try {
      return train(net, d.subset(split.train), d.subset(split.test),
                   model_cfg);
    } catch (const TrainDivergenceError& e) {
      throw GameError(model_idx, e.what());
    }
  };

  GameResult result;
  result.pool.models.resize(plan.reference.size());
  result.pool.in_bits = plan.in_reference;
  result.pool.kind = pool_spec.kind;
  result.pool.latency = pool_spec.latency;

  std::vector<std::function<void()>> jobs;
  jobs.emplace_back(
      [&] { result.target = train_one(target_spec, plan.target, 0); });
  for (size_t m = 0; m < plan.reference.size(); ++m) {
    jobs.emplace_back([&, m] {
      result.pool.models[m] =
          train_one(pool_spec, plan.reference[m], static_cast<int>(m) + 1);
    });
  }
  run_jobs(jobs, workers);

  result.labels = membership_labels(d, plan);
  return result;
}

// Per-sample true-label confidences for the target (column 0) and every
// pool model. Values are plain confidences, or dropout-averaged when a
// spec is given (then both target and reference columns are averaged).
struct ConfidenceTable {
  int num_models = 0;
  std::vector<double> conf;  // row-major [sample][model]
  bool dropout_averaged = false;
  DropoutSpec dropout;

  double& at(int sample, int model) {
    return conf[static_cast<size_t>(sample) * num_models + model];
  }
  double at(int sample, int model) const {
    return conf[static_cast<size_t>(sample) * num_models + model];
  }
  int num_samples() const {
    return num_models == 0 ? 0 : static_cast<int>(conf.size()) / num_models;
  }
};

namespace detail {

// One model's confidences on the whole pool, in evaluation chunks. With a
// dropout spec, pass masks are keyed by stable sample id, so chunking and
// batching cannot change any value.
inline std::vector<double> model_confidences(
    const AnyNetwork& net, const Dataset& d,
    const std::optional<DropoutSpec>& dropout, int chunk = 256) {
  const int n = d.size();
  const int dim = d.feature_dim();
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  const int passes = dropout ? dropout->passes : 1;

  std::vector<int> labels;
  Tensor batch;
  for (int begin = 0; begin < n; begin += chunk) {
    const int end = std::min(n, begin + chunk);
    const int rows = end - begin;
    labels.assign(d.labels.begin() + begin, d.labels.begin() + end);
    for (int pass = 0; pass < passes; ++pass) {
      batch = Tensor::zeros({rows, dim});
      for (int r = 0; r < rows; ++r) {
        const float* src =
            d.features.data.data() + static_cast<size_t>(begin + r) * dim;
        float* dst = batch.data.data() + static_cast<size_t>(r) * dim;
        if (dropout) {
          Tensor mask = dropout_mask(
              dim, *dropout, d.sample_ids[static_cast<size_t>(begin + r)],
              pass);
          for (int j = 0; j < dim; ++j) dst[j] = src[j] * mask.data[static_cast<size_t>(j)];
        } else {
          std::copy(src, src + dim, dst);
        }
      }
      std::vector<double> confs =
          true_label_confidences(logits_of(net, batch), labels);
      for (int r = 0; r < rows; ++r) {
        out[static_cast<size_t>(begin + r)] += confs[static_cast<size_t>(r)];
      }
    }
  }
  if (passes > 1) {
    for (double& v : out) v /= static_cast<double>(passes);
  }
  return out;
}

}  // namespace detail

inline ConfidenceTable build_confidence_table(
    const std::vector<const AnyNetwork*>& models, const Dataset& d,
    const std::optional<DropoutSpec>& dropout = std::nullopt,
    int workers = 1) {
  if (dropout) dropout->validate();
  ConfidenceTable table;
  table.num_models = static_cast<int>(models.size());
  table.conf.assign(static_cast<size_t>(d.size()) * models.size(), 0.0);
  table.dropout_averaged = dropout.has_value();
  if (dropout) table.dropout = *dropout;

  std::vector<std::vector<double>> columns(models.size());
  std::vector<std::function<void()>> jobs;
  for (size_t m = 0; m < models.size(); ++m) {
    jobs.emplace_back([&, m] {
      columns[m] = detail::model_confidences(*models[m], d, dropout);
    });
  }
  run_jobs(jobs, workers);

  for (size_t m = 0; m < models.size(); ++m) {
    for (int i = 0; i < d.size(); ++i) {
      table.at(i, static_cast<int>(m)) = columns[m][static_cast<size_t>(i)];
    }
  }
  return table;
}

inline ConfidenceTable build_confidence_table(
    const GameResult& game, const Dataset& d,
    const std::optional<DropoutSpec>& dropout = std::nullopt,
    int workers = 1) {
  std::vector<const AnyNetwork*> models;
  models.push_back(&game.target.network);
  for (const TrainedModel& m : game.pool.models) models.push_back(&m.network);
  return build_confidence_table(models, d, dropout, workers);
}

// confidence.csv: sample_id, model_id, conf, dropout_flag. Model 0 is the
// target; models 1..2n follow plan order.
inline void write_confidence_csv(std::ostream& out,
                                 const ConfidenceTable& table,
                                 const std::vector<int>& sample_ids) {
  out << "sample_id,model_id,conf,dropout_flag\n";
  char buf[64];
  for (int i = 0; i < table.num_samples(); ++i) {
    for (int m = 0; m < table.num_models; ++m) {
      std::snprintf(buf, sizeof(buf), "%.17g", table.at(i, m));
      out << sample_ids[static_cast<size_t>(i)] << "," << m << "," << buf
          << "," << (table.dropout_averaged ? 1 : 0) << "\n";
    }
  }
}

inline void write_labels_csv(std::ostream& out, const MembershipLabels& labels,
                             const std::vector<int>& sample_ids) {
  out << "sample_id,member\n";
  for (size_t i = 0; i < labels.member.size(); ++i) {
    out << sample_ids[i] << "," << labels.member[i] << "\n";
  }
}

}  // namespace spikeaudit

#endif  // SPIKEAUDIT_GAME_HPP_
