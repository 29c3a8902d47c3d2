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
// Input-dropout confidence estimation: a sample's confidence is averaged
// over N passes, each masking input elements with an independent Bernoulli
// mask (an element is zeroed with probability p). Masks derive from
// (seed, sample id, pass index), so scores do not depend on evaluation
// order or batching, and one mask covers all time-step replicas of a pass.

#ifndef SPIKEAUDIT_DROPOUT_HPP_
#define SPIKEAUDIT_DROPOUT_HPP_

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "spikeaudit/network.hpp"
#include "spikeaudit/rng.hpp"
#include "spikeaudit/tensor.hpp"

namespace spikeaudit {

struct DropoutSpec {
  float p = 0.0f;        // probability an input element is zeroed
  int passes = 1;        // N averaging passes
  std::uint64_t seed = 0;

  void validate() const {
    if (p < 0.0f || p > 1.0f) {
      throw std::invalid_argument("dropout: p must be in [0,1]");
    }
    if (passes < 1) {
      throw std::invalid_argument("dropout: needs at least one pass");
    }
  }
};

// Binary mask for one (sample, pass): element j survives with probability
// 1-p. Keyed by the stable sample id, not its position in any batch.
inline Tensor dropout_mask(int dim, const DropoutSpec& spec, int sample_id,
                           int pass) {
  Rng rng(derive_seed(spec.seed, SeedStream::kDropoutMask,
                      static_cast<std::uint64_t>(sample_id),
                      static_cast<std::uint64_t>(pass)));
  Tensor mask = Tensor::zeros({dim});
  for (float& v : mask.data) v = rng.bernoulli(spec.p) ? 0.0f : 1.0f;
  return mask;
}

// Mean true-label confidence over N masked passes. p=0 produces all-ones
// masks, so the result equals the unmasked confidence bit-for-bit.
inline double dropout_confidence(const AnyNetwork& net, const Tensor& x,
                                 int y_true, const DropoutSpec& spec,
                                 int sample_id) {
  spec.validate();
  const int dim = static_cast<int>(x.numel());
  Tensor flat = x.rank() == 1 ? x : x.reshaped({dim});
  double sum = 0.0;
  for (int pass = 0; pass < spec.passes; ++pass) {
    Tensor mask = dropout_mask(dim, spec, sample_id, pass);
    sum += confidence(net, ops::hadamard(flat, mask), y_true);
  }
  return sum / static_cast<double>(spec.passes);
}

// Single-layer equivalence of masking the input versus masking the weight
// columns: phi(W (M o x)) against phi((M o W) x). The mask is binary, so
// both sides evaluate identically; any disagreement beyond 1e-12 fails.
inline bool input_weight_dropout_identity_check(const Tensor& weight,
                                                const Tensor& x,
                                                const Tensor& mask,
                                                Activation activation) {
  if (weight.rank() != 2 || x.rank() != 1 || mask.rank() != 1) {
    throw std::invalid_argument("identity check: W [out,in], x [in], m [in]");
  }
  if (weight.shape[1] != x.shape[0] || x.shape[0] != mask.shape[0]) {
    throw std::invalid_argument("identity check: dimension mismatch");
  }
  const Tensor zero_bias = Tensor::zeros({weight.shape[0]});
  const Tensor xb = x.reshaped({1, x.shape[0]});

  Tensor masked_input =
      ops::linear(ops::hadamard(xb, mask.reshaped({1, mask.shape[0]})),
                  weight, zero_bias);

  Tensor masked_weight_mat = weight;
  for (int i = 0; i < weight.shape[0]; ++i) {
    for (int j = 0; j < weight.shape[1]; ++j) {
      masked_weight_mat.at(i, j) *= mask.data[static_cast<size_t>(j)];
    }
  }
  Tensor masked_weight = ops::linear(xb, masked_weight_mat, zero_bias);

  auto act = [&](const Tensor& t) {
    return activation == Activation::kSigmoid ? ops::sigmoid(t)
                                              : ops::relu(t);
  };
  Tensor a = act(masked_input);
  Tensor b = act(masked_weight);
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double diff = static_cast<double>(a.data[i]) - b.data[i];
    if (diff > 1e-12 || diff < -1e-12) return false;
  }
  return true;
}

}  // namespace spikeaudit

#endif  // SPIKEAUDIT_DROPOUT_HPP_
