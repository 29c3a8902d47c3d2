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

#ifndef SPIKEAUDIT_AUTOGRAD_HPP_
#define SPIKEAUDIT_AUTOGRAD_HPP_

#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spikeaudit/tensor.hpp"

namespace spikeaudit {

// Training-time stand-in for the derivative of the firing step: a triangle
// of height 1/width centered on the threshold, zero outside
// |u - threshold| >= width. Integrates to 1 over u.
inline float triangular_surrogate(float u, float threshold, float width) {
  const float d = std::fabs(u - threshold) / width;
  return d < 1.0f ? (1.0f - d) / width : 0.0f;
}

// Reverse-mode tape over whole tensors. Nodes are appended as ops execute, so
// each node's parents always precede it; walking the tape backwards is a
// reverse topological order and touches every node exactly once.
class GradTape {
 public:
  using NodeId = int;

  NodeId leaf(Tensor value) {
    return push(std::move(value), {-1, -1}, nullptr);
  }

  const Tensor& value(NodeId id) const { return nodes_[check(id)].value; }
  const Tensor& grad(NodeId id) const { return nodes_[check(id)].grad; }
  size_t size() const { return nodes_.size(); }

  NodeId add(NodeId a, NodeId b) {
    Tensor out = ops::add(value(a), value(b));
    return push(std::move(out), {a, b}, [](GradTape& t, const Node& n) {
      t.accumulate(n.parents[0], n.grad);
      t.accumulate(n.parents[1], n.grad);
    });
  }

  NodeId mul(NodeId a, NodeId b) {
    Tensor out = ops::hadamard(value(a), value(b));
    return push(std::move(out), {a, b}, [](GradTape& t, const Node& n) {
      t.accumulate(n.parents[0], ops::hadamard(n.grad, t.value(n.parents[1])));
      t.accumulate(n.parents[1], ops::hadamard(n.grad, t.value(n.parents[0])));
    });
  }

  NodeId affine(NodeId a, float scale, float shift) {
    Tensor out = ops::affine(value(a), scale, shift);
    return push(std::move(out), {a, -1},
                [scale](GradTape& t, const Node& n) {
                  t.accumulate(n.parents[0], ops::affine(n.grad, scale, 0.0f));
                });
  }

  NodeId matmul(NodeId a, NodeId b) {
    Tensor out = ops::matmul(value(a), value(b));
    return push(std::move(out), {a, b}, [](GradTape& t, const Node& n) {
      t.accumulate(n.parents[0],
                   ops::matmul(n.grad, ops::transpose(t.value(n.parents[1]))));
      t.accumulate(n.parents[1],
                   ops::matmul(ops::transpose(t.value(n.parents[0])), n.grad));
    });
  }

  // y = x W^T + bias with bias broadcast across the batch.
  NodeId linear(NodeId x, NodeId w, NodeId bias) {
    Tensor out = ops::linear(value(x), value(w), value(bias));
    return push(std::move(out), {x, w, bias}, [](GradTape& t, const Node& n) {
      const Tensor& g = n.grad;
      const Tensor& xv = t.value(n.parents[0]);
      const Tensor& wv = t.value(n.parents[1]);
      t.accumulate(n.parents[0], ops::matmul(g, wv));
      t.accumulate(n.parents[1], ops::matmul(ops::transpose(g), xv));
      Tensor db = Tensor::zeros({g.shape[1]});
      for (int i = 0; i < g.shape[0]; ++i)
        for (int j = 0; j < g.shape[1]; ++j) db.data[j] += g.at(i, j);
      t.accumulate(n.parents[2], db);
    });
  }

  NodeId relu(NodeId a) {
    Tensor out = ops::relu(value(a));
    return push(std::move(out), {a, -1}, [](GradTape& t, const Node& n) {
      const Tensor& x = t.value(n.parents[0]);
      Tensor dx = n.grad;
      for (size_t i = 0; i < dx.data.size(); ++i) {
        if (x.data[i] <= 0.0f) dx.data[i] = 0.0f;
      }
      t.accumulate(n.parents[0], dx);
    });
  }

  NodeId sigmoid(NodeId a) {
    Tensor out = ops::sigmoid(value(a));
    return push(std::move(out), {a, -1}, [](GradTape& t, const Node& n) {
      const Tensor& y = n.value;
      Tensor dx = n.grad;
      for (size_t i = 0; i < dx.data.size(); ++i) {
        dx.data[i] *= y.data[i] * (1.0f - y.data[i]);
      }
      t.accumulate(n.parents[0], dx);
    });
  }

  // Heaviside firing with a triangular surrogate derivative of width
  // 2*surrogate_width centered on the threshold: max(0, 1-|u-th|/a)/a.
  NodeId spike(NodeId u, float threshold, float surrogate_width) {
    if (surrogate_width <= 0.0f) {
      throw std::invalid_argument("spike: surrogate width must be positive");
    }
    Tensor out = ops::heaviside_ge(value(u), threshold);
    return push(std::move(out), {u, -1},
                [threshold, surrogate_width](GradTape& t, const Node& n) {
                  const Tensor& uv = t.value(n.parents[0]);
                  Tensor du = n.grad;
                  for (size_t i = 0; i < du.data.size(); ++i) {
                    du.data[i] *= triangular_surrogate(uv.data[i], threshold,
                                                       surrogate_width);
                  }
                  t.accumulate(n.parents[0], du);
                });
  }

  NodeId conv2d(NodeId input, NodeId kernel, NodeId bias) {
    Tensor out = ops::conv2d(value(input), value(kernel), value(bias));
    return push(std::move(out), {input, kernel, bias},
                [](GradTape& t, const Node& n) {
      const Tensor& x = t.value(n.parents[0]);
      const Tensor& k = t.value(n.parents[1]);
      const Tensor& g = n.grad;
      const int batch = x.shape[0], c = x.shape[1], h = x.shape[2],
                w = x.shape[3];
      const int oc = k.shape[0], kh = k.shape[2], kw = k.shape[3];
      const int oh = g.shape[2], ow = g.shape[3];
      Tensor dx = Tensor::zeros(x.shape);
      Tensor dk = Tensor::zeros(k.shape);
      Tensor db = Tensor::zeros({oc});
      for (int b = 0; b < batch; ++b) {
        for (int o = 0; o < oc; ++o) {
          for (int y = 0; y < oh; ++y) {
            for (int xx = 0; xx < ow; ++xx) {
              const float gv =
                  g.data[((static_cast<size_t>(b) * oc + o) * oh + y) * ow + xx];
              db.data[o] += gv;
              for (int ci = 0; ci < c; ++ci) {
                for (int ky = 0; ky < kh; ++ky) {
                  for (int kx = 0; kx < kw; ++kx) {
                    const size_t xi =
                        ((static_cast<size_t>(b) * c + ci) * h + y + ky) * w +
                        xx + kx;
                    const size_t ki =
                        ((static_cast<size_t>(o) * c + ci) * kh + ky) * kw + kx;
                    dx.data[xi] += gv * k.data[ki];
                    dk.data[ki] += gv * x.data[xi];
                  }
                }
              }
            }
          }
        }
      }
      t.accumulate(n.parents[0], dx);
      t.accumulate(n.parents[1], dk);
      t.accumulate(n.parents[2], db);
    });
  }

  NodeId reshape(NodeId a, std::vector<int> new_shape) {
    Tensor out = value(a).reshaped(new_shape);
    return push(std::move(out), {a, -1}, [](GradTape& t, const Node& n) {
      t.accumulate(n.parents[0], n.grad.reshaped(t.value(n.parents[0]).shape));
    });
  }

  // Mean cross-entropy of row-wise softmax against integer labels. Returns a
  // scalar node; the fused backward is (softmax - onehot)/batch.
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
    const Tensor& lg = value(logits);
    if (lg.rank() != 2) {
      throw std::invalid_argument("softmax_cross_entropy: expects [batch,classes]");
    }
    const int batch = lg.shape[0], classes = lg.shape[1];
    if (static_cast<int>(labels.size()) != batch) {
      throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    }
    for (int y : labels) {
      if (y < 0 || y >= classes) {
        throw std::invalid_argument("softmax_cross_entropy: label out of range");
      }
    }
    Tensor probs = ops::softmax(lg, 1);
    float loss = 0.0f;
    for (int i = 0; i < batch; ++i) {
      loss -= std::log(probs.at(i, labels[static_cast<size_t>(i)]));
    }
    loss /= static_cast<float>(batch);
    auto shared_probs = std::make_shared<Tensor>(std::move(probs));
    auto shared_labels = std::make_shared<std::vector<int>>(std::move(labels));
    return push(Tensor({1}, {loss}), {logits, -1},
                [shared_probs, shared_labels](GradTape& t, const Node& n) {
                  const float g = n.grad.data[0];
                  Tensor dl = *shared_probs;
                  const int b = dl.shape[0];
                  for (int i = 0; i < b; ++i) {
                    dl.at(i, (*shared_labels)[static_cast<size_t>(i)]) -= 1.0f;
                  }
                  const float scale = g / static_cast<float>(b);
                  for (float& v : dl.data) v *= scale;
                  t.accumulate(n.parents[0], dl);
                });
  }

  // Seeds d(loss)/d(loss)=1 and sweeps the tape once in reverse creation
  // order, accumulating into every parent's gradient buffer.
  void backward(NodeId loss) {
    check(loss);
    if (nodes_[loss].value.numel() != 1) {
      throw std::invalid_argument("backward: loss must be scalar");
    }
    for (auto& n : nodes_) {
      n.grad = Tensor::zeros(n.value.shape);
    }
    nodes_[loss].grad.data[0] = 1.0f;
    for (NodeId id = loss; id >= 0; --id) {
      const Node& n = nodes_[id];
      if (n.backward_fn) n.backward_fn(*this, n);
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::array<NodeId, 3> parents;
    std::function<void(GradTape&, const Node&)> backward_fn;
  };

  NodeId push(Tensor value, std::initializer_list<NodeId> parents,
              std::function<void(GradTape&, const Node&)> fn) {
    Node n;
    n.value = std::move(value);
    n.parents = {-1, -1, -1};
    size_t i = 0;
    for (NodeId p : parents) n.parents[i++] = p;
    n.backward_fn = std::move(fn);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
  }

  NodeId check(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
      throw std::invalid_argument("tape: node id out of range");
    }
    return id;
  }

  void accumulate(NodeId id, const Tensor& g) {
    Tensor& dst = nodes_[check(id)].grad;
    ops::check_same_shape(dst, g, "tape accumulate");
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += g.data[i];
  }

  // Deque keeps value()/grad() references valid while new ops are recorded.
  std::deque<Node> nodes_;
};

}  // namespace spikeaudit

#endif  // SPIKEAUDIT_AUTOGRAD_HPP_
