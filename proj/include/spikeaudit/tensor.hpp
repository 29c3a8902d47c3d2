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

#ifndef SPIKEAUDIT_TENSOR_HPP_
#define SPIKEAUDIT_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spikeaudit {

// Dense row-major float32 tensor. Accumulations stay in float32 with a fixed
// loop order, so a given seed reproduces results bit-for-bit on one machine.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<float> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != static_cast<size_t>(numel_of(shape))) {
      throw std::invalid_argument("tensor: data length does not match shape");
    }
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) {
    const int64_t n = numel_of(s);
    return Tensor(std::move(s), std::vector<float>(static_cast<size_t>(n), 0.0f));
  }

  static Tensor full(std::vector<int> s, float v) {
    const int64_t n = numel_of(s);
    return Tensor(std::move(s), std::vector<float>(static_cast<size_t>(n), v));
  }

  static Tensor row(std::initializer_list<float> v) {
    return Tensor({static_cast<int>(v.size())}, std::vector<float>(v));
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }

  int dim(int i) const { return shape.at(static_cast<size_t>(i)); }

  // 2-D accessors; the hot loops below index data directly.
  float& at(int i, int j) {
    return data[static_cast<size_t>(i) * shape[1] + j];
  }
  float at(int i, int j) const {
    return data[static_cast<size_t>(i) * shape[1] + j];
  }

  Tensor reshaped(std::vector<int> new_shape) const {
    if (numel_of(new_shape) != numel()) {
      throw std::invalid_argument("reshape: element count mismatch");
    }
    return Tensor(std::move(new_shape), data);
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) os << ",";
      os << shape[i];
    }
    os << "]";
    return os.str();
  }
};

inline bool all_finite(const Tensor& t) {
  for (float v : t.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace ops {

inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
  }
}

// Matrix product [m,k] x [k,n] -> [m,n]. Plain triple loop, k ascending, so
// the result is the bit-exact float32 reference itself.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul: expects rank-2 tensors");
  }
  if (a.shape[1] != b.shape[0]) {
    throw std::invalid_argument("matmul: inner dimensions disagree " +
                                a.shape_str() + " vs " + b.shape_str());
  }
  const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    const float* arow = &a.data[static_cast<size_t>(i) * k];
    float* orow = &out.data[static_cast<size_t>(i) * n];
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      const float* brow = &b.data[static_cast<size_t>(p) * n];
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("transpose: expects rank-2");
  const int m = a.shape[0], n = a.shape[1];
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

// Elementwise scale*x + shift.
inline Tensor affine(const Tensor& a, float scale, float shift) {
  Tensor out = a;
  for (float& v : out.data) v = scale * v + shift;
  return out;
}

// y = x * W^T + bias, x [batch,in], w [out,in], bias [out].
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.rank() != 2 || w.rank() != 2 || bias.rank() != 1) {
    throw std::invalid_argument("linear: bad ranks");
  }
  if (x.shape[1] != w.shape[1] || w.shape[0] != bias.shape[0]) {
    throw std::invalid_argument("linear: dimension mismatch x" + x.shape_str() +
                                " w" + w.shape_str());
  }
  const int batch = x.shape[0], in = x.shape[1], out_dim = w.shape[0];
  Tensor out = Tensor::zeros({batch, out_dim});
  for (int i = 0; i < batch; ++i) {
    const float* xrow = &x.data[static_cast<size_t>(i) * in];
    float* orow = &out.data[static_cast<size_t>(i) * out_dim];
    for (int o = 0; o < out_dim; ++o) {
      const float* wrow = &w.data[static_cast<size_t>(o) * in];
      float acc = 0.0f;
      for (int p = 0; p < in; ++p) acc += xrow[p] * wrow[p];
      orow[o] = acc + bias.data[o];
    }
  }
  return out;
}

inline Tensor relu(const Tensor& a) {
  Tensor out = a;
  for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
  return out;
}

inline Tensor sigmoid(const Tensor& a) {
  Tensor out = a;
  for (float& v : out.data) v = 1.0f / (1.0f + std::exp(-v));
  return out;
}

// 1 where x >= threshold, else 0. Non-strict so boundary behavior is fixed.
inline Tensor heaviside_ge(const Tensor& a, float threshold) {
  Tensor out = a;
  for (float& v : out.data) v = v >= threshold ? 1.0f : 0.0f;
  return out;
}

// Softmax along `axis` with max-subtraction. Works for any rank.
inline Tensor softmax(const Tensor& t, int axis) {
  if (axis < 0 || axis >= t.rank()) {
    throw std::invalid_argument("softmax: axis out of range");
  }
  if (t.shape[axis] == 0) {
    throw std::invalid_argument("softmax: empty axis");
  }
  const int n = t.shape[axis];
  int64_t inner = 1, outer = 1;
  for (int i = axis + 1; i < t.rank(); ++i) inner *= t.shape[i];
  for (int i = 0; i < axis; ++i) outer *= t.shape[i];
  Tensor out = t;
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * n * inner + in;
      float mx = out.data[base];
      for (int i = 1; i < n; ++i) {
        mx = std::max(mx, out.data[base + i * inner]);
      }
      float sum = 0.0f;
      for (int i = 0; i < n; ++i) {
        float& v = out.data[base + i * inner];
        v = std::exp(v - mx);
        sum += v;
      }
      for (int i = 0; i < n; ++i) out.data[base + i * inner] /= sum;
    }
  }
  return out;
}

// Valid 2-D convolution, stride 1. input [B,C,H,W], kernel [O,C,kh,kw],
// bias [O] -> [B,O,H-kh+1,W-kw+1].
inline Tensor conv2d(const Tensor& input, const Tensor& kernel,
                     const Tensor& bias) {
  if (input.rank() != 4 || kernel.rank() != 4 || bias.rank() != 1) {
    throw std::invalid_argument("conv2d: bad ranks");
  }
  const int batch = input.shape[0], c = input.shape[1], h = input.shape[2],
            w = input.shape[3];
  const int oc = kernel.shape[0], kc = kernel.shape[1], kh = kernel.shape[2],
            kw = kernel.shape[3];
  if (kc != c || bias.shape[0] != oc) {
    throw std::invalid_argument("conv2d: channel mismatch");
  }
  const int oh = h - kh + 1, ow = w - kw + 1;
  if (oh < 1 || ow < 1) {
    throw std::invalid_argument("conv2d: kernel larger than input");
  }
  Tensor out = Tensor::zeros({batch, oc, oh, ow});
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < oc; ++o) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          float acc = 0.0f;
          for (int ci = 0; ci < c; ++ci) {
            for (int ky = 0; ky < kh; ++ky) {
              const float* irow =
                  &input.data[((static_cast<size_t>(b) * c + ci) * h + y + ky) *
                                  w +
                              x];
              const float* krow =
                  &kernel.data[((static_cast<size_t>(o) * c + ci) * kh + ky) *
                               kw];
              for (int kx = 0; kx < kw; ++kx) acc += irow[kx] * krow[kx];
            }
          }
          out.data[((static_cast<size_t>(b) * oc + o) * oh + y) * ow + x] =
              acc + bias.data[o];
        }
      }
    }
  }
  return out;
}

inline float sum(const Tensor& t) {
  float s = 0.0f;
  for (float v : t.data) s += v;
  return s;
}

// Row-wise argmax of a [m,n] tensor; ties resolve to the lowest index.
inline std::vector<int> argmax_rows(const Tensor& t) {
  if (t.rank() != 2) throw std::invalid_argument("argmax_rows: expects rank-2");
  std::vector<int> out(static_cast<size_t>(t.shape[0]), 0);
  for (int i = 0; i < t.shape[0]; ++i) {
    int best = 0;
    float bv = t.at(i, 0);
    for (int j = 1; j < t.shape[1]; ++j) {
      if (t.at(i, j) > bv) {
        bv = t.at(i, j);
        best = j;
      }
    }
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

}  // namespace ops
}  // namespace spikeaudit

#endif  // SPIKEAUDIT_TENSOR_HPP_
