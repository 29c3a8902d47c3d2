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
// Binary model checkpoints. Layout, all little-endian:
//   magic "SPKAUDIT", u32 version,
//   u8 kind (0 spiking / 1 plain), u8 activation,
//   u8 input rank + i32 dims,
//   u32 layer count + per layer (u8 type, i32 dims),
//   u32 latency, f32 decay, u32 threshold count + f32 each, f32 reset,
//   then per layer the raw row-major f32 weight block and bias block.
// Round-trips are bit-exact; plain networks keep the full header with the
// spiking fields zeroed.

#ifndef SPIKEAUDIT_CHECKPOINT_HPP_
#define SPIKEAUDIT_CHECKPOINT_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "spikeaudit/network.hpp"
#include "spikeaudit/tensor.hpp"

namespace spikeaudit {

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what)
      : std::runtime_error("checkpoint: " + what) {}
};

namespace detail {

constexpr char kCheckpointMagic[8] = {'S', 'P', 'K', 'A', 'U', 'D', 'I', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void put_u8(std::string& out, std::uint8_t v) {
  out.push_back(static_cast<char>(v));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

inline void put_i32(std::string& out, std::int32_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
}

inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++]))
           << (8 * i);
    }
    return v;
  }

  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  void raw(char* dst, size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw CheckpointError("file truncated");
    }
  }

  const std::string& bytes_;
  size_t pos_ = 0;
};

inline void put_tensor_block(std::string& out, const Tensor& t) {
  const size_t start = out.size();
  out.resize(start + t.data.size() * 4);
  std::memcpy(out.data() + start, t.data.data(), t.data.size() * 4);
}

inline void read_tensor_block(ByteReader& r, Tensor& t) {
  r.raw(reinterpret_cast<char*>(t.data.data()), t.data.size() * 4);
}

}  // namespace detail

inline std::string serialize_checkpoint(const AnyNetwork& net) {
  using namespace detail;
  const bool spiking = std::holds_alternative<SpikingNetwork>(net);
  const LayerStack& stack = stack_of(net);

  std::string out;
  out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u8(out, spiking ? 0 : 1);
  put_u8(out, spiking ? 0
                      : static_cast<std::uint8_t>(
                            std::get<AnnNetwork>(net).activation));
  put_u8(out, static_cast<std::uint8_t>(stack.input_shape.size()));
  for (int d : stack.input_shape) put_i32(out, d);

  put_u32(out, static_cast<std::uint32_t>(stack.layers.size()));
  for (const Layer& layer : stack.layers) {
    if (std::holds_alternative<LinearLayer>(layer)) {
      const auto& lin = std::get<LinearLayer>(layer);
      put_u8(out, 0);
      put_i32(out, lin.weight.shape[0]);
      put_i32(out, lin.weight.shape[1]);
    } else {
      const auto& conv = std::get<Conv2dLayer>(layer);
      put_u8(out, 1);
      for (int d : conv.kernel.shape) put_i32(out, d);
    }
  }

  if (spiking) {
    const auto& snn = std::get<SpikingNetwork>(net);
    put_u32(out, static_cast<std::uint32_t>(snn.latency));
    put_f32(out, snn.decay);
    put_u32(out, static_cast<std::uint32_t>(snn.thresholds.size()));
    for (float th : snn.thresholds) put_f32(out, th);
    put_f32(out, snn.u_reset);
  } else {
    put_u32(out, 0);
    put_f32(out, 0.0f);
    put_u32(out, 0);
    put_f32(out, 0.0f);
  }

  for (const Layer& layer : stack.layers) {
    if (std::holds_alternative<LinearLayer>(layer)) {
      const auto& lin = std::get<LinearLayer>(layer);
      put_tensor_block(out, lin.weight);
      put_tensor_block(out, lin.bias);
    } else {
      const auto& conv = std::get<Conv2dLayer>(layer);
      put_tensor_block(out, conv.kernel);
      put_tensor_block(out, conv.bias);
    }
  }
  return out;
}

inline AnyNetwork deserialize_checkpoint(const std::string& bytes) {
  using namespace detail;
  ByteReader r(bytes);

  char magic[sizeof(kCheckpointMagic)];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw CheckpointError("bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported version " + std::to_string(version));
  }
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw CheckpointError("unknown model kind");
  const std::uint8_t activation = r.u8();
  if (activation > 1) throw CheckpointError("unknown activation");

  LayerStack stack;
  const std::uint8_t input_rank = r.u8();
  for (std::uint8_t i = 0; i < input_rank; ++i) {
    stack.input_shape.push_back(r.i32());
  }

  const std::uint32_t num_layers = r.u32();
  for (std::uint32_t l = 0; l < num_layers; ++l) {
    const std::uint8_t type = r.u8();
    if (type == 0) {
      const int out_dim = r.i32(), in_dim = r.i32();
      if (out_dim < 1 || in_dim < 1) throw CheckpointError("bad layer shape");
      LinearLayer lin;
      lin.weight = Tensor::zeros({out_dim, in_dim});
      lin.bias = Tensor::zeros({out_dim});
      stack.layers.emplace_back(std::move(lin));
    } else if (type == 1) {
      const int oc = r.i32(), ic = r.i32(), kh = r.i32(), kw = r.i32();
      if (oc < 1 || ic < 1 || kh < 1 || kw < 1) {
        throw CheckpointError("bad layer shape");
      }
      Conv2dLayer conv;
      conv.kernel = Tensor::zeros({oc, ic, kh, kw});
      conv.bias = Tensor::zeros({oc});
      stack.layers.emplace_back(std::move(conv));
    } else {
      throw CheckpointError("unknown layer type");
    }
  }

  const int latency = static_cast<int>(r.u32());
  const float decay = r.f32();
  const std::uint32_t num_thresholds = r.u32();
  std::vector<float> thresholds(num_thresholds);
  for (float& th : thresholds) th = r.f32();
  const float u_reset = r.f32();

  for (Layer& layer : stack.layers) {
    if (std::holds_alternative<LinearLayer>(layer)) {
      auto& lin = std::get<LinearLayer>(layer);
      read_tensor_block(r, lin.weight);
      read_tensor_block(r, lin.bias);
    } else {
      auto& conv = std::get<Conv2dLayer>(layer);
      read_tensor_block(r, conv.kernel);
      read_tensor_block(r, conv.bias);
    }
  }
  if (!r.exhausted()) throw CheckpointError("trailing bytes");

  if (kind == 0) {
    SpikingNetwork snn;
    snn.stack = std::move(stack);
    snn.latency = latency;
    snn.decay = decay;
    snn.thresholds = std::move(thresholds);
    snn.u_reset = u_reset;
    return snn;
  }
  AnnNetwork ann;
  ann.stack = std::move(stack);
  ann.activation = static_cast<Activation>(activation);
  return ann;
}

inline void save_checkpoint(const std::string& path, const AnyNetwork& net) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot open for writing: " + path);
  const std::string bytes = serialize_checkpoint(net);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("write failed: " + path);
}

inline AnyNetwork load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace spikeaudit

#endif  // SPIKEAUDIT_CHECKPOINT_HPP_
