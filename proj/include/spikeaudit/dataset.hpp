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
// Desk-scale datasets and the shuffle-and-resplit plans used by the audit
// game. A plan carves the pool into a target train/test half-split plus n
// reference pairs; the two halves of each pair partition the pool, so every
// sample is a training member of exactly n of the 2n reference models.

#ifndef SPIKEAUDIT_DATASET_HPP_
#define SPIKEAUDIT_DATASET_HPP_

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spikeaudit/rng.hpp"
#include "spikeaudit/tensor.hpp"

namespace spikeaudit {

struct Dataset {
  Tensor features;                  // [n, flat feature dim]
  std::vector<int> labels;          // [n]
  std::vector<int> sample_ids;      // stable per-sample identity
  std::vector<int> sample_shape;    // per-sample shape, e.g. {2} or {1,8,8}
  int num_classes = 0;

  int size() const { return features.shape.empty() ? 0 : features.shape[0]; }
  int feature_dim() const {
    return features.rank() == 2 ? features.shape[1] : 0;
  }

  Tensor sample(int i) const {
    if (i < 0 || i >= size()) {
      throw std::out_of_range("dataset: sample index out of range");
    }
    const size_t d = static_cast<size_t>(feature_dim());
    std::vector<float> v(features.data.begin() + static_cast<long>(i) * static_cast<long>(d),
                         features.data.begin() + (static_cast<long>(i) + 1) * static_cast<long>(d));
    return Tensor({1, feature_dim()}, std::move(v));
  }

  // Row-gathers a subset, preserving sample identities.
  Dataset subset(const std::vector<int>& indices) const {
    Dataset out;
    out.features = Tensor::zeros({static_cast<int>(indices.size()),
                                  feature_dim()});
    out.labels.reserve(indices.size());
    out.sample_ids.reserve(indices.size());
    const size_t d = static_cast<size_t>(feature_dim());
    for (size_t r = 0; r < indices.size(); ++r) {
      const int i = indices[r];
      if (i < 0 || i >= size()) {
        throw std::out_of_range("dataset: subset index out of range");
      }
      std::copy(features.data.begin() + static_cast<long>(i) * static_cast<long>(d),
                features.data.begin() + (static_cast<long>(i) + 1) * static_cast<long>(d),
                out.features.data.begin() + static_cast<long>(r) * static_cast<long>(d));
      out.labels.push_back(labels[static_cast<size_t>(i)]);
      out.sample_ids.push_back(sample_ids[static_cast<size_t>(i)]);
    }
    out.sample_shape = sample_shape;
    out.num_classes = num_classes;
    return out;
  }
};

// Index-level view of one train/test division of the pool.
struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

struct SplitPlan {
  std::uint64_t seed = 0;
  int n_pairs = 0;
  Split target;
  std::vector<Split> reference;  // 2*n_pairs entries; 2k and 2k+1 partition D

  // member_counts[i] = number of reference models whose train half holds
  // sample index i; always exactly n_pairs by construction.
  std::vector<int> member_counts;

  // in_reference[m][i] = 1 if pool index i is in reference model m's train
  // half.
  std::vector<std::vector<std::uint8_t>> in_reference;
};

// Axis-aligned Gaussian clusters: class c sits at +/- separation along unit
// axis (c mod dim), unit noise. Classes beyond 2*dim would collide, which is
// rejected.
inline Dataset make_blobs(int n_per_class, int classes, int dim,
                          float separation, std::uint64_t seed) {
  if (n_per_class < 1 || classes < 1 || dim < 1) {
    throw std::invalid_argument("blobs: sizes must be positive");
  }
  if (classes > 2 * dim) {
    throw std::invalid_argument("blobs: needs classes <= 2*dim distinct centers");
  }
  const int n = n_per_class * classes;
  Dataset d;
  d.features = Tensor::zeros({n, dim});
  d.labels.resize(static_cast<size_t>(n));
  d.sample_ids.resize(static_cast<size_t>(n));
  d.sample_shape = {dim};
  d.num_classes = classes;

  Rng rng(derive_seed(seed, SeedStream::kDataset));
  int row = 0;
  for (int c = 0; c < classes; ++c) {
    const int axis = c % dim;
    const float sign = c < dim ? 1.0f : -1.0f;
    for (int k = 0; k < n_per_class; ++k, ++row) {
      float* f = d.features.data.data() + static_cast<size_t>(row) * dim;
      for (int j = 0; j < dim; ++j) f[j] = rng.normal_float(0.0f, 1.0f);
      f[axis] += sign * separation;
      d.labels[static_cast<size_t>(row)] = c;
      d.sample_ids[static_cast<size_t>(row)] = row;
    }
  }
  return d;
}

class IdxFormatError : public std::runtime_error {
 public:
  explicit IdxFormatError(const std::string& what)
      : std::runtime_error("idx: " + what) {}
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IdxFormatError(std::string("truncated reading ") + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

// Loads an image/label file pair in IDX layout (big-endian magic and dims,
// raw u8 payload). Pixels are scaled to [0,1].
inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IdxFormatError("cannot open " + images_path);
  if (detail::read_be32(imgs, "image magic") != 0x00000803u) {
    throw IdxFormatError("bad image magic");
  }
  const std::uint32_t n = detail::read_be32(imgs, "image count");
  const std::uint32_t rows = detail::read_be32(imgs, "rows");
  const std::uint32_t cols = detail::read_be32(imgs, "cols");

  std::ifstream lbls(labels_path, std::ios::binary);
  if (!lbls) throw IdxFormatError("cannot open " + labels_path);
  if (detail::read_be32(lbls, "label magic") != 0x00000801u) {
    throw IdxFormatError("bad label magic");
  }
  const std::uint32_t n_labels = detail::read_be32(lbls, "label count");
  if (n != n_labels) {
    throw IdxFormatError("image/label count mismatch: " + std::to_string(n) +
                         " vs " + std::to_string(n_labels));
  }

  const size_t pixels = static_cast<size_t>(rows) * cols;
  std::vector<unsigned char> buf(pixels);
  Dataset d;
  d.features = Tensor::zeros({static_cast<int>(n), static_cast<int>(pixels)});
  d.labels.resize(n);
  d.sample_ids.resize(n);
  d.sample_shape = {1, static_cast<int>(rows), static_cast<int>(cols)};

  int max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(pixels));
    if (!imgs) throw IdxFormatError("truncated image payload");
    float* f = d.features.data.data() + static_cast<size_t>(i) * pixels;
    for (size_t p = 0; p < pixels; ++p) {
      f[p] = static_cast<float>(buf[p]) / 255.0f;
    }
    unsigned char y;
    lbls.read(reinterpret_cast<char*>(&y), 1);
    if (!lbls) throw IdxFormatError("truncated label payload");
    d.labels[i] = static_cast<int>(y);
    d.sample_ids[i] = static_cast<int>(i);
    max_label = std::max(max_label, static_cast<int>(y));
  }
  d.num_classes = max_label + 1;
  return d;
}

// Shuffle-and-resplit plan: one permutation for the target halves, one per
// reference pair. Pure function of (|D|, n_pairs, seed).
inline SplitPlan plan_splits(const Dataset& d, int n_pairs,
                             std::uint64_t seed) {
  const int n = d.size();
  if (n % 2 != 0) {
    throw std::invalid_argument("split: pool size must be even");
  }
  if (n_pairs < 1) {
    throw std::invalid_argument("split: need at least one reference pair");
  }

  SplitPlan plan;
  plan.seed = seed;
  plan.n_pairs = n_pairs;
  const int half = n / 2;

  auto halves_of = [&](std::uint64_t stream_index) {
    std::vector<int> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, SeedStream::kSplitPlan, stream_index));
    rng.shuffle(perm);
    Split s;
    s.train.assign(perm.begin(), perm.begin() + half);
    s.test.assign(perm.begin() + half, perm.end());
    return s;
  };

  plan.target = halves_of(0);
  plan.member_counts.assign(static_cast<size_t>(n), 0);
  for (int p = 0; p < n_pairs; ++p) {
    Split s = halves_of(static_cast<std::uint64_t>(p) + 1);
    Split complement;
    complement.train = s.test;
    complement.test = s.train;
    plan.reference.push_back(s);
    plan.reference.push_back(std::move(complement));
  }
  plan.in_reference.assign(plan.reference.size(),
                           std::vector<std::uint8_t>(static_cast<size_t>(n), 0));
  for (size_t m = 0; m < plan.reference.size(); ++m) {
    for (int i : plan.reference[m].train) {
      plan.in_reference[m][static_cast<size_t>(i)] = 1;
      ++plan.member_counts[static_cast<size_t>(i)];
    }
  }
  for (int c : plan.member_counts) {
    if (c != n_pairs) {
      throw std::logic_error("split: pairwise partition violated");
    }
  }
  return plan;
}

// CSV export: sample_id, label, then the flat feature values.
inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << "sample_id,label";
  for (int j = 0; j < d.feature_dim(); ++j) out << ",f" << j;
  out << "\n";
  for (int i = 0; i < d.size(); ++i) {
    out << d.sample_ids[static_cast<size_t>(i)] << ","
        << d.labels[static_cast<size_t>(i)];
    const float* f =
        d.features.data.data() + static_cast<size_t>(i) * d.feature_dim();
    for (int j = 0; j < d.feature_dim(); ++j) {
      out << "," << f[j];
    }
    out << "\n";
  }
}

inline void write_dataset_csv(const std::string& path, const Dataset& d) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("dataset: cannot open " + path);
  write_dataset_csv(f, d);
}

}  // namespace spikeaudit

#endif  // SPIKEAUDIT_DATASET_HPP_
