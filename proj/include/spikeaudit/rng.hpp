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

#ifndef SPIKEAUDIT_RNG_HPP_
#define SPIKEAUDIT_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

namespace spikeaudit {

// All randomness in the toolkit flows through this self-contained generator so
// that a master seed reproduces every run bit-for-bit on any platform. The
// standard <random> distributions are implementation-defined and would break
// that guarantee across stdlibs.

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Labeled sub-streams derived from one master seed. Every consumer of
// randomness owns a distinct (stream, index) pair, so the task schedule can
// never change what any individual task draws.
enum class SeedStream : uint64_t {
  kDataset = 1,
  kSplitPlan = 2,
  kWeightInit = 3,
  kBatchShuffle = 4,
  kDropoutMask = 5,
  kGridSearch = 6,
};

inline uint64_t derive_seed(uint64_t master, SeedStream stream, uint64_t a = 0,
                            uint64_t b = 0) {
  uint64_t h = splitmix64(master ^ (static_cast<uint64_t>(stream) *
                                    0x9E3779B97F4A7C15ULL));
  h = splitmix64(h ^ (a * 0xBF58476D1CE4E5B9ULL));
  return splitmix64(h ^ (b * 0x94D049BB133111EBULL));
}

// xoshiro256++ with splitmix64 seeding.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : state_) {
      x = splitmix64(x);
      word = x;
    }
    have_cached_normal_ = false;
    cached_normal_ = 0.0;
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53 bits of resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  float uniform_float() {
    return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
  }

  // Unbiased integer in [0, n) via Lemire's multiply-shift rejection.
  uint64_t uniform_below(uint64_t n) {
    uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    uint64_t l = static_cast<uint64_t>(m);
    if (l < n) {
      const uint64_t t = (0 - n) % n;
      while (l < t) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        l = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; generates pairs and caches the second value.
  double normal() {
    if (have_cached_normal_) {
      have_cached_normal_ = false;
      return cached_normal_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_normal_ = r * std::sin(theta);
    have_cached_normal_ = true;
    return r * std::cos(theta);
  }

  float normal_float(float mean, float stddev) {
    return mean + stddev * static_cast<float>(normal());
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(uniform_below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  uint64_t state_[4];
  bool have_cached_normal_;
  double cached_normal_;
};

}  // namespace spikeaudit

#endif  // SPIKEAUDIT_RNG_HPP_
