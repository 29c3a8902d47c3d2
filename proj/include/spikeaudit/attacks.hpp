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
// Membership scoring rules over a confidence table whose column 0 is the
// target model and whose remaining columns are the reference pool:
//
//   population, direct:   score(x) = c_t(x)
//   population, ranked:   score(x) = mean over z in D of 1[c_t(x) >= c_t(z)]
//   reference rank:       score(x) = mean over refs of 1[c_t(x) >= c_r(x)]
//   relative ratio:       score(x) = c_t(x) / mean over refs of c_r(x)
//
// All indicator comparisons are non-strict. The direct and ranked population
// scores are related by a monotone map, so their ROC curves coincide.

#ifndef SPIKEAUDIT_ATTACKS_HPP_
#define SPIKEAUDIT_ATTACKS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikeaudit/dataset.hpp"
#include "spikeaudit/game.hpp"
#include "spikeaudit/metrics.hpp"

namespace spikeaudit {

enum class AttackKind : std::uint8_t {
  kAttackP = 0,        // direct population score
  kAttackPOriginal,    // ranked population score
  kAttackR,            // per-sample reference rank
  kRmia,               // confidence ratio against reference mean
};

inline const char* attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kAttackP: return "attack_p";
    case AttackKind::kAttackPOriginal: return "attack_p_orig";
    case AttackKind::kAttackR: return "attack_r";
    case AttackKind::kRmia: return "rmia";
  }
  throw std::invalid_argument("attack: unknown kind");
}

inline AttackKind attack_kind_from_name(const std::string& name) {
  if (name == "attack_p") return AttackKind::kAttackP;
  if (name == "attack_p_orig") return AttackKind::kAttackPOriginal;
  if (name == "attack_r") return AttackKind::kAttackR;
  if (name == "rmia") return AttackKind::kRmia;
  throw std::invalid_argument("attack: unknown kind '" + name + "'");
}

class AttackError : public std::runtime_error {
 public:
  explicit AttackError(const std::string& what)
      : std::runtime_error("attack: " + what) {}
};

// The target's confidence, taken as the membership score directly.
inline std::vector<double> attack_p_modified(const ConfidenceTable& table) {
  std::vector<double> scores(static_cast<size_t>(table.num_samples()));
  for (int i = 0; i < table.num_samples(); ++i) {
    scores[static_cast<size_t>(i)] = table.at(i, 0);
  }
  return scores;
}

// Fraction of the population whose target confidence does not exceed the
// sample's own; the population is the whole pool, the sample included.
inline std::vector<double> attack_p_original(const ConfidenceTable& table) {
  const int n = table.num_samples();
  if (n == 0) throw AttackError("empty population");
  std::vector<double> sorted(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) sorted[static_cast<size_t>(i)] = table.at(i, 0);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> scores(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto it =
        std::upper_bound(sorted.begin(), sorted.end(), table.at(i, 0));
    scores[static_cast<size_t>(i)] =
        static_cast<double>(it - sorted.begin()) / n;
  }
  return scores;
}

// Fraction of reference models whose confidence on the sample does not
// exceed the target's.
inline std::vector<double> attack_r(const ConfidenceTable& table) {
  const int refs = table.num_models - 1;
  if (refs < 1) throw AttackError("needs a reference pool");
  std::vector<double> scores(static_cast<size_t>(table.num_samples()));
  for (int i = 0; i < table.num_samples(); ++i) {
    int count = 0;
    for (int m = 1; m < table.num_models; ++m) {
      if (table.at(i, 0) >= table.at(i, m)) ++count;
    }
    scores[static_cast<size_t>(i)] = static_cast<double>(count) / refs;
  }
  return scores;
}

constexpr double kRatioDenominatorFloor = 1e-12;

namespace detail {

inline std::vector<double> confidence_ratio_scores(
    const ConfidenceTable& table) {
  const int refs = table.num_models - 1;
  if (refs < 1) throw AttackError("needs a reference pool");
  std::vector<double> scores(static_cast<size_t>(table.num_samples()));
  for (int i = 0; i < table.num_samples(); ++i) {
    double sum = 0.0;
    for (int m = 1; m < table.num_models; ++m) sum += table.at(i, m);
    const double denom = std::max(sum / refs, kRatioDenominatorFloor);
    scores[static_cast<size_t>(i)] = table.at(i, 0) / denom;
  }
  return scores;
}

}  // namespace detail

// Target confidence relative to its unbiased population estimate: the mean
// over n IN and n OUT reference confidences. The membership bitmap is
// required, and must actually balance, for the estimate to be unbiased.
inline std::vector<double> rmia(
    const ConfidenceTable& table,
    const std::vector<std::vector<std::uint8_t>>& in_bits) {
  const int refs = table.num_models - 1;
  if (refs < 1) throw AttackError("needs a reference pool");
  if (static_cast<int>(in_bits.size()) != refs) {
    throw AttackError("membership bitmap missing or wrong size");
  }
  const int n = table.num_samples();
  for (const auto& row : in_bits) {
    if (static_cast<int>(row.size()) != n) {
      throw AttackError("membership bitmap missing or wrong size");
    }
  }
  for (int i = 0; i < n; ++i) {
    int in_count = 0;
    for (int m = 0; m < refs; ++m) in_count += in_bits[static_cast<size_t>(m)][static_cast<size_t>(i)];
    if (2 * in_count != refs) {
      throw AttackError("reference pool not balanced for sample " +
                        std::to_string(i));
    }
  }
  return detail::confidence_ratio_scores(table);
}

// One row per audited sample: ground truth plus every attack's score and
// the estimator settings that produced the table.
struct ScoreTable {
  std::vector<int> sample_ids;
  std::vector<int> member;
  std::vector<double> attack_p;
  std::vector<double> attack_p_orig;
  std::vector<double> attack_r;
  std::vector<double> rmia;
  float dropout_p = 0.0f;
  int dropout_passes = 1;
  bool dropout_enabled = false;
  std::string pool_kind = "snn";
  int latency = 1;

  const std::vector<double>& scores_for(AttackKind kind) const {
    switch (kind) {
      case AttackKind::kAttackP: return attack_p;
      case AttackKind::kAttackPOriginal: return attack_p_orig;
      case AttackKind::kAttackR: return attack_r;
      case AttackKind::kRmia: return rmia;
    }
    throw std::invalid_argument("attack: unknown kind");
  }
};

inline ScoreTable build_score_table(
    const ConfidenceTable& table, const MembershipLabels& labels,
    const std::vector<std::vector<std::uint8_t>>& in_bits,
    const std::vector<int>& sample_ids, const std::string& pool_kind,
    int latency) {
  const size_t n = static_cast<size_t>(table.num_samples());
  if (labels.member.size() != n || sample_ids.size() != n) {
    throw AttackError("table, labels, and ids must align");
  }
  ScoreTable st;
  st.sample_ids = sample_ids;
  st.member = labels.member;
  st.attack_p = attack_p_modified(table);
  st.attack_p_orig = attack_p_original(table);
  st.attack_r = attack_r(table);
  st.rmia = rmia(table, in_bits);
  st.dropout_enabled = table.dropout_averaged;
  st.dropout_p = table.dropout_averaged ? table.dropout.p : 0.0f;
  st.dropout_passes = table.dropout_averaged ? table.dropout.passes : 1;
  st.pool_kind = pool_kind;
  st.latency = latency;
  for (const double* v : {st.attack_p.data(), st.attack_p_orig.data(),
                          st.attack_r.data(), st.rmia.data()}) {
    for (size_t i = 0; i < n; ++i) {
      if (!std::isfinite(v[i])) throw AttackError("non-finite score");
    }
  }
  return st;
}

inline void write_scores_csv(std::ostream& out, const ScoreTable& st) {
  out << "sample_id,member,attack_p,attack_p_orig,attack_r,rmia,"
         "dropout_p,dropout_N,pool_kind,T\n";
  char buf[256];
  for (size_t i = 0; i < st.sample_ids.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g,%g,%d,%s,%d\n",
                  st.sample_ids[i], st.member[i], st.attack_p[i],
                  st.attack_p_orig[i], st.attack_r[i], st.rmia[i],
                  static_cast<double>(st.dropout_p), st.dropout_passes,
                  st.pool_kind.c_str(), st.latency);
    out << buf;
  }
}

struct GridCell {
  float p = 0.0f;
  int passes = 1;
  double auc = 0.0;
};

struct GridSearchResult {
  DropoutSpec best;
  double best_auc = 0.0;
  std::vector<GridCell> cells;  // p-major, passes-minor evaluation order
};

// Picks (p, N) by attacking a surrogate target: the first pool model stands
// in for the real target and the remaining pool models act as references,
// with that model's own train half as ground truth. One mask stream is
// shared by every cell, and pass masks extend prefix-stably in N, so cells
// differ only in the estimator settings under test. Ties prefer smaller p,
// then fewer passes.
inline GridSearchResult grid_search_dropout(
    const std::vector<const AnyNetwork*>& pool_models, const Dataset& d,
    const std::vector<std::vector<std::uint8_t>>& pool_in_bits,
    const std::vector<float>& p_grid, const std::vector<int>& n_grid,
    AttackKind kind, std::uint64_t experiment_seed, int workers = 1) {
  if (pool_models.size() < 2) {
    throw std::invalid_argument("grid search: needs at least two pool models");
  }
  if (p_grid.empty() || n_grid.empty()) {
    throw std::invalid_argument("grid search: empty grid");
  }
  if (pool_in_bits.size() != pool_models.size()) {
    throw std::invalid_argument("grid search: bitmap does not match pool");
  }

  // Surrogate game: pool model 0 becomes the "target" column.
  MembershipLabels surrogate_labels;
  surrogate_labels.member.assign(pool_in_bits[0].begin(),
                                 pool_in_bits[0].end());

  const std::uint64_t mask_seed =
      derive_seed(experiment_seed, SeedStream::kGridSearch);

  GridSearchResult result;
  result.best_auc = -1.0;
  for (float p : p_grid) {
    for (int passes : n_grid) {
      DropoutSpec spec{p, passes, mask_seed};
      spec.validate();
      ConfidenceTable table =
          build_confidence_table(pool_models, d, spec, workers);
      std::vector<double> scores;
      switch (kind) {
        case AttackKind::kAttackP:
          scores = attack_p_modified(table);
          break;
        case AttackKind::kAttackPOriginal:
          scores = attack_p_original(table);
          break;
        case AttackKind::kAttackR:
          scores = attack_r(table);
          break;
        case AttackKind::kRmia:
          // The surrogate pool loses one model, so the balanced-bitmap
          // precondition cannot hold; the ratio form serves for selection.
          scores = detail::confidence_ratio_scores(table);
          break;
      }
      const double cell_auc = auc(roc(scores, surrogate_labels.member));
      result.cells.push_back({p, passes, cell_auc});
      if (cell_auc > result.best_auc) {
        result.best_auc = cell_auc;
        result.best = spec;
      }
    }
  }
  return result;
}

}  // namespace spikeaudit

#endif  // SPIKEAUDIT_ATTACKS_HPP_
