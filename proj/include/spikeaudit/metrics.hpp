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
// Effectiveness metrics for score-based audits: ROC curves swept over every
// distinct score with non-strict thresholds, trapezoidal AUC, conservative
// low-FPR operating points, and paired member/non-member histograms.

#ifndef SPIKEAUDIT_METRICS_HPP_
#define SPIKEAUDIT_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace spikeaudit {

struct RocPoint {
  double beta = 0.0;  // decision threshold: positive when score >= beta
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // beta descending; fpr/tpr non-decreasing
  int positives = 0;
  int negatives = 0;
};

// Sweeps the decision rule score >= beta over every distinct score value.
// Tied scores flip together, so each distinct value contributes one point.
// The first point pins (fpr, tpr) = (0, 0) with an unreachable threshold.
inline RocCurve roc(const std::vector<double>& scores,
                    const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("roc: score/label count mismatch");
  }
  RocCurve curve;
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("roc: labels must be 0/1");
    (y == 1 ? curve.positives : curve.negatives)++;
  }
  if (curve.positives == 0 || curve.negatives == 0) {
    throw std::invalid_argument("roc: needs both classes present");
  }

  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] > scores[b];
  });

  curve.points.push_back(
      {std::numeric_limits<double>::infinity(), 0.0, 0.0});
  int tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    const double beta = scores[order[i]];
    while (i < order.size() && scores[order[i]] == beta) {
      (labels[order[i]] == 1 ? tp : fp)++;
      ++i;
    }
    curve.points.push_back(
        {beta, static_cast<double>(fp) / curve.negatives,
         static_cast<double>(tp) / curve.positives});
  }
  return curve;
}

// Trapezoidal integral of TPR over FPR.
inline double auc(const RocCurve& curve) {
  double area = 0.0;
  for (size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint& a = curve.points[i - 1];
    const RocPoint& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

// Largest TPR at a false positive rate not exceeding the target. No
// interpolation: an operating point that is not actually achievable is never
// reported.
inline double tpr_at_fpr(const RocCurve& curve, double fpr_target) {
  if (fpr_target < 0.0) {
    throw std::invalid_argument("tpr_at_fpr: target must be >= 0");
  }
  double best = 0.0;
  for (const RocPoint& p : curve.points) {
    if (p.fpr <= fpr_target) best = std::max(best, p.tpr);
  }
  return best;
}

// Achievable FPR values are multiples of 1/negatives; a target below that
// spacing cannot be met by any nonzero-FPR operating point.
inline bool fpr_target_below_resolution(const RocCurve& curve,
                                        double fpr_target) {
  return fpr_target > 0.0 &&
         fpr_target < 1.0 / static_cast<double>(curve.negatives);
}

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  int member_count = 0;
  int nonmember_count = 0;
};

// Equal-width bins spanning the pooled score range; both classes share the
// same edges. The top edge is closed so the maximum lands in the last bin.
inline std::vector<HistogramBin> histogram(const std::vector<double>& scores,
                                           const std::vector<int>& labels,
                                           int bins) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("histogram: score/label count mismatch");
  }
  if (bins < 1) throw std::invalid_argument("histogram: needs >= 1 bin");
  if (scores.empty()) return {};

  double lo = scores[0], hi = scores[0];
  for (double s : scores) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (lo == hi) hi = lo + 1.0;  // degenerate range: single occupied bin

  std::vector<HistogramBin> out(static_cast<size_t>(bins));
  const double width = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) {
    out[static_cast<size_t>(b)].lo = lo + b * width;
    out[static_cast<size_t>(b)].hi = lo + (b + 1) * width;
  }
  for (size_t i = 0; i < scores.size(); ++i) {
    int b = static_cast<int>((scores[i] - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    auto& bin = out[static_cast<size_t>(b)];
    (labels[i] == 1 ? bin.member_count : bin.nonmember_count)++;
  }
  return out;
}

struct AttackReport {
  double auc = 0.0;
  double tpr_at_fpr_1e3 = 0.0;  // at 0.1% false positive rate
  double tpr_at_fpr_1e2 = 0.0;  // at 1% false positive rate
  bool fpr_1e3_below_resolution = false;
  bool fpr_1e2_below_resolution = false;
  std::vector<HistogramBin> hist;
};

inline AttackReport summarize_attack(const std::vector<double>& scores,
                                     const std::vector<int>& labels,
                                     int hist_bins = 20) {
  RocCurve curve = roc(scores, labels);
  AttackReport r;
  r.auc = auc(curve);
  r.tpr_at_fpr_1e3 = tpr_at_fpr(curve, 0.001);
  r.tpr_at_fpr_1e2 = tpr_at_fpr(curve, 0.01);
  r.fpr_1e3_below_resolution = fpr_target_below_resolution(curve, 0.001);
  r.fpr_1e2_below_resolution = fpr_target_below_resolution(curve, 0.01);
  r.hist = histogram(scores, labels, hist_bins);
  return r;
}

}  // namespace spikeaudit

#endif  // SPIKEAUDIT_METRICS_HPP_
