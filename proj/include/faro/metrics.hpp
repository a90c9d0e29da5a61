// Copyright 2026 The FARO Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Ordinal (accuracy, F1), cardinal (calibration) and fairness metrics.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "faro/common.hpp"
#include "faro/dataset.hpp"
#include "faro/fairness.hpp"
#include "faro/reward_model.hpp"

namespace faro {

/// A predicted probability and the ground-truth label it should track.
struct Prediction {
  double p = 0.0;
  int y = 0;
};

struct ClassificationMetrics {
  double acc01 = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct CalibrationMetrics {
  double ece = 0.0;
  double mce = 0.0;
  double rmsce = 0.0;
};

namespace detail {

inline void check_predictions(std::span<const Prediction> preds) {
  require(!preds.empty(), "metrics need at least one prediction");
  for (const auto& pr : preds) {
    require(pr.p >= 0.0 && pr.p <= 1.0, "predicted probabilities must lie in [0, 1]");
    require(pr.y == 0 || pr.y == 1, "labels must be 0 or 1");
  }
}

}  // namespace detail

/// Threshold 0.5 with ties predicted positive; F1 is 0 when undefined.
inline ClassificationMetrics classification_metrics(std::span<const Prediction> preds) {
  detail::check_predictions(preds);
  ClassificationMetrics m;
  for (const auto& pr : preds) {
    const bool pos = pr.p >= 0.5;
    if (pos && pr.y == 1) ++m.tp;
    else if (pos) ++m.fp;
    else if (pr.y == 1) ++m.fn;
    else ++m.tn;
  }
  m.acc01 = static_cast<double>(m.tp + m.tn) / static_cast<double>(preds.size());
  const std::size_t denom = 2 * m.tp + m.fp + m.fn;
  m.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(m.tp) / static_cast<double>(denom);
  return m;
}

/// Equal-width bins on [0, 1] (p = 1 falls in the last bin); empty bins
/// are skipped.
inline CalibrationMetrics calibration_metrics(std::span<const Prediction> preds, std::size_t bins = 10) {
  detail::check_predictions(preds);
  require(bins >= 1, "bins must be >= 1");
  std::vector<CompensatedSum> p_sum(bins), y_sum(bins);
  std::vector<std::size_t> count(bins, 0);
  for (const auto& pr : preds) {
    const auto b = std::min(static_cast<std::size_t>(pr.p * static_cast<double>(bins)), bins - 1);
    p_sum[b].add(pr.p);
    y_sum[b].add(pr.y);
    ++count[b];
  }
  const double n = static_cast<double>(preds.size());
  CompensatedSum ece, sq;
  CalibrationMetrics m;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    const double gap = std::abs(p_sum[b].value() / nb - y_sum[b].value() / nb);
    ece.add(nb / n * gap);
    sq.add(nb / n * gap * gap);
    m.mce = std::max(m.mce, gap);
  }
  m.ece = ece.value();
  m.rmsce = std::sqrt(sq.value());
  // Rounding can put the weighted mean a hair above the RMS or the max.
  m.rmsce = std::min(std::max(m.rmsce, m.ece), m.mce);
  return m;
}

/// Every pair scored in both orientations: (sigma(m), 1) and (sigma(-m), 0).
inline std::vector<Prediction> pair_predictions(const RewardParams& params, const Dataset& data) {
  std::vector<Prediction> out;
  out.reserve(2 * data.size());
  for (const auto& ex : data.examples()) {
    const double m = margin(params, ex);
    out.push_back({sigmoid(m), 1});
    out.push_back({sigmoid(-m), 0});
  }
  return out;
}

struct EvalReport {
  double acc01 = 0.0;
  double f1 = 0.0;
  double ece = 0.0;
  double mce = 0.0;
  double rmsce = 0.0;
  /// NaN when the family's proxy is undefined on the data (an empty cell).
  double delta_dp = 0.0;
  double delta_eo = 0.0;
  double delta_cf = 0.0;
  std::size_t n = 0;
};

inline double delta_or_nan(const RewardParams& params, const Dataset& data, Family f) {
  const auto st = group_stats(params, data, f);
  if (st.first_empty()) return std::numeric_limits<double>::quiet_NaN();
  return true_violation(st);
}

inline EvalReport evaluate_predictions(std::span<const Prediction> preds) {
  const auto c = classification_metrics(preds);
  const auto k = calibration_metrics(preds);
  EvalReport r;
  r.acc01 = c.acc01;
  r.f1 = c.f1;
  r.ece = k.ece;
  r.mce = k.mce;
  r.rmsce = k.rmsce;
  r.delta_dp = r.delta_eo = r.delta_cf = std::numeric_limits<double>::quiet_NaN();
  r.n = preds.size();
  return r;
}

inline EvalReport evaluate(const RewardParams& params, const Dataset& data) {
  require(!data.empty(), "evaluation data is empty");
  const auto preds = pair_predictions(params, data);
  EvalReport r = evaluate_predictions(preds);
  r.delta_dp = delta_or_nan(params, data, Family::kDP);
  r.delta_eo = delta_or_nan(params, data, Family::kEO);
  r.delta_cf = delta_or_nan(params, data, Family::kCF);
  return r;
}

}  // namespace faro
