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

// Differentiable group proxies q^dp / q^eo / q^cf, anchored two-sided
// constraint vectors with their Jacobians, and the un-anchored pairwise
// violation used for audits.

#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "faro/common.hpp"
#include "faro/dataset.hpp"
#include "faro/reward_model.hpp"

namespace faro {

enum class Family { kDP, kEO, kCF };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::kDP: return "dp";
    case Family::kEO: return "eo";
    case Family::kCF: return "cf";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  if (s == "dp" || s == "DP") return Family::kDP;
  if (s == "eo" || s == "EO") return Family::kEO;
  if (s == "cf" || s == "CF") return Family::kCF;
  throw ValidationError("unknown fairness family '" + s + "' (expected dp, eo or cf)");
}

/// Strata per group: 1 (DP), 2 predicted labels (EO), K values of U (CF).
inline std::size_t strata_count(Family f, std::size_t unrestricted_card) {
  switch (f) {
    case Family::kDP: return 1;
    case Family::kEO: return 2;
    case Family::kCF: return unrestricted_card;
  }
  return 1;
}

/// Number of tolerances: p-1 for DP and EO (shared across y), (p-1)K for CF.
inline std::size_t tolerance_count(Family f, std::size_t p, std::size_t K) {
  return f == Family::kCF ? (p - 1) * K : p - 1;
}

/// Length of the signed constraint vector: 2(p-1), 4(p-1) or 2K(p-1).
inline std::size_t constraint_count(Family f, std::size_t p, std::size_t K) {
  return 2 * (p - 1) * strata_count(f, K);
}

struct ConstraintSpec {
  Family family = Family::kDP;
  /// gamma_i (DP), kappa_i (EO) for i = 1..p-1, or mu_ik (CF) at (i-1)K + k.
  Vector tolerances;
  double dual_bound = 1.0;

  static ConstraintSpec uniform(Family f, std::size_t p, std::size_t K, double tol,
                                double dual_bound) {
    return {f, Vector(tolerance_count(f, p, K), tol), dual_bound};
  }

  /// Tolerance of non-anchor group i (1-based over groups 1..p-1) in stratum k.
  double tolerance(std::size_t group, std::size_t stratum, std::size_t K) const {
    if (group == 0) return 0.0;
    return family == Family::kCF ? tolerances[(group - 1) * K + stratum] : tolerances[group - 1];
  }

  double max_tolerance() const {
    return tolerances.empty() ? 0.0 : *std::max_element(tolerances.begin(), tolerances.end());
  }

  void validate(std::size_t p, std::size_t K) const {
    require(p >= 1, "group count must be >= 1");
    const std::size_t want = tolerance_count(family, p, K);
    require(tolerances.size() == want, "spec.tolerances has " + std::to_string(tolerances.size()) +
                                           " entries; family " + to_string(family) + " with p=" +
                                           std::to_string(p) + ", K=" + std::to_string(K) +
                                           " needs " + std::to_string(want));
    for (double t : tolerances) require(t >= 0.0, "spec.tolerances must be >= 0");
    require(dual_bound > 0.0 && std::isfinite(dual_bound), "spec.R must be positive and finite");
  }

  std::size_t constraint_count(std::size_t p, std::size_t K) const {
    return faro::constraint_count(family, p, K);
  }
};

/// Per-cell proxy values q_{ik} and counts. Cell (i, k) lives at i*strata + k.
struct GroupStats {
  Family family = Family::kDP;
  std::size_t groups = 1;
  std::size_t strata = 1;
  Vector values;
  std::vector<std::size_t> counts;

  double value(std::size_t group, std::size_t stratum) const { return values[group * strata + stratum]; }
  std::size_t count(std::size_t group, std::size_t stratum) const {
    return counts[group * strata + stratum];
  }
  bool empty_cell(std::size_t group, std::size_t stratum) const { return count(group, stratum) == 0; }

  /// First empty cell as (group, stratum), if any.
  std::optional<std::pair<std::size_t, std::size_t>> first_empty() const {
    for (std::size_t i = 0; i < groups; ++i)
      for (std::size_t k = 0; k < strata; ++k)
        if (empty_cell(i, k)) return std::make_pair(i, k);
    return std::nullopt;
  }
};

inline std::string describe_cell(Family f, std::size_t group, std::size_t stratum) {
  std::string s = "group " + std::to_string(group);
  if (f == Family::kEO) s += ", predicted label y=" + std::to_string(stratum);
  if (f == Family::kCF) s += ", U=" + std::to_string(stratum);
  return s;
}

inline void require_nonempty(const GroupStats& st) {
  if (auto cell = st.first_empty())
    throw InfeasibleError(to_string(st.family) + " proxy undefined: no examples in " +
                          describe_cell(st.family, cell->first, cell->second));
}

/// Signed anchored constraints and their Jacobian rows.
struct ConstraintValue {
  Vector c;
  std::vector<Vector> jacobian;
  GroupStats stats;
};

/// Accumulates per-example probabilities (and optionally their gradients)
/// into per-cell means. Shared by reward-space and policy-space proxies.
class ProxyAccumulator {
 public:
  ProxyAccumulator(Family family, std::size_t groups, std::size_t strata, std::size_t n_params)
      : family_(family), groups_(groups), strata_(strata), n_params_(n_params),
        sums_(groups * strata), counts_(groups * strata, 0) {
    if (n_params_ > 0) grads_.assign(groups * strata, CompensatedVector(n_params_));
  }

  /// Adds one example with probability `prob` to cell (group, stratum);
  /// `dprob` is its gradient (ignored when gradients were not requested).
  void add(std::size_t group, std::size_t stratum, double prob, std::span<const double> dprob = {}) {
    const std::size_t cell = group * strata_ + stratum;
    sums_[cell].add(prob);
    ++counts_[cell];
    if (n_params_ > 0) grads_[cell].add_scaled(dprob, 1.0);
  }

  GroupStats stats() const {
    GroupStats st{family_, groups_, strata_, Vector(groups_ * strata_, 0.0), counts_};
    for (std::size_t c = 0; c < st.values.size(); ++c)
      if (counts_[c] > 0) st.values[c] = sums_[c].value() / static_cast<double>(counts_[c]);
    return st;
  }

  /// Mean gradient of cell c (requires gradients and a nonempty cell).
  Vector cell_grad(std::size_t cell) const {
    return grads_[cell].value(1.0 / static_cast<double>(counts_[cell]));
  }

  /// Anchored two-sided constraints. Entry order: for i = 1..p-1, for each
  /// stratum k: (q_ik - q_0k - tol), (q_0k - q_ik - tol).
  ConstraintValue constraints(const ConstraintSpec& spec, std::size_t K) const {
    ConstraintValue out;
    out.stats = stats();
    require_nonempty(out.stats);
    const auto& st = out.stats;
    std::vector<Vector> cell_grads;
    if (n_params_ > 0)
      for (std::size_t c = 0; c < groups_ * strata_; ++c) cell_grads.push_back(cell_grad(c));
    for (std::size_t i = 1; i < groups_; ++i) {
      for (std::size_t k = 0; k < strata_; ++k) {
        const double tol = spec.tolerance(i, k, K);
        const double gap = st.value(i, k) - st.value(0, k);
        out.c.push_back(gap - tol);
        out.c.push_back(-gap - tol);
        if (n_params_ > 0) {
          Vector up(n_params_);
          const auto& gi = cell_grads[i * strata_ + k];
          const auto& g0 = cell_grads[k];
          for (std::size_t j = 0; j < n_params_; ++j) up[j] = gi[j] - g0[j];
          Vector down(n_params_);
          for (std::size_t j = 0; j < n_params_; ++j) down[j] = -up[j];
          out.jacobian.push_back(std::move(up));
          out.jacobian.push_back(std::move(down));
        }
      }
    }
    return out;
  }

 private:
  Family family_;
  std::size_t groups_;
  std::size_t strata_;
  std::size_t n_params_;
  std::vector<CompensatedSum> sums_;
  std::vector<std::size_t> counts_;
  std::vector<CompensatedVector> grads_;
};

namespace detail {

inline std::size_t stratum_of(Family f, const RewardParams& params, const PreferenceExample& ex,
                              double m) {
  (void)params;
  switch (f) {
    case Family::kDP: return 0;
    case Family::kEO: return m >= 0.0 ? 1 : 0;
    case Family::kCF: return ex.u;
  }
  return 0;
}

inline ProxyAccumulator accumulate(const RewardParams& params, const Dataset& data, Family family,
                                   bool with_grad) {
  params.validate();
  require(data.dim() == params.d, "dataset dimension does not match reward model");
  const std::size_t strata = strata_count(family, data.layout().unrestricted_card);
  ProxyAccumulator acc(family, data.group_count(), strata, with_grad ? params.size() : 0);
  Vector scratch(with_grad ? params.size() : 0);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto& ex = data[r];
    double m;
    if (with_grad) {
      std::fill(scratch.begin(), scratch.end(), 0.0);
      m = margin_accumulate(params, ex, scratch, 1.0);
      // d sigma(m) = sigma(m) sigma(-m) dm; labels for EO are held fixed.
      const double slope = sigmoid(m) * sigmoid(-m);
      for (double& v : scratch) v *= slope;
    } else {
      m = margin(params, ex);
    }
    acc.add(data.group_of(r), stratum_of(family, params, ex, m), sigmoid(m), scratch);
  }
  return acc;
}

}  // namespace detail

/// Per-cell means of pref_prob without emptiness checks.
inline GroupStats group_stats(const RewardParams& params, const Dataset& data, Family family) {
  return detail::accumulate(params, data, family, false).stats();
}

/// q^dp_i = E[p_phi | S = i].
inline GroupStats proxy_dp(const RewardParams& params, const Dataset& data) {
  auto st = group_stats(params, data, Family::kDP);
  require_nonempty(st);
  return st;
}

/// q^eo_{iy} = E[p_phi | S = i, Y = y] with Y the model's predicted label.
inline GroupStats proxy_eo(const RewardParams& params, const Dataset& data) {
  auto st = group_stats(params, data, Family::kEO);
  require_nonempty(st);
  return st;
}

/// q^cf_{ik} = E[p_phi | S = i, U = k].
inline GroupStats proxy_cf(const RewardParams& params, const Dataset& data) {
  auto st = group_stats(params, data, Family::kCF);
  require_nonempty(st);
  return st;
}

inline ConstraintValue constraint_vector(const RewardParams& params, const Dataset& data,
                                         const ConstraintSpec& spec, bool with_jacobian = true) {
  spec.validate(data.group_count(), data.layout().unrestricted_card);
  return detail::accumulate(params, data, spec.family, with_jacobian)
      .constraints(spec, data.layout().unrestricted_card);
}

/// max over strata and all group pairs of |q_i - q_j|.
inline double true_violation(const GroupStats& st) {
  double worst = 0.0;
  for (std::size_t k = 0; k < st.strata; ++k) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < st.groups; ++i) {
      lo = std::min(lo, st.value(i, k));
      hi = std::max(hi, st.value(i, k));
    }
    worst = std::max(worst, hi - lo);
  }
  return worst;
}

inline double true_violation(const RewardParams& params, const Dataset& data, Family family) {
  auto st = group_stats(params, data, family);
  require_nonempty(st);
  return true_violation(st);
}

/// max_{i, k} |q_ik - q_0k|.
inline double max_anchored_gap(const GroupStats& st) {
  double worst = 0.0;
  for (std::size_t i = 1; i < st.groups; ++i)
    for (std::size_t k = 0; k < st.strata; ++k)
      worst = std::max(worst, std::abs(st.value(i, k) - st.value(0, k)));
  return worst;
}

/// Largest signed constraint entry (0 when there are no constraints).
inline double max_violation(std::span<const double> c) {
  double worst = c.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
  for (double v : c) worst = std::max(worst, v);
  return worst;
}

}  // namespace faro
