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

// Hyperparameter sweeps over (beta, tolerances), the non-dominated filter
// on (error, fairness) pairs, and the weighted-sum scalarization check.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "faro/common.hpp"
#include "faro/fairness.hpp"
#include "faro/policy.hpp"
#include "faro/proxygda.hpp"

namespace faro {

struct SweepGrid {
  Vector betas{1.0};
  std::vector<Vector> tolerance_sets;
  Family family = Family::kDP;
  double dual_bound = 2.0;
  Arch arch = Arch::kLinear;
  std::size_t hidden = 0;
  SolverConfig solver;
  /// Score the reward itself (error = NLL, fairness = Delta(r)) instead of
  /// the Gibbs policy.
  bool reward_only = false;

  void validate() const {
    require(!betas.empty(), "grid.betas must be nonempty");
    require(!tolerance_sets.empty(), "grid.tolerance_sets must be nonempty");
    for (double b : betas) require(b > 0.0 && std::isfinite(b), "grid.betas must be positive and finite");
    solver.validate();
  }
};

struct ParetoPoint {
  double beta = 0.0;
  std::size_t tolerance_set = 0;
  Vector tolerances;
  double error = 0.0;
  double fairness = 0.0;
  bool failed = false;
  std::string failure;
  bool dominated = false;
};

/// True when a is no worse than b in both coordinates and better in one.
inline bool dominates(std::pair<double, double> a, std::pair<double, double> b) {
  return a.first <= b.first && a.second <= b.second && (a.first < b.first || a.second < b.second);
}

/// Indices (ascending) of points no other point dominates; exact ties are
/// all kept. O(n log n).
inline std::vector<std::size_t> non_dominated(std::span<const std::pair<double, double>> pts) {
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pts[a] < pts[b] || (pts[a] == pts[b] && a < b);
  });
  std::vector<std::size_t> keep;
  double best_before = std::numeric_limits<double>::infinity();  // min f over smaller e
  std::size_t k = 0;
  while (k < order.size()) {
    const double e = pts[order[k]].first;
    const double f_min = pts[order[k]].second;  // sorted, so first of the run is the min
    std::size_t end = k;
    while (end < order.size() && pts[order[end]].first == e) ++end;
    if (f_min < best_before)
      for (std::size_t r = k; r < end && pts[order[r]].second == f_min; ++r) keep.push_back(order[r]);
    best_before = std::min(best_before, f_min);
    k = end;
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

struct ScalarizationEntry {
  double alpha = 0.0;
  std::size_t minimizer = 0;
  double value = 0.0;
  bool on_frontier = false;
};

struct ScalarizationReport {
  std::vector<ScalarizationEntry> entries;
  bool all_on_frontier = true;
};

/// For each alpha, the minimizer of alpha e + (1 - alpha) f (ties broken
/// towards the lexicographically smallest point) must be non-dominated.
inline ScalarizationReport scalarization_check(std::span<const std::pair<double, double>> pts,
                                               std::span<const double> alphas) {
  require(!pts.empty(), "scalarization needs at least one point");
  const auto front = non_dominated(pts);
  ScalarizationReport rep;
  for (double alpha : alphas) {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    std::size_t best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double v = alpha * pts[i].first + (1.0 - alpha) * pts[i].second;
      if (v < best_v || (v == best_v && pts[i] < pts[best])) {
        best = i;
        best_v = v;
      }
    }
    ScalarizationEntry e{alpha, best, best_v, std::binary_search(front.begin(), front.end(), best)};
    rep.all_on_frontier = rep.all_on_frontier && e.on_frontier;
    rep.entries.push_back(e);
  }
  return rep;
}

/// Marks `dominated` on every successful point; failed points are skipped.
inline std::vector<std::size_t> mark_frontier(std::vector<ParetoPoint>& points) {
  std::vector<std::size_t> ok;
  std::vector<std::pair<double, double>> coords;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!points[i].failed) {
      ok.push_back(i);
      coords.emplace_back(points[i].error, points[i].fairness);
    }
  for (auto& p : points) p.dominated = true;
  std::vector<std::size_t> front;
  for (std::size_t idx : non_dominated(coords)) {
    points[ok[idx]].dominated = false;
    front.push_back(ok[idx]);
  }
  for (auto& p : points)
    if (p.failed) p.dominated = false;
  return front;
}

/// One point per (beta, tolerance set). Rewards are trained once per
/// tolerance set (in parallel up to `jobs` workers); cell results depend
/// only on their own hyperparameters and the solver seed.
inline std::vector<ParetoPoint> sweep(const SweepGrid& grid, const Dataset& data,
                                      const FiniteWorld* world, const FinitePolicy* ref,
                                      std::size_t jobs = 1) {
  grid.validate();
  require(grid.reward_only || (world != nullptr && ref != nullptr),
          "policy sweeps need a world and reference policy");
  const std::size_t n_sets = grid.tolerance_sets.size();
  struct Trained {
    std::optional<RewardParams> params;
    std::string failure;
  };
  std::vector<Trained> trained(n_sets);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t s = next++; s < n_sets; s = next++) {
      try {
        ConstraintSpec spec{grid.family, grid.tolerance_sets[s], grid.dual_bound};
        const auto st = run(grid.solver, data, spec, grid.arch, grid.hidden);
        trained[s].params = averaged_params(st, grid.arch, data.dim(), grid.hidden);
      } catch (const std::exception& e) {
        trained[s].failure = e.what();
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(jobs, 1, n_sets);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  const PolicyFairnessSpec event;
  std::vector<ParetoPoint> points;
  for (std::size_t s = 0; s < n_sets; ++s) {
    for (double beta : grid.betas) {
      ParetoPoint pt;
      pt.beta = beta;
      pt.tolerance_set = s;
      pt.tolerances = grid.tolerance_sets[s];
      try {
        if (!trained[s].params) throw std::runtime_error(trained[s].failure);
        const auto& params = *trained[s].params;
        if (grid.reward_only) {
          pt.error = nll(params, data);
          pt.fairness = true_violation(params, data, grid.family);
        } else {
          const auto pi = gibbs_policy(params, *world, *ref, beta);
          pt.error = 1.0 - expected_accuracy(pi, *world);
          pt.fairness = policy_violation(pi, *world, event);
        }
        if (!std::isfinite(pt.error) || !std::isfinite(pt.fairness))
          throw std::runtime_error("non-finite objective");
      } catch (const std::exception& e) {
        pt.failed = true;
        pt.failure = e.what();
        pt.error = std::numeric_limits<double>::quiet_NaN();
        pt.fairness = std::numeric_limits<double>::quiet_NaN();
      }
      points.push_back(std::move(pt));
    }
  }
  mark_frontier(points);
  return points;
}

}  // namespace faro
