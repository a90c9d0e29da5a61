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

// Fairness certificates: slack decomposition, held-out verification and the
// pairwise bounds implied by anchoring.

#pragma once

#include <cmath>
#include <vector>

#include "faro/common.hpp"
#include "faro/fairness.hpp"
#include "faro/proxygda.hpp"

namespace faro {

struct SlackBound {
  /// rho + R G sqrt(m) / sqrt(T)
  double epsilon_T = 0.0;
  /// sqrt(ln(1/delta) / n_min), constant taken as 1
  double stat_term = 0.0;
};

inline SlackBound slack_bound(double rho, double R, double G, std::size_t m, std::size_t T,
                              std::size_t n_min, double delta) {
  require(T >= 1, "T must be >= 1");
  require(n_min >= 1, "n_min must be >= 1");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  require(rho >= 0.0 && R >= 0.0 && G >= 0.0, "rho, R and G must be >= 0");
  SlackBound out;
  out.epsilon_T = rho + R * G * std::sqrt(static_cast<double>(m)) / std::sqrt(static_cast<double>(T));
  out.stat_term = std::sqrt(std::log(1.0 / delta) / static_cast<double>(n_min));
  return out;
}

inline SlackBound slack_bound(const SolverState& st, double delta) {
  return slack_bound(st.rho_estimate, st.dual_bound, st.G_estimate, st.m, st.T,
                     std::max<std::size_t>(st.n_min, 1), delta);
}

struct Certificate {
  Family family = Family::kDP;
  double rho = 0.0;
  double R = 0.0;
  double G = 0.0;
  std::size_t m = 0;
  std::size_t T = 0;
  std::size_t n_min = 0;
  double delta = 0.05;
  double epsilon_T = 0.0;
  double stat_term = 0.0;
  double max_tolerance = 0.0;
  double measured_violation = 0.0;
  bool pass = false;

  double threshold() const { return max_tolerance + epsilon_T + stat_term; }
};

/// Audits `params` on eval_data against the slack recorded by a solver run.
inline Certificate verify_certificate(const RewardParams& params, const SolverState& st,
                                      const Dataset& eval_data, const ConstraintSpec& spec,
                                      double delta) {
  spec.validate(eval_data.group_count(), eval_data.layout().unrestricted_card);
  require(!eval_data.empty(), "evaluation data is empty");
  Certificate cert;
  cert.family = spec.family;
  cert.rho = st.rho_estimate;
  cert.R = st.dual_bound;
  cert.G = st.G_estimate;
  cert.m = st.m;
  cert.T = st.T;
  cert.n_min = std::max<std::size_t>(st.n_min, 1);
  cert.delta = delta;
  const auto slack = slack_bound(cert.rho, cert.R, cert.G, cert.m, cert.T, cert.n_min, delta);
  cert.epsilon_T = slack.epsilon_T;
  cert.stat_term = slack.stat_term;
  cert.max_tolerance = spec.max_tolerance();
  cert.measured_violation =
      eval_data.group_count() == 1 ? 0.0 : true_violation(params, eval_data, spec.family);
  cert.pass = cert.measured_violation <= cert.threshold();
  return cert;
}

/// Certificate for the averaged iterate of `st`.
inline Certificate verify_certificate(const SolverState& st, Arch arch, std::size_t hidden,
                                      const Dataset& eval_data, const ConstraintSpec& spec,
                                      double delta) {
  return verify_certificate(averaged_params(st, arch, eval_data.dim(), hidden), st, eval_data,
                            spec, delta);
}

struct PairBound {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t stratum = 0;
  double gap = 0.0;
  double bound = 0.0;
  bool holds = false;
};

/// |q_ik - q_jk| <= tol_i + tol_j + 2 epsilon_T for every pair and stratum,
/// with the anchor's own tolerance 0.
inline std::vector<PairBound> groupwise_bounds(const GroupStats& st, const ConstraintSpec& spec,
                                               std::size_t K, double epsilon_T) {
  std::vector<PairBound> out;
  for (std::size_t k = 0; k < st.strata; ++k)
    for (std::size_t i = 0; i < st.groups; ++i)
      for (std::size_t j = i + 1; j < st.groups; ++j) {
        PairBound b{i, j, k, std::abs(st.value(i, k) - st.value(j, k)),
                    spec.tolerance(i, k, K) + spec.tolerance(j, k, K) + 2.0 * epsilon_T, false};
        b.holds = b.gap <= b.bound;
        out.push_back(b);
      }
  return out;
}

inline std::vector<PairBound> groupwise_bounds(const RewardParams& params, const Dataset& data,
                                               const ConstraintSpec& spec, double epsilon_T) {
  spec.validate(data.group_count(), data.layout().unrestricted_card);
  auto st = group_stats(params, data, spec.family);
  require_nonempty(st);
  return groupwise_bounds(st, spec, data.layout().unrestricted_card, epsilon_T);
}

}  // namespace faro
