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

// ProxyGDA: inner gradient descent on the Lagrangian to a relative
// tolerance, projected dual ascent on a box [0, R]^m, and averaging of the
// outer primal iterates.

#pragma once

#include <cmath>
#include <concepts>
#include <optional>
#include <string>
#include <vector>

#include "faro/common.hpp"
#include "faro/dataset.hpp"
#include "faro/fairness.hpp"
#include "faro/reward_model.hpp"

namespace faro {

struct SolverConfig {
  std::size_t T = 64;
  double eta_phi = 0.5;
  /// Dual step; empty selects R sqrt(m) / (G sqrt(T)) with G from a pre-pass.
  std::optional<double> eta_lambda;
  double eps_rel = 1e-7;
  std::size_t max_inner = 5000;
  std::uint64_t seed = 0;
  /// Start each round from the previous iterate instead of re-initializing.
  bool warm_start = false;
  /// Keep lambda at zero throughout (plain preference fit).
  bool freeze_dual = false;
  /// Consecutive loss increases tolerated before declaring divergence.
  std::size_t divergence_patience = 10;

  void validate() const {
    require(T >= 1, "solver.T must be >= 1");
    require(eta_phi > 0.0 && std::isfinite(eta_phi), "solver.eta_phi must be > 0");
    if (eta_lambda) require(*eta_lambda > 0.0 && std::isfinite(*eta_lambda), "solver.eta_lambda must be > 0");
    require(eps_rel > 0.0 && eps_rel < 1.0, "solver.eps_rel must lie in (0, 1)");
    require(max_inner >= 1, "solver.max_inner must be >= 1");
  }
};

/// A primal-dual problem: a differentiable loss over a flat parameter
/// vector plus signed constraints c(w) <= 0.
template <class P>
concept LagrangianProblem = requires(const P& p, const Vector& w, std::uint64_t round) {
  { p.param_count() } -> std::convertible_to<std::size_t>;
  { p.constraint_count() } -> std::convertible_to<std::size_t>;
  { p.dual_bound() } -> std::convertible_to<double>;
  { p.loss(w) } -> std::same_as<LossValue>;
  { p.constraints(w, true) } -> std::same_as<ConstraintValue>;
  { p.initial(round) } -> std::same_as<Vector>;
  { p.min_group_size() } -> std::convertible_to<std::size_t>;
};

/// Reward-model training problem: preference NLL under anchored constraints.
class RewardProblem {
 public:
  RewardProblem(const Dataset& data, ConstraintSpec spec, Arch arch, std::size_t hidden,
                std::uint64_t seed)
      : data_(&data), spec_(std::move(spec)), arch_(arch),
        hidden_(arch == Arch::kLinear ? 0 : hidden), seed_(seed) {
    require(!data.empty(), "training data is empty");
    spec_.validate(data.group_count(), data.layout().unrestricted_card);
    const auto& sizes = data.group_sizes();
    for (std::size_t g = 0; g < sizes.size() && data.group_count() > 1; ++g)
      if (sizes[g] == 0)
        throw InfeasibleError("constraint references empty group " + std::to_string(g));
    if (spec_.family != Family::kEO)
      require_nonempty(group_stats(RewardParams::zeros(arch_, data.dim(), std::max<std::size_t>(hidden_, 1)),
                                   data, spec_.family));
  }

  std::size_t param_count() const { return RewardParams::count_for(arch_, data_->dim(), hidden_); }
  std::size_t constraint_count() const {
    return spec_.constraint_count(data_->group_count(), data_->layout().unrestricted_card);
  }
  double dual_bound() const { return spec_.dual_bound; }
  std::size_t min_group_size() const { return data_->min_group_size(); }
  const ConstraintSpec& spec() const { return spec_; }
  const Dataset& data() const { return *data_; }

  RewardParams params(const Vector& w) const { return {arch_, data_->dim(), hidden_, w}; }

  LossValue loss(const Vector& w) const { return nll_and_grad(params(w), *data_); }

  ConstraintValue constraints(const Vector& w, bool with_jacobian) const {
    if (constraint_count() == 0) return {};
    return constraint_vector(params(w), *data_, spec_, with_jacobian);
  }

  Vector initial(std::uint64_t round) const {
    return init_params(arch_, data_->dim(), hidden_, seed_, round).weights;
  }

 private:
  const Dataset* data_;
  ConstraintSpec spec_;
  Arch arch_;
  std::size_t hidden_;
  std::uint64_t seed_;
};

/// L(w, lambda) = loss(w) + lambda . c(w).
template <LagrangianProblem P>
double lagrangian_value(const P& problem, const Vector& w, std::span<const double> lambda) {
  double value = problem.loss(w).nll;
  if (problem.constraint_count() == 0) return value;
  const auto cv = problem.constraints(w, false);
  // Skipping zero multipliers keeps infinite tolerances (c = -inf) inert.
  for (std::size_t j = 0; j < lambda.size(); ++j)
    if (lambda[j] != 0.0) value += lambda[j] * cv.c[j];
  return value;
}

/// Lagrangian value and gradient in w.
template <LagrangianProblem P>
LossValue lagrangian_and_grad(const P& problem, const Vector& w, std::span<const double> lambda) {
  LossValue out = problem.loss(w);
  bool active = false;
  for (double l : lambda) active = active || l != 0.0;
  if (!active) return out;
  const auto cv = problem.constraints(w, true);
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    if (lambda[j] == 0.0) continue;
    out.nll += lambda[j] * cv.c[j];
    for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += lambda[j] * cv.jacobian[j][k];
  }
  return out;
}

inline double lagrangian(const RewardParams& params, std::span<const double> lambda,
                         const Dataset& data, const ConstraintSpec& spec) {
  RewardProblem problem(data, spec, params.arch, params.hidden, 0);
  require(lambda.size() == problem.constraint_count(),
          "lambda has length " + std::to_string(lambda.size()) + ", expected " +
              std::to_string(problem.constraint_count()));
  return lagrangian_value(problem, params.weights, lambda);
}

struct InnerResult {
  Vector phi;
  std::size_t steps = 0;
  double value = 0.0;
  /// Final gradient norm times eta_phi; a diagnostic, not a certified bound.
  double rho_proxy = 0.0;
};

/// Fixed-step gradient descent on L(., lambda) until the relative change of
/// L drops to eps_rel or max_inner steps are spent.
template <LagrangianProblem P>
InnerResult inner_minimize(const P& problem, Vector phi, std::span<const double> lambda,
                           const SolverConfig& cfg) {
  auto cur = lagrangian_and_grad(problem, phi, lambda);
  std::size_t increases = 0;
  std::size_t steps = 0;
  while (steps < cfg.max_inner) {
    for (std::size_t k = 0; k < phi.size(); ++k) phi[k] -= cfg.eta_phi * cur.grad[k];
    ++steps;
    auto next = lagrangian_and_grad(problem, phi, lambda);
    if (!std::isfinite(next.nll))
      throw DivergenceError("Lagrangian became non-finite; reduce solver.eta_phi");
    if (next.nll > cur.nll) {
      if (++increases >= cfg.divergence_patience)
        throw DivergenceError("Lagrangian increased " + std::to_string(increases) +
                              " consecutive steps; reduce solver.eta_phi");
    } else {
      increases = 0;
    }
    const double rel = std::abs(next.nll - cur.nll) / std::max(std::abs(cur.nll), 1e-12);
    cur = std::move(next);
    if (rel <= cfg.eps_rel) break;
  }
  return {std::move(phi), steps, cur.nll, norm2(cur.grad) * cfg.eta_phi};
}

/// Projection of lambda + eta c onto [0, R]^m.
inline Vector dual_step(std::span<const double> lambda, std::span<const double> c, double eta,
                        double R) {
  require(lambda.size() == c.size(), "dual_step: lambda and c differ in length");
  Vector out(lambda.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double step = eta == 0.0 ? 0.0 : eta * c[j];
    out[j] = std::clamp(lambda[j] + step, 0.0, R);
  }
  return out;
}

struct RoundRecord {
  Vector lambda;  // multipliers used in this round's inner problem
  Vector c;       // constraints at this round's iterate
  double loss = 0.0;
  std::size_t inner_steps = 0;
  double rho_proxy = 0.0;
};

struct SolverState {
  Vector lambda;
  std::vector<Vector> phi_history;
  Vector phi_bar;
  std::vector<std::size_t> inner_steps_used;
  std::vector<RoundRecord> rounds;
  /// Largest per-round rho proxy.
  double rho_estimate = 0.0;
  /// Largest observed ||c(phi^(t))||_2.
  double G_estimate = 0.0;
  /// ||c|| bound from the random pre-pass (drives automatic eta_lambda).
  double G_prepass = 0.0;
  double eta_lambda = 0.0;
  std::size_t m = 0;
  std::size_t T = 0;
  std::size_t n_min = 0;
  double dual_bound = 0.0;

  const Vector& last_iterate() const { return phi_history.back(); }
};

/// Max ||c||_2 over `probes` random parameter vectors with N(0, 1) entries.
template <LagrangianProblem P>
double estimate_constraint_bound(const P& problem, std::uint64_t seed, std::size_t probes = 10) {
  if (problem.constraint_count() == 0) return 0.0;
  RandomStream rng(seed, StreamId::kGradientProbe);
  double G = 0.0;
  for (std::size_t t = 0; t < probes; ++t) {
    Vector w(problem.param_count());
    for (double& v : w) v = rng.normal();
    G = std::max(G, norm2(problem.constraints(w, false).c));
  }
  return G;
}

template <LagrangianProblem P>
SolverState run_proxygda(const P& problem, const SolverConfig& cfg) {
  cfg.validate();
  SolverState st;
  st.m = problem.constraint_count();
  st.T = cfg.T;
  st.n_min = problem.min_group_size();
  st.dual_bound = problem.dual_bound();
  st.lambda.assign(st.m, 0.0);
  st.phi_bar.assign(problem.param_count(), 0.0);
  if (st.m > 0) {
    st.G_prepass = estimate_constraint_bound(problem, cfg.seed);
    if (cfg.eta_lambda) {
      st.eta_lambda = *cfg.eta_lambda;
    } else {
      const double G = std::max(st.G_prepass, 1e-12);
      st.eta_lambda = st.dual_bound * std::sqrt(static_cast<double>(st.m)) /
                      (G * std::sqrt(static_cast<double>(cfg.T)));
    }
  }
  Vector start;
  for (std::size_t t = 0; t < cfg.T; ++t) {
    if (!cfg.warm_start || t == 0) start = problem.initial(t);
    auto inner = inner_minimize(problem, start, st.lambda, cfg);
    RoundRecord rec;
    rec.lambda = st.lambda;
    rec.loss = problem.loss(inner.phi).nll;
    rec.inner_steps = inner.steps;
    rec.rho_proxy = inner.rho_proxy;
    if (st.m > 0) {
      rec.c = problem.constraints(inner.phi, false).c;
      st.G_estimate = std::max(st.G_estimate, norm2(rec.c));
      if (!cfg.freeze_dual) st.lambda = dual_step(st.lambda, rec.c, st.eta_lambda, st.dual_bound);
    }
    st.rho_estimate = std::max(st.rho_estimate, inner.rho_proxy);
    st.inner_steps_used.push_back(inner.steps);
    const double inv = 1.0 / static_cast<double>(t + 1);
    for (std::size_t k = 0; k < st.phi_bar.size(); ++k)
      st.phi_bar[k] += (inner.phi[k] - st.phi_bar[k]) * inv;
    if (cfg.warm_start) start = inner.phi;
    st.phi_history.push_back(std::move(inner.phi));
    st.rounds.push_back(std::move(rec));
  }
  return st;
}

/// Algorithm entry point for reward models.
inline SolverState run(const SolverConfig& cfg, const Dataset& data, const ConstraintSpec& spec,
                       Arch arch, std::size_t hidden = 0) {
  RewardProblem problem(data, spec, arch, hidden, cfg.seed);
  return run_proxygda(problem, cfg);
}

inline RewardParams averaged_params(const SolverState& st, Arch arch, std::size_t d, std::size_t hidden) {
  return {arch, d, arch == Arch::kLinear ? 0 : hidden, st.phi_bar};
}

}  // namespace faro
