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

// Finite worlds and closed-form KL-regularized (Gibbs) policies: KL,
// event-probability disparities, Pinsker checks, beta-monotonicity and the
// reward-to-policy transfer experiment.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "faro/common.hpp"
#include "faro/dataset.hpp"
#include "faro/reward_model.hpp"

namespace faro {

struct WorldAction {
  Vector features;
  /// Audited event indicator f(x, a).
  int f = 0;
  /// Ground-truth quality (used for top-1 accuracy).
  double quality = 0.0;
  /// Reference-policy probability; NaN means uniform over the context.
  double ref_prob = std::numeric_limits<double>::quiet_NaN();
};

struct WorldContext {
  std::string id;
  Vector features;
  std::vector<std::size_t> s;
  std::size_t u = 0;
  double prob = 0.0;
  std::vector<WorldAction> actions;
};

class FiniteWorld {
 public:
  FiniteWorld() = default;
  FiniteWorld(AttributeLayout layout, std::size_t d, std::vector<WorldContext> contexts)
      : layout_(std::move(layout)), d_(d), contexts_(std::move(contexts)) {
    layout_.validate();
    require(!contexts_.empty(), "world needs at least one context");
    CompensatedSum total;
    group_mass_.assign(layout_.group_count(), 0.0);
    for (std::size_t x = 0; x < contexts_.size(); ++x) {
      const auto& c = contexts_[x];
      const std::string where = "context '" + c.id + "': ";
      require(c.features.size() == d_, where + "feature length must be " + std::to_string(d_));
      require(!c.actions.empty(), where + "needs at least one action");
      require(c.prob >= 0.0 && c.prob <= 1.0, where + "probability must lie in [0, 1]");
      require(c.u < layout_.unrestricted_card, where + "u out of range");
      for (const auto& a : c.actions) {
        require(a.features.size() == d_, where + "action feature length must be " + std::to_string(d_));
        require(a.f == 0 || a.f == 1, where + "action f must be 0 or 1");
      }
      groups_.push_back(group_index(c.s, layout_));
      group_mass_[groups_.back()] += c.prob;
      total.add(c.prob);
    }
    require(std::abs(total.value() - 1.0) <= 1e-12, "context probabilities must sum to 1");
  }

  const AttributeLayout& layout() const { return layout_; }
  std::size_t dim() const { return d_; }
  std::size_t size() const { return contexts_.size(); }
  const WorldContext& context(std::size_t x) const { return contexts_[x]; }
  const std::vector<WorldContext>& contexts() const { return contexts_; }
  std::size_t group_of(std::size_t x) const { return groups_[x]; }
  std::size_t group_count() const { return layout_.group_count(); }
  double group_mass(std::size_t g) const { return group_mass_[g]; }

  /// Index of the highest-quality action of context x (first on ties).
  std::size_t best_action(std::size_t x) const {
    const auto& acts = contexts_[x].actions;
    std::size_t best = 0;
    for (std::size_t a = 1; a < acts.size(); ++a)
      if (acts[a].quality > acts[best].quality) best = a;
    return best;
  }

 private:
  AttributeLayout layout_;
  std::size_t d_ = 1;
  std::vector<WorldContext> contexts_;
  std::vector<std::size_t> groups_;
  Vector group_mass_;
};

/// Per-context conditional distributions over actions.
struct FinitePolicy {
  std::vector<Vector> table;

  double operator()(std::size_t x, std::size_t a) const { return table[x][a]; }
};

/// The audited event A as an indicator over (context, action).
struct PolicyFairnessSpec {
  std::function<bool(const FiniteWorld&, std::size_t, std::size_t)> outcome =
      [](const FiniteWorld& w, std::size_t x, std::size_t a) { return w.context(x).actions[a].f == 1; };

  /// Event "the ground-truth best action is chosen".
  static PolicyFairnessSpec best_action() {
    return {[](const FiniteWorld& w, std::size_t x, std::size_t a) { return a == w.best_action(x); }};
  }
};

inline FinitePolicy reference_policy(const FiniteWorld& world) {
  FinitePolicy pi;
  for (const auto& c : world.contexts()) {
    Vector row(c.actions.size());
    const bool uniform = std::isnan(c.actions.front().ref_prob);
    CompensatedSum total;
    for (std::size_t a = 0; a < row.size(); ++a) {
      row[a] = uniform ? 1.0 / static_cast<double>(row.size()) : c.actions[a].ref_prob;
      require(std::isfinite(row[a]) && row[a] >= 0.0, "context '" + c.id + "': bad ref_prob");
      total.add(row[a]);
    }
    require(std::abs(total.value() - 1.0) <= 1e-12, "context '" + c.id + "': ref_prob must sum to 1");
    pi.table.push_back(std::move(row));
  }
  return pi;
}

inline void check_policy_shape(const FinitePolicy& pi, const FiniteWorld& world) {
  require(pi.table.size() == world.size(), "policy has wrong number of contexts");
  for (std::size_t x = 0; x < world.size(); ++x)
    require(pi.table[x].size() == world.context(x).actions.size(),
            "policy row " + std::to_string(x) + " has wrong number of actions");
}

/// pi_beta(a|x) proportional to pi_ref(a|x) exp(r(x, a) / beta), normalized
/// in log space.
inline FinitePolicy gibbs_policy(const std::function<double(std::size_t, std::size_t)>& reward_fn,
                                 const FiniteWorld& world, const FinitePolicy& ref, double beta) {
  require(beta > 0.0 && std::isfinite(beta), "beta must be positive and finite");
  check_policy_shape(ref, world);
  FinitePolicy pi;
  pi.table.reserve(world.size());
  for (std::size_t x = 0; x < world.size(); ++x) {
    const std::size_t n = world.context(x).actions.size();
    Vector logits(n);
    for (std::size_t a = 0; a < n; ++a) {
      if (!(ref(x, a) > 0.0))
        throw ValidationError("reference policy puts zero mass on action " + std::to_string(a) +
                              " of context '" + world.context(x).id + "'");
      logits[a] = std::log(ref(x, a)) + reward_fn(x, a) / beta;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    CompensatedSum z;
    for (double l : logits) z.add(std::exp(l - top));
    const double log_z = top + std::log(z.value());
    for (double& l : logits) l = std::exp(l - log_z);
    pi.table.push_back(std::move(logits));
  }
  return pi;
}

inline FinitePolicy gibbs_policy(const RewardParams& params, const FiniteWorld& world,
                                 const FinitePolicy& ref, double beta) {
  require(params.d == world.dim(), "reward model dimension does not match world");
  return gibbs_policy(
      [&](std::size_t x, std::size_t a) {
        const auto& c = world.context(x);
        return reward(params, c.features, c.actions[a].features);
      },
      world, ref, beta);
}

/// KL(pi(.|x) || ref(.|x)) for one context.
inline double context_kl(const FinitePolicy& pi, const FinitePolicy& ref, std::size_t x) {
  CompensatedSum s;
  for (std::size_t a = 0; a < pi.table[x].size(); ++a) {
    const double p = pi(x, a);
    if (p <= 0.0) continue;
    if (!(ref(x, a) > 0.0))
      throw ValidationError("KL undefined: policy puts mass where the reference has none (context " +
                            std::to_string(x) + ", action " + std::to_string(a) + ")");
    s.add(p * (std::log(p) - std::log(ref(x, a))));
  }
  return std::max(0.0, s.value());
}

/// Context-distribution-weighted KL, equal to the KL of the joint (x, a) laws.
inline double kl(const FinitePolicy& pi, const FinitePolicy& ref, const FiniteWorld& world) {
  check_policy_shape(pi, world);
  check_policy_shape(ref, world);
  CompensatedSum s;
  for (std::size_t x = 0; x < world.size(); ++x)
    if (world.context(x).prob > 0.0) s.add(world.context(x).prob * context_kl(pi, ref, x));
  return std::max(0.0, s.value());
}

/// KL restricted to group g's contexts, weighted by P(x | S = g).
inline double group_kl(const FinitePolicy& pi, const FinitePolicy& ref, const FiniteWorld& world,
                       std::size_t g) {
  const double mass = world.group_mass(g);
  require(mass > 0.0, "group " + std::to_string(g) + " has no context mass");
  CompensatedSum s;
  for (std::size_t x = 0; x < world.size(); ++x)
    if (world.group_of(x) == g && world.context(x).prob > 0.0)
      s.add(world.context(x).prob / mass * context_kl(pi, ref, x));
  return std::max(0.0, s.value());
}

/// P_pi(A) under the joint law x ~ D, a ~ pi(.|x).
inline double event_probability(const FinitePolicy& pi, const FiniteWorld& world,
                                const PolicyFairnessSpec& spec) {
  check_policy_shape(pi, world);
  CompensatedSum s;
  for (std::size_t x = 0; x < world.size(); ++x)
    for (std::size_t a = 0; a < pi.table[x].size(); ++a)
      if (spec.outcome(world, x, a)) s.add(world.context(x).prob * pi(x, a));
  return s.value();
}

/// P_pi(A | S = i) for every group.
inline Vector group_event_probabilities(const FinitePolicy& pi, const FiniteWorld& world,
                                        const PolicyFairnessSpec& spec) {
  check_policy_shape(pi, world);
  const std::size_t p = world.group_count();
  std::vector<CompensatedSum> sums(p);
  for (std::size_t x = 0; x < world.size(); ++x)
    for (std::size_t a = 0; a < pi.table[x].size(); ++a)
      if (spec.outcome(world, x, a)) sums[world.group_of(x)].add(world.context(x).prob * pi(x, a));
  Vector out(p);
  for (std::size_t g = 0; g < p; ++g) {
    if (!(world.group_mass(g) > 0.0))
      throw InfeasibleError("group " + std::to_string(g) + " has no context mass in the world");
    out[g] = sums[g].value() / world.group_mass(g);
  }
  return out;
}

/// Delta(pi) = max_{i,j} |P_pi(A | S=i) - P_pi(A | S=j)|.
inline double policy_violation(const FinitePolicy& pi, const FiniteWorld& world,
                               const PolicyFairnessSpec& spec) {
  const auto q = group_event_probabilities(pi, world, spec);
  const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
  return *hi - *lo;
}

/// Expected top-1 accuracy: probability mass on each context's best action.
inline double expected_accuracy(const FinitePolicy& pi, const FiniteWorld& world) {
  check_policy_shape(pi, world);
  CompensatedSum s;
  for (std::size_t x = 0; x < world.size(); ++x) s.add(world.context(x).prob * pi(x, world.best_action(x)));
  return s.value();
}

struct PinskerCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// |P_pi(A) - P_ref(A)| <= sqrt(KL / 2) on the joint law.
inline PinskerCheck pinsker_check(const FinitePolicy& pi, const FinitePolicy& ref,
                                  const FiniteWorld& world, const PolicyFairnessSpec& spec) {
  PinskerCheck out;
  out.lhs = std::abs(event_probability(pi, world, spec) - event_probability(ref, world, spec));
  out.rhs = std::sqrt(kl(pi, ref, world) / 2.0);
  out.holds = out.lhs <= out.rhs + 1e-12;
  return out;
}

struct GroupDrift {
  std::size_t group = 0;
  double shift = 0.0;     // |P_pi(A|S=i) - P_ref(A|S=i)|
  double group_kl = 0.0;  // KL_i
  double bound = 0.0;     // sqrt(2 KL_i)
  bool holds = false;
};

/// Per-group drift |P_pi(A|S=i) - P_ref(A|S=i)| <= sqrt(2 KL_i).
inline std::vector<GroupDrift> drift_check(const FinitePolicy& pi, const FinitePolicy& ref,
                                           const FiniteWorld& world, const PolicyFairnessSpec& spec) {
  const auto qp = group_event_probabilities(pi, world, spec);
  const auto qr = group_event_probabilities(ref, world, spec);
  std::vector<GroupDrift> out;
  for (std::size_t g = 0; g < world.group_count(); ++g) {
    GroupDrift d{g, std::abs(qp[g] - qr[g]), group_kl(pi, ref, world, g), 0.0, false};
    d.bound = std::sqrt(2.0 * d.group_kl);
    d.holds = d.shift <= d.bound + 1e-12;
    out.push_back(d);
  }
  return out;
}

struct BetaMonotonicity {
  Vector betas;
  Vector kls;
  bool monotone = true;
};

/// KL of the Gibbs policy along an increasing beta grid; monotone when no
/// KL rises by more than 1e-9.
inline BetaMonotonicity beta_monotonicity(const RewardParams& params, const FiniteWorld& world,
                                          const FinitePolicy& ref, std::span<const double> betas) {
  require(!betas.empty(), "beta grid is empty");
  for (std::size_t k = 0; k < betas.size(); ++k) {
    require(betas[k] > 0.0, "betas must be positive");
    if (k > 0) require(betas[k] >= betas[k - 1], "betas must be sorted ascending");
  }
  BetaMonotonicity out;
  out.betas.assign(betas.begin(), betas.end());
  for (double b : betas) out.kls.push_back(kl(gibbs_policy(params, world, ref, b), ref, world));
  for (std::size_t k = 1; k < out.kls.size(); ++k)
    if (out.kls[k] > out.kls[k - 1] + 1e-9) out.monotone = false;
  return out;
}

struct TransferReport {
  double beta = 0.0;
  double epsilon_T = 0.0;
  double delta_fair = 0.0;
  double delta_plain = 0.0;
  double delta_ref = 0.0;
  double kl_fair = 0.0;
  double kl_plain = 0.0;
  /// Delta(pi_fair) <= Delta(pi_plain) + epsilon_T
  bool transfer_holds = false;
  /// Delta(pi) <= Delta(pi_ref) + sqrt(2 KL) for each policy
  bool drift_fair_holds = false;
  bool drift_plain_holds = false;
};

inline TransferReport transfer_experiment(const RewardParams& fair, const RewardParams& plain,
                                          const FiniteWorld& world, const FinitePolicy& ref,
                                          double beta, const PolicyFairnessSpec& spec,
                                          double epsilon_T) {
  TransferReport r;
  r.beta = beta;
  r.epsilon_T = epsilon_T;
  const auto pf = gibbs_policy(fair, world, ref, beta);
  const auto pp = gibbs_policy(plain, world, ref, beta);
  r.delta_fair = policy_violation(pf, world, spec);
  r.delta_plain = policy_violation(pp, world, spec);
  r.delta_ref = policy_violation(ref, world, spec);
  r.kl_fair = kl(pf, ref, world);
  r.kl_plain = kl(pp, ref, world);
  r.transfer_holds = r.delta_fair <= r.delta_plain + epsilon_T;
  r.drift_fair_holds = r.delta_fair <= r.delta_ref + std::sqrt(2.0 * r.kl_fair) + 1e-12;
  r.drift_plain_holds = r.delta_plain <= r.delta_ref + std::sqrt(2.0 * r.kl_plain) + 1e-12;
  return r;
}

/// World drawn from the planted-bias process: contexts with uniform
/// demographics and equal probability, actions drawn like generator
/// responses, quality from the unbiased weights, and f marking the best
/// action.
inline FiniteWorld make_synthetic_world(const SyntheticConfig& cfg, std::size_t n_contexts,
                                        std::size_t n_actions) {
  cfg.validate();
  require(n_contexts >= 1, "world.n_contexts must be >= 1");
  require(n_actions >= 1, "world.n_actions must be >= 1");
  const PlantedModel model(cfg.layout, cfg.d, cfg.bias_strength);
  const Vector qw = model.quality_weights();
  RandomStream rng(cfg.seed, StreamId::kWorld);
  std::vector<WorldContext> contexts;
  for (std::size_t x = 0; x < n_contexts; ++x) {
    WorldContext c;
    c.id = "c" + std::to_string(x);
    c.s.resize(cfg.layout.attribute_count());
    for (std::size_t n = 0; n < c.s.size(); ++n) c.s[n] = rng.below(cfg.layout.sensitive_dims[n]);
    c.u = rng.below(cfg.layout.unrestricted_card);
    c.prob = 1.0 / static_cast<double>(n_contexts);
    c.features.resize(cfg.d);
    for (double& v : c.features) v = rng.normal();
    const std::size_t g = group_index(c.s, cfg.layout);
    for (std::size_t a = 0; a < n_actions; ++a) {
      WorldAction act;
      act.features = model.draw_response(g, rng);
      act.quality = dot(qw, act.features);
      c.actions.push_back(std::move(act));
    }
    std::size_t best = 0;
    for (std::size_t a = 1; a < n_actions; ++a)
      if (c.actions[a].quality > c.actions[best].quality) best = a;
    c.actions[best].f = 1;
    contexts.push_back(std::move(c));
  }
  // Equal weights need not sum to exactly 1 in floating point; put the
  // rounding residue on the last context.
  CompensatedSum total;
  for (std::size_t x = 0; x + 1 < contexts.size(); ++x) total.add(contexts[x].prob);
  contexts.back().prob = 1.0 - total.value();
  return FiniteWorld(cfg.layout, cfg.d, std::move(contexts));
}

}  // namespace faro
