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

// Direct alignment at toy scale: a softmax policy over the finite actions of
// a FiniteWorld, DPO / KTO / GRPO objectives in terms of its log-ratios to a
// frozen reference, and their group-fairness proxies.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "faro/common.hpp"
#include "faro/dataset.hpp"
#include "faro/fairness.hpp"
#include "faro/policy.hpp"
#include "faro/proxygda.hpp"

namespace faro {

/// pi_theta(a | x) = softmax_a(theta . f(x, a)) over the action features of
/// context x. theta_ref defines the frozen reference.
class ToyPolicyModel {
 public:
  explicit ToyPolicyModel(const FiniteWorld& world, Vector theta_ref = {})
      : world_(&world), theta_ref_(std::move(theta_ref)) {
    if (theta_ref_.empty()) theta_ref_.assign(world.dim(), 0.0);
    require(theta_ref_.size() == world.dim(), "theta_ref length must equal the world dimension");
    require(all_finite(theta_ref_), "theta_ref must be finite");
    ref_log_probs_.reserve(world.size());
    for (std::size_t x = 0; x < world.size(); ++x) ref_log_probs_.push_back(log_probs(theta_ref_, x));
  }

  const FiniteWorld& world() const { return *world_; }
  const Vector& theta_ref() const { return theta_ref_; }
  std::size_t dim() const { return world_->dim(); }

  Vector logits(std::span<const double> theta, std::size_t x) const {
    const auto& acts = world_->context(x).actions;
    Vector out(acts.size());
    for (std::size_t a = 0; a < acts.size(); ++a) out[a] = dot(theta, acts[a].features);
    return out;
  }

  static double log_sum_exp(std::span<const double> v) {
    const double top = *std::max_element(v.begin(), v.end());
    CompensatedSum s;
    for (double l : v) s.add(std::exp(l - top));
    return top + std::log(s.value());
  }

  Vector log_probs(std::span<const double> theta, std::size_t x) const {
    Vector l = logits(theta, x);
    const double z = log_sum_exp(l);
    for (double& v : l) v -= z;
    return l;
  }

  const Vector& ref_log_probs(std::size_t x) const { return ref_log_probs_[x]; }

  FinitePolicy policy(std::span<const double> theta) const {
    FinitePolicy pi;
    for (std::size_t x = 0; x < world_->size(); ++x) {
      Vector l = log_probs(theta, x);
      for (double& v : l) v = std::exp(v);
      pi.table.push_back(std::move(l));
    }
    return pi;
  }

  FinitePolicy reference() const { return policy(theta_ref_); }

  /// log pi_theta(a|x) - log pi_ref(a|x).
  double log_ratio(std::span<const double> theta, std::size_t x, std::size_t a) const {
    return log_probs(theta, x)[a] - ref_log_probs_[x][a];
  }

  /// Gradient of log pi_theta(a|x): f(x, a) - E_pi[f(x, .)].
  Vector log_prob_grad(std::span<const double> theta, std::size_t x, std::size_t a) const {
    const auto& acts = world_->context(x).actions;
    const Vector lp = log_probs(theta, x);
    Vector g = acts[a].features;
    for (std::size_t b = 0; b < acts.size(); ++b) {
      const double pb = std::exp(lp[b]);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] -= pb * acts[b].features[k];
    }
    return g;
  }

  void check_action(std::size_t x, std::size_t a) const {
    require(x < world_->size(), "context index " + std::to_string(x) + " out of range");
    require(a < world_->context(x).actions.size(),
            "action index " + std::to_string(a) + " out of range for context " + std::to_string(x));
  }

 private:
  const FiniteWorld* world_;
  Vector theta_ref_;
  std::vector<Vector> ref_log_probs_;
};

/// beta (log pi_theta - log pi_ref) read off the normalized probability tables.
inline double implicit_reward(const FinitePolicy& pi, const FinitePolicy& ref, double beta,
                              std::size_t x, std::size_t a) {
  return beta * (std::log(pi(x, a)) - std::log(ref(x, a)));
}

/// The same quantity from raw logits: beta [(theta - theta_ref) . f - (Z - Z_ref)].
inline double implicit_reward_from_logits(const ToyPolicyModel& model, std::span<const double> theta,
                                          double beta, std::size_t x, std::size_t a) {
  const Vector l = model.logits(theta, x);
  const Vector l_ref = model.logits(model.theta_ref(), x);
  return beta * ((l[a] - l_ref[a]) - (ToyPolicyModel::log_sum_exp(l) - ToyPolicyModel::log_sum_exp(l_ref)));
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

/// A preference y_w over y_l in context x, with the annotator's demographics.
struct PolicyPair {
  std::size_t context = 0;
  std::size_t winner = 0;
  std::size_t loser = 0;
  std::vector<std::size_t> s;
  std::size_t u = 0;
};

/// A single response judged desirable (1) or not (0).
struct KTOExample {
  std::size_t context = 0;
  std::size_t action = 0;
  int desirable = 0;
  std::vector<std::size_t> s;
  std::size_t u = 0;
};

/// A GRPO prompt: every action of the context is a candidate, scored by the
/// annotator's reward.
struct GrpoPrompt {
  std::size_t context = 0;
  Vector rewards;
  std::vector<std::size_t> s;
  std::size_t u = 0;
};

enum class Method { kDPO, kKTO, kGRPO };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kDPO: return "dpo";
    case Method::kKTO: return "kto";
    case Method::kGRPO: return "grpo";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "dpo") return Method::kDPO;
  if (s == "kto") return Method::kKTO;
  if (s == "grpo") return Method::kGRPO;
  throw ValidationError("unknown method '" + s + "' (expected dpo, kto or grpo)");
}

struct AlignmentData {
  std::vector<PolicyPair> pairs;
  std::vector<KTOExample> kto;
  std::vector<GrpoPrompt> prompts;
};

namespace detail {

inline std::size_t da_group(const ToyPolicyModel& model, std::span<const std::size_t> s, std::size_t u) {
  const auto& layout = model.world().layout();
  require(u < layout.unrestricted_card, "u out of range");
  return group_index(s, layout);
}

inline void validate_pairs(const ToyPolicyModel& model, std::span<const PolicyPair> pairs) {
  require(!pairs.empty(), "DPO data is empty");
  for (const auto& pr : pairs) {
    model.check_action(pr.context, pr.winner);
    model.check_action(pr.context, pr.loser);
    (void)da_group(model, pr.s, pr.u);
  }
}

inline void validate_kto(const ToyPolicyModel& model, std::span<const KTOExample> data) {
  require(!data.empty(), "KTO data is empty");
  for (const auto& ex : data) {
    model.check_action(ex.context, ex.action);
    require(ex.desirable == 0 || ex.desirable == 1, "desirable must be 0 or 1");
    (void)da_group(model, ex.s, ex.u);
  }
}

inline void validate_prompts(const ToyPolicyModel& model, std::span<const GrpoPrompt> prompts) {
  require(!prompts.empty(), "GRPO data is empty");
  for (const auto& pr : prompts) {
    require(pr.context < model.world().size(), "context index out of range");
    require(pr.rewards.size() == model.world().context(pr.context).actions.size(),
            "GRPO rewards must cover every action of the context");
    require(all_finite(pr.rewards), "GRPO rewards must be finite");
    (void)da_group(model, pr.s, pr.u);
  }
}

inline void check_beta(double beta) {
  require(beta > 0.0 && std::isfinite(beta), "beta must be positive and finite");
}

/// Margin h = log-ratio(winner) - log-ratio(loser); the normalizers cancel.
inline double pair_margin(const ToyPolicyModel& model, std::span<const double> theta, std::size_t x,
                          std::size_t w, std::size_t l) {
  const Vector lp = model.log_probs(theta, x);
  const auto& ref = model.ref_log_probs(x);
  return (lp[w] - ref[w]) - (lp[l] - ref[l]);
}

inline Vector feature_diff(const ToyPolicyModel& model, std::size_t x, std::size_t w, std::size_t l) {
  const auto& acts = model.world().context(x).actions;
  Vector g(model.dim());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = acts[w].features[k] - acts[l].features[k];
  return g;
}

inline std::size_t da_strata(const ToyPolicyModel& model, Family f) {
  return strata_count(f, model.world().layout().unrestricted_card);
}

inline void add_pair_entry(ProxyAccumulator& acc, Family family, std::size_t group, std::size_t u,
                           double beta, double h, std::span<const double> dh, Vector& scratch,
                           bool with_grad) {
  const double z = beta * h;
  const double prob = sigmoid(z);
  if (with_grad) {
    const double slope = prob * sigmoid(-z) * beta;
    for (std::size_t k = 0; k < scratch.size(); ++k) scratch[k] = slope * dh[k];
  }
  std::size_t stratum = 0;
  if (family == Family::kEO) stratum = z >= 0.0 ? 1 : 0;
  if (family == Family::kCF) stratum = u;
  acc.add(group, stratum, prob, scratch);
}

/// Quality-ordered candidate pairs (hi, lo) with rewards[hi] > rewards[lo].
inline std::vector<std::pair<std::size_t, std::size_t>> ordered_pairs(const Vector& rewards) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < rewards.size(); ++a)
    for (std::size_t b = 0; b < rewards.size(); ++b)
      if (rewards[a] > rewards[b]) out.emplace_back(a, b);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Mean of -log sigma(beta h) over preference pairs.
inline LossValue dpo_loss_and_grad(const ToyPolicyModel& model, std::span<const double> theta,
                                   std::span<const PolicyPair> pairs, double beta) {
  detail::check_beta(beta);
  detail::validate_pairs(model, pairs);
  CompensatedSum loss;
  CompensatedVector grad(model.dim());
  for (const auto& pr : pairs) {
    const double z = beta * detail::pair_margin(model, theta, pr.context, pr.winner, pr.loser);
    loss.add(-log_sigmoid(z));
    grad.add_scaled(detail::feature_diff(model, pr.context, pr.winner, pr.loser), -sigmoid(-z) * beta);
  }
  const double inv = 1.0 / static_cast<double>(pairs.size());
  return {loss.value() * inv, grad.value(inv)};
}

/// Simplified KTO: mean of -log sigma(+-beta log-ratio), sign by desirability.
inline LossValue kto_loss_and_grad(const ToyPolicyModel& model, std::span<const double> theta,
                                   std::span<const KTOExample> data, double beta) {
  detail::check_beta(beta);
  detail::validate_kto(model, data);
  CompensatedSum loss;
  CompensatedVector grad(model.dim());
  for (const auto& ex : data) {
    const double sign = ex.desirable ? 1.0 : -1.0;
    const double z = sign * beta * model.log_ratio(theta, ex.context, ex.action);
    loss.add(-log_sigmoid(z));
    grad.add_scaled(model.log_prob_grad(theta, ex.context, ex.action), -sigmoid(-z) * sign * beta);
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  return {loss.value() * inv, grad.value(inv)};
}

/// Group-relative advantages of one prompt: standardized rewards (zero when
/// all candidates tie).
inline Vector grpo_advantages(const Vector& rewards) {
  CompensatedSum mean;
  for (double r : rewards) mean.add(r);
  const double mu = mean.value() / static_cast<double>(rewards.size());
  CompensatedSum var;
  for (double r : rewards) var.add((r - mu) * (r - mu));
  const double sd = std::sqrt(var.value() / static_cast<double>(rewards.size()));
  Vector a(rewards.size(), 0.0);
  if (sd > 0.0)
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = (rewards[k] - mu) / sd;
  return a;
}

/// GRPO with the expectation over candidates taken exactly:
/// loss = -mean_x [ E_pi[A] - beta KL(pi(.|x) || pi_ref(.|x)) ].
inline LossValue grpo_loss_and_grad(const ToyPolicyModel& model, std::span<const double> theta,
                                    std::span<const GrpoPrompt> prompts, double beta) {
  detail::check_beta(beta);
  detail::validate_prompts(model, prompts);
  CompensatedSum loss;
  CompensatedVector grad(model.dim());
  for (const auto& pr : prompts) {
    const auto& acts = model.world().context(pr.context).actions;
    const Vector adv = grpo_advantages(pr.rewards);
    const Vector lp = model.log_probs(theta, pr.context);
    const auto& ref = model.ref_log_probs(pr.context);
    Vector mean_f(model.dim(), 0.0);
    for (std::size_t a = 0; a < acts.size(); ++a)
      for (std::size_t k = 0; k < mean_f.size(); ++k) mean_f[k] += std::exp(lp[a]) * acts[a].features[k];
    double objective = 0.0;
    Vector g(model.dim(), 0.0);
    for (std::size_t a = 0; a < acts.size(); ++a) {
      const double pa = std::exp(lp[a]);
      const double w = adv[a] - beta * (lp[a] - ref[a]);
      objective += pa * w;
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += pa * (acts[a].features[k] - mean_f[k]) * w;
    }
    loss.add(-objective);
    grad.add_scaled(g, -1.0);
  }
  const double inv = 1.0 / static_cast<double>(prompts.size());
  return {loss.value() * inv, grad.value(inv)};
}

// ---------------------------------------------------------------------------
// Proxies
// ---------------------------------------------------------------------------

/// Cells of sigma(beta h) over preference pairs.
inline ProxyAccumulator dpo_proxy_accumulator(const ToyPolicyModel& model, std::span<const double> theta,
                                              std::span<const PolicyPair> pairs, double beta,
                                              Family family, bool with_grad) {
  detail::check_beta(beta);
  detail::validate_pairs(model, pairs);
  ProxyAccumulator acc(family, model.world().group_count(), detail::da_strata(model, family),
                       with_grad ? model.dim() : 0);
  Vector scratch(with_grad ? model.dim() : 0);
  for (const auto& pr : pairs) {
    const double h = detail::pair_margin(model, theta, pr.context, pr.winner, pr.loser);
    const Vector dh = with_grad ? detail::feature_diff(model, pr.context, pr.winner, pr.loser) : Vector{};
    detail::add_pair_entry(acc, family, detail::da_group(model, pr.s, pr.u), pr.u, beta, h, dh, scratch,
                           with_grad);
  }
  return acc;
}

/// Cells of sigma(beta log-ratio) over desirable examples. EO is undefined
/// here because single responses carry no preference label.
inline ProxyAccumulator kto_proxy_accumulator(const ToyPolicyModel& model, std::span<const double> theta,
                                              std::span<const KTOExample> data, double beta,
                                              Family family, bool with_grad) {
  detail::check_beta(beta);
  detail::validate_kto(model, data);
  require(family != Family::kEO, "EO constraints are not defined for KTO data");
  ProxyAccumulator acc(family, model.world().group_count(), detail::da_strata(model, family),
                       with_grad ? model.dim() : 0);
  Vector scratch(with_grad ? model.dim() : 0);
  for (const auto& ex : data) {
    if (!ex.desirable) continue;
    const double z = beta * model.log_ratio(theta, ex.context, ex.action);
    const double prob = sigmoid(z);
    if (with_grad) {
      const Vector g = model.log_prob_grad(theta, ex.context, ex.action);
      const double slope = prob * sigmoid(-z) * beta;
      for (std::size_t k = 0; k < scratch.size(); ++k) scratch[k] = slope * g[k];
    }
    acc.add(detail::da_group(model, ex.s, ex.u), family == Family::kCF ? ex.u : 0, prob, scratch);
  }
  return acc;
}

/// DPO margin proxy over each prompt's reward-ordered candidate pairs.
inline ProxyAccumulator grpo_proxy_accumulator(const ToyPolicyModel& model, std::span<const double> theta,
                                               std::span<const GrpoPrompt> prompts, double beta,
                                               Family family, bool with_grad) {
  detail::check_beta(beta);
  detail::validate_prompts(model, prompts);
  ProxyAccumulator acc(family, model.world().group_count(), detail::da_strata(model, family),
                       with_grad ? model.dim() : 0);
  Vector scratch(with_grad ? model.dim() : 0);
  for (const auto& pr : prompts) {
    const std::size_t g = detail::da_group(model, pr.s, pr.u);
    for (const auto& [hi, lo] : detail::ordered_pairs(pr.rewards)) {
      const double h = detail::pair_margin(model, theta, pr.context, hi, lo);
      const Vector dh = with_grad ? detail::feature_diff(model, pr.context, hi, lo) : Vector{};
      detail::add_pair_entry(acc, family, g, pr.u, beta, h, dh, scratch, with_grad);
    }
  }
  return acc;
}

namespace detail {

inline double group_value(const GroupStats& st, std::size_t i, const char* what) {
  require(i < st.groups, "group index out of range");
  if (st.count(i, 0) == 0)
    throw InfeasibleError(std::string(what) + " proxy undefined: group " + std::to_string(i) +
                          " has no examples");
  return st.value(i, 0);
}

}  // namespace detail

/// q_i(pi_theta): group mean of sigma(beta h) over preference pairs.
inline double dpo_group_proxy(const ToyPolicyModel& model, std::span<const double> theta,
                              std::span<const PolicyPair> pairs, double beta, std::size_t i) {
  return detail::group_value(dpo_proxy_accumulator(model, theta, pairs, beta, Family::kDP, false).stats(), i,
                             "DPO");
}

/// Mean of sigma(beta log-ratio) over desirable examples of group i.
inline double kto_group_proxy(const ToyPolicyModel& model, std::span<const double> theta,
                              std::span<const KTOExample> data, double beta, std::size_t i) {
  return detail::group_value(kto_proxy_accumulator(model, theta, data, beta, Family::kDP, false).stats(), i,
                             "KTO");
}

inline double grpo_group_proxy(const ToyPolicyModel& model, std::span<const double> theta,
                               std::span<const GrpoPrompt> prompts, double beta, std::size_t i) {
  return detail::group_value(grpo_proxy_accumulator(model, theta, prompts, beta, Family::kDP, false).stats(),
                             i, "GRPO");
}

// ---------------------------------------------------------------------------
// FARO-DA training
// ---------------------------------------------------------------------------

/// Method loss plus anchored constraints on the method's proxies. Every
/// round starts from theta_ref.
class AlignmentProblem {
 public:
  AlignmentProblem(Method method, const ToyPolicyModel& model, const AlignmentData& data,
                   ConstraintSpec spec, double beta)
      : method_(method), model_(&model), data_(&data), spec_(std::move(spec)), beta_(beta) {
    detail::check_beta(beta_);
    const auto& layout = model.world().layout();
    spec_.validate(layout.group_count(), layout.unrestricted_card);
    const auto st = accumulator(model.theta_ref(), false).stats();
    min_group_ = st.counts.empty() ? 0 : st.counts.front();
    for (std::size_t g = 0; g < st.groups; ++g) {
      std::size_t n = 0;
      for (std::size_t k = 0; k < st.strata; ++k) n += st.count(g, k);
      if (n == 0 && st.groups > 1)
        throw InfeasibleError(to_string(method_) + " data has no proxy examples for group " + std::to_string(g));
      min_group_ = g == 0 ? n : std::min(min_group_, n);
    }
    if (spec_.family != Family::kEO && st.groups > 1) require_nonempty(st);
  }

  std::size_t param_count() const { return model_->dim(); }
  std::size_t constraint_count() const {
    const auto& layout = model_->world().layout();
    return spec_.constraint_count(layout.group_count(), layout.unrestricted_card);
  }
  double dual_bound() const { return spec_.dual_bound; }
  std::size_t min_group_size() const { return min_group_; }
  double beta() const { return beta_; }

  LossValue loss(const Vector& w) const {
    switch (method_) {
      case Method::kDPO: return dpo_loss_and_grad(*model_, w, data_->pairs, beta_);
      case Method::kKTO: return kto_loss_and_grad(*model_, w, data_->kto, beta_);
      case Method::kGRPO: return grpo_loss_and_grad(*model_, w, data_->prompts, beta_);
    }
    throw std::logic_error("unknown method");
  }

  ProxyAccumulator accumulator(std::span<const double> w, bool with_grad) const {
    switch (method_) {
      case Method::kDPO: return dpo_proxy_accumulator(*model_, w, data_->pairs, beta_, spec_.family, with_grad);
      case Method::kKTO: return kto_proxy_accumulator(*model_, w, data_->kto, beta_, spec_.family, with_grad);
      case Method::kGRPO:
        return grpo_proxy_accumulator(*model_, w, data_->prompts, beta_, spec_.family, with_grad);
    }
    throw std::logic_error("unknown method");
  }

  ConstraintValue constraints(const Vector& w, bool with_jacobian) const {
    if (constraint_count() == 0) return {};
    return accumulator(w, with_jacobian).constraints(spec_, model_->world().layout().unrestricted_card);
  }

  Vector initial(std::uint64_t) const { return model_->theta_ref(); }

 private:
  Method method_;
  const ToyPolicyModel* model_;
  const AlignmentData* data_;
  ConstraintSpec spec_;
  double beta_;
  std::size_t min_group_ = 0;
};

struct AlignmentResult {
  Vector theta;  // averaged iterate
  SolverState state;
};

inline AlignmentResult faro_da_train(Method method, const SolverConfig& cfg, const ToyPolicyModel& model,
                                     const AlignmentData& data, const ConstraintSpec& spec, double beta) {
  AlignmentProblem problem(method, model, data, spec, beta);
  auto st = run_proxygda(problem, cfg);
  Vector theta = st.phi_bar;
  return {std::move(theta), std::move(st)};
}

/// Max anchored-cell gap of the method's proxies at theta.
inline double alignment_violation(Method method, const ToyPolicyModel& model, const AlignmentData& data,
                                  std::span<const double> theta, double beta, Family family) {
  const ConstraintSpec spec = ConstraintSpec::uniform(family, model.world().group_count(),
                                                      model.world().layout().unrestricted_card, 0.0, 1.0);
  const AlignmentProblem problem(method, model, data, spec, beta);
  const auto st = problem.accumulator(theta, false).stats();
  require_nonempty(st);
  return true_violation(st);
}

// ---------------------------------------------------------------------------
// Planted-bias alignment data
// ---------------------------------------------------------------------------

namespace detail {

inline double annotator_score(const PlantedModel& pm, std::size_t g, const Vector& f) {
  return dot(pm.annotator_weights(g), f);
}

inline std::size_t draw_context(const FiniteWorld& world, RandomStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t x = 0; x < world.size(); ++x) {
    acc += world.context(x).prob;
    if (u < acc) return x;
  }
  return world.size() - 1;
}

}  // namespace detail

/// Pairs labelled by the planted annotators of each context's group:
/// winner by annotator score plus logistic noise, then a group-dependent flip.
inline std::vector<PolicyPair> make_synthetic_pairs(const FiniteWorld& world, const SyntheticConfig& cfg,
                                                    std::size_t n_pairs) {
  cfg.validate();
  require(world.dim() == cfg.d && world.layout() == cfg.layout, "world does not match the synthetic config");
  const PlantedModel pm(cfg.layout, cfg.d, cfg.bias_strength);
  RandomStream rng(cfg.seed, StreamId::kDataset, 2);
  std::vector<PolicyPair> out;
  for (std::size_t r = 0; r < n_pairs; ++r) {
    const std::size_t x = detail::draw_context(world, rng);
    const auto& c = world.context(x);
    require(c.actions.size() >= 2, "pairs need at least two actions per context");
    const std::size_t a = rng.below(c.actions.size());
    std::size_t b = rng.below(c.actions.size() - 1);
    if (b >= a) ++b;
    const std::size_t g = world.group_of(x);
    double m = detail::annotator_score(pm, g, c.actions[a].features) -
               detail::annotator_score(pm, g, c.actions[b].features);
    m += cfg.noise * rng.logistic();
    bool a_wins = m > 0.0;
    if (rng.bernoulli(pm.flip_probability(g))) a_wins = !a_wins;
    out.push_back({x, a_wins ? a : b, a_wins ? b : a, c.s, c.u});
  }
  return out;
}

/// Single responses: desirable when the annotator score (plus noise) is
/// positive, flipped like pair labels.
inline std::vector<KTOExample> make_synthetic_kto(const FiniteWorld& world, const SyntheticConfig& cfg,
                                                  std::size_t n_examples) {
  cfg.validate();
  require(world.dim() == cfg.d && world.layout() == cfg.layout, "world does not match the synthetic config");
  const PlantedModel pm(cfg.layout, cfg.d, cfg.bias_strength);
  RandomStream rng(cfg.seed, StreamId::kDataset, 3);
  std::vector<KTOExample> out;
  for (std::size_t r = 0; r < n_examples; ++r) {
    const std::size_t x = detail::draw_context(world, rng);
    const auto& c = world.context(x);
    const std::size_t a = rng.below(c.actions.size());
    const std::size_t g = world.group_of(x);
    bool good = detail::annotator_score(pm, g, c.actions[a].features) + cfg.noise * rng.logistic() > 0.0;
    if (rng.bernoulli(pm.flip_probability(g))) good = !good;
    out.push_back({x, a, good ? 1 : 0, c.s, c.u});
  }
  return out;
}

/// One prompt per context, candidates scored by the group's annotators.
inline std::vector<GrpoPrompt> make_synthetic_prompts(const FiniteWorld& world, const SyntheticConfig& cfg) {
  cfg.validate();
  require(world.dim() == cfg.d && world.layout() == cfg.layout, "world does not match the synthetic config");
  const PlantedModel pm(cfg.layout, cfg.d, cfg.bias_strength);
  std::vector<GrpoPrompt> out;
  for (std::size_t x = 0; x < world.size(); ++x) {
    const auto& c = world.context(x);
    GrpoPrompt pr{x, Vector(c.actions.size()), c.s, c.u};
    for (std::size_t a = 0; a < c.actions.size(); ++a)
      pr.rewards[a] = detail::annotator_score(pm, world.group_of(x), c.actions[a].features);
    out.push_back(std::move(pr));
  }
  return out;
}

}  // namespace faro
