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

// Scalar reward models r(x, y) with Bradley-Terry preference probabilities,
// the preference NLL and analytic gradients.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faro/common.hpp"
#include "faro/dataset.hpp"

namespace faro {

enum class Arch { kLinear, kMlp };

inline std::string to_string(Arch a) { return a == Arch::kLinear ? "linear" : "mlp"; }

inline Arch arch_from_string(const std::string& s) {
  if (s == "linear") return Arch::kLinear;
  if (s == "mlp") return Arch::kMlp;
  throw ValidationError("unknown reward architecture '" + s + "' (expected linear or mlp)");
}

/// Parameters of r(x, y). Inputs are z = concat(x, y) of length 2d.
///
/// Linear: r = phi . z.
/// Mlp:    r = v . tanh(W z + b); weights laid out as W (h x 2d, row-major),
///         then b (h), then v (h).
struct RewardParams {
  Arch arch = Arch::kLinear;
  std::size_t d = 1;
  std::size_t hidden = 0;
  Vector weights;

  static std::size_t count_for(Arch arch, std::size_t d, std::size_t hidden) {
    return arch == Arch::kLinear ? 2 * d : hidden * 2 * d + 2 * hidden;
  }
  std::size_t size() const { return weights.size(); }
  std::size_t input_dim() const { return 2 * d; }

  static RewardParams zeros(Arch arch, std::size_t d, std::size_t hidden = 0) {
    require(d >= 1, "reward input dimension must be >= 1");
    require(arch == Arch::kLinear || hidden >= 1, "mlp needs hidden >= 1");
    return {arch, d, arch == Arch::kLinear ? 0 : hidden, Vector(count_for(arch, d, hidden), 0.0)};
  }

  void validate() const {
    require(d >= 1, "reward input dimension must be >= 1");
    require(arch == Arch::kLinear || hidden >= 1, "mlp needs hidden >= 1");
    require(weights.size() == count_for(arch, d, hidden),
            "weight vector has length " + std::to_string(weights.size()) + ", expected " +
                std::to_string(count_for(arch, d, hidden)));
    require(all_finite(weights), "reward weights must be finite");
  }

  bool operator==(const RewardParams&) const = default;
};

/// Initial parameters for outer round `round`. Linear starts at zero;
/// the MLP draws every layer uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline RewardParams init_params(Arch arch, std::size_t d, std::size_t hidden, std::uint64_t seed,
                                std::uint64_t round) {
  RewardParams p = RewardParams::zeros(arch, d, hidden);
  if (arch == Arch::kLinear) return p;
  RandomStream rng(seed, StreamId::kInit, round);
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(2 * d));
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  const std::size_t nw = hidden * 2 * d;
  for (std::size_t j = 0; j < p.weights.size(); ++j) {
    const double bound = j < nw + hidden ? in_bound : head_bound;
    p.weights[j] = rng.uniform(-bound, bound);
  }
  return p;
}

namespace detail {

inline void check_dims(const RewardParams& params, std::span<const double> x,
                       std::span<const double> feat) {
  if (x.size() != params.d || feat.size() != params.d)
    throw ValidationError("reward input has dims (" + std::to_string(x.size()) + ", " +
                          std::to_string(feat.size()) + "), model expects " +
                          std::to_string(params.d));
}

inline double input_at(std::span<const double> x, std::span<const double> feat, std::size_t j) {
  return j < x.size() ? x[j] : feat[j - x.size()];
}

/// r(z) and, when grad is non-empty, grad += scale * dr/dphi.
inline double reward_impl(const RewardParams& params, std::span<const double> x,
                          std::span<const double> feat, std::span<double> grad, double scale) {
  const std::size_t in = params.input_dim();
  const auto& w = params.weights;
  if (params.arch == Arch::kLinear) {
    double r = 0.0;
    for (std::size_t j = 0; j < in; ++j) r += w[j] * input_at(x, feat, j);
    if (!grad.empty())
      for (std::size_t j = 0; j < in; ++j) grad[j] += scale * input_at(x, feat, j);
    return r;
  }
  const std::size_t h = params.hidden;
  const std::size_t b_off = h * in;
  const std::size_t v_off = b_off + h;
  double r = 0.0;
  for (std::size_t k = 0; k < h; ++k) {
    double pre = w[b_off + k];
    const double* row = &w[k * in];
    for (std::size_t j = 0; j < in; ++j) pre += row[j] * input_at(x, feat, j);
    const double t = std::tanh(pre);
    r += w[v_off + k] * t;
    if (!grad.empty()) {
      const double back = scale * w[v_off + k] * (1.0 - t * t);
      for (std::size_t j = 0; j < in; ++j) grad[k * in + j] += back * input_at(x, feat, j);
      grad[b_off + k] += back;
      grad[v_off + k] += scale * t;
    }
  }
  return r;
}

}  // namespace detail

inline double reward(const RewardParams& params, std::span<const double> x,
                     std::span<const double> feat) {
  detail::check_dims(params, x, feat);
  return detail::reward_impl(params, x, feat, {}, 0.0);
}

/// Gradient of r(x, feat) with respect to the weights.
inline Vector reward_grad(const RewardParams& params, std::span<const double> x,
                          std::span<const double> feat) {
  detail::check_dims(params, x, feat);
  Vector g(params.size(), 0.0);
  detail::reward_impl(params, x, feat, g, 1.0);
  return g;
}

/// Reward margin r(x, y_w) - r(x, y_l).
inline double margin(const RewardParams& params, const PreferenceExample& ex) {
  detail::check_dims(params, ex.x, ex.feat_w);
  detail::check_dims(params, ex.x, ex.feat_l);
  return detail::reward_impl(params, ex.x, ex.feat_w, {}, 0.0) -
         detail::reward_impl(params, ex.x, ex.feat_l, {}, 0.0);
}

/// Margin, with grad += scale * d(margin)/dphi.
inline double margin_accumulate(const RewardParams& params, const PreferenceExample& ex,
                                std::span<double> grad, double scale) {
  return detail::reward_impl(params, ex.x, ex.feat_w, grad, scale) -
         detail::reward_impl(params, ex.x, ex.feat_l, grad, -scale);
}

inline Vector margin_grad(const RewardParams& params, const PreferenceExample& ex) {
  Vector g(params.size(), 0.0);
  margin_accumulate(params, ex, g, 1.0);
  return g;
}

/// Bradley-Terry probability that y_w is preferred to y_l.
inline double pref_prob(const RewardParams& params, const PreferenceExample& ex) {
  return sigmoid(margin(params, ex));
}

/// Predicted correctness label Y; ties count as correct.
inline int predict_label(const RewardParams& params, const PreferenceExample& ex) {
  return margin(params, ex) >= 0.0 ? 1 : 0;
}

struct LossValue {
  double nll = 0.0;
  Vector grad;
};

/// Mean of -log sigma(margin) over `rows` (all rows when absent), with its
/// analytic gradient.
inline LossValue nll_and_grad(const RewardParams& params, const Dataset& data,
                              std::optional<std::span<const std::size_t>> rows = std::nullopt) {
  params.validate();
  require(data.dim() == params.d, "dataset dimension " + std::to_string(data.dim()) +
                                      " does not match reward model dimension " +
                                      std::to_string(params.d));
  const std::size_t n = rows ? rows->size() : data.size();
  require(n > 0, "negative log-likelihood needs a nonempty subset");
  CompensatedSum loss;
  CompensatedVector grad(params.size());
  Vector scratch(params.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = data[rows ? (*rows)[i] : i];
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double m = margin_accumulate(params, ex, scratch, 1.0);
    loss.add(-log_sigmoid(m));
    // d/dm [-log sigma(m)] = -(1 - sigma(m)) = -sigma(-m)
    grad.add_scaled(scratch, -sigmoid(-m));
  }
  const double inv = 1.0 / static_cast<double>(n);
  return {loss.value() * inv, grad.value(inv)};
}

inline double nll(const RewardParams& params, const Dataset& data) {
  params.validate();
  require(!data.empty(), "negative log-likelihood needs a nonempty dataset");
  CompensatedSum loss;
  for (const auto& ex : data.examples()) loss.add(-log_sigmoid(margin(params, ex)));
  return loss.value() / static_cast<double>(data.size());
}

}  // namespace faro
