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

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "faro/direct_alignment.hpp"
#include "test_util.hpp"

namespace faro {
namespace {

using testing::finite_difference;
using testing::relative_error;

SyntheticConfig toy_config(std::size_t K = 1, std::size_t p = 2) {
  SyntheticConfig c;
  c.seed = 11;
  c.d = 3;
  c.layout.sensitive_dims = {p};
  c.layout.unrestricted_card = K;
  return c;
}

struct Toy {
  SyntheticConfig cfg;
  FiniteWorld world;
  ToyPolicyModel model;
  AlignmentData data;

  explicit Toy(SyntheticConfig c, std::size_t contexts = 40, std::size_t pairs = 300)
      : cfg(c), world(make_synthetic_world(cfg, contexts, 4)), model(world) {
    data.pairs = make_synthetic_pairs(world, cfg, pairs);
    data.kto = make_synthetic_kto(world, cfg, pairs);
    data.prompts = make_synthetic_prompts(world, cfg);
  }

  LossValue loss(Method m, const Vector& theta, double beta) const {
    switch (m) {
      case Method::kDPO: return dpo_loss_and_grad(model, theta, data.pairs, beta);
      case Method::kKTO: return kto_loss_and_grad(model, theta, data.kto, beta);
      case Method::kGRPO: return grpo_loss_and_grad(model, theta, data.prompts, beta);
    }
    return {};
  }
};

Vector random_theta(RandomStream& rng, std::size_t d, double scale = 1.0) {
  Vector t(d);
  for (double& v : t) v = scale * rng.normal();
  return t;
}

TEST(ToyPolicy, RowsNormalize) {
  const Toy toy(toy_config());
  RandomStream rng(1, StreamId::kTest);
  const auto pi = toy.model.policy(random_theta(rng, 3, 5.0));
  for (const auto& row : pi.table) {
    double s = 0.0;
    for (double v : row) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(ToyPolicy, LogProbGradientMatchesFiniteDifferences) {
  const Toy toy(toy_config());
  RandomStream rng(2, StreamId::kTest);
  for (int t = 0; t < 20; ++t) {
    const Vector theta = random_theta(rng, 3);
    const std::size_t x = rng.below(toy.world.size());
    const std::size_t a = rng.below(4);
    const auto fd = finite_difference([&](const Vector& th) { return toy.model.log_probs(th, x)[a]; }, theta);
    EXPECT_LE(relative_error(toy.model.log_prob_grad(theta, x, a), fd), 1e-6);
  }
}

TEST(ImplicitReward, TwoComputationsAgree) {
  const Toy toy(toy_config());
  RandomStream rng(3, StreamId::kTest);
  for (int t = 0; t < 20; ++t) {
    const Vector theta = random_theta(rng, 3);
    const double beta = rng.uniform(0.1, 3.0);
    const auto pi = toy.model.policy(theta);
    const auto ref = toy.model.reference();
    for (std::size_t x = 0; x < toy.world.size(); ++x)
      for (std::size_t a = 0; a < 4; ++a)
        EXPECT_NEAR(implicit_reward(pi, ref, beta, x, a),
                    implicit_reward_from_logits(toy.model, theta, beta, x, a), 1e-12);
  }
}

TEST(Losses, ReferenceParametersGiveLn2) {
  const Toy toy(toy_config());
  const Vector ref = toy.model.theta_ref();
  for (double beta : {0.5, 1.0, 2.0}) {
    EXPECT_NEAR(toy.loss(Method::kDPO, ref, beta).nll, std::log(2.0), 1e-15);
    EXPECT_NEAR(toy.loss(Method::kKTO, ref, beta).nll, std::log(2.0), 1e-15);
  }
}

TEST(Losses, GrpoAtReferenceIsMinusExpectedAdvantage) {
  const Toy toy(toy_config());
  const auto ref = toy.model.reference();
  double expect = 0.0;
  for (const auto& pr : toy.data.prompts) {
    const auto adv = grpo_advantages(pr.rewards);
    for (std::size_t a = 0; a < adv.size(); ++a) expect -= ref(pr.context, a) * adv[a];
  }
  expect /= static_cast<double>(toy.data.prompts.size());
  EXPECT_NEAR(toy.loss(Method::kGRPO, toy.model.theta_ref(), 0.7).nll, expect, 1e-14);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  const Toy toy(toy_config(), 20, 80);
  RandomStream rng(4, StreamId::kTest);
  for (Method m : {Method::kDPO, Method::kKTO, Method::kGRPO}) {
    for (int t = 0; t < 10; ++t) {
      const Vector theta = random_theta(rng, 3);
      const double beta = rng.uniform(0.2, 2.0);
      const auto lv = toy.loss(m, theta, beta);
      const auto fd = finite_difference([&](const Vector& th) { return toy.loss(m, th, beta).nll; }, theta);
      EXPECT_LE(relative_error(lv.grad, fd), 1e-4) << to_string(m) << " trial " << t;
    }
  }
}

TEST(Losses, GrpoAdvantages) {
  const Vector adv = grpo_advantages({1.0, 2.0, 3.0});
  const double sd = std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(adv[0], -1.0 / sd, 1e-15);
  EXPECT_NEAR(adv[1], 0.0, 1e-15);
  EXPECT_NEAR(adv[2], 1.0 / sd, 1e-15);
  EXPECT_EQ(grpo_advantages({4.0, 4.0}), (Vector{0.0, 0.0}));
}

TEST(Losses, RejectBadInput) {
  const Toy toy(toy_config());
  const Vector ref = toy.model.theta_ref();
  EXPECT_THROW(dpo_loss_and_grad(toy.model, ref, toy.data.pairs, 0.0), ValidationError);
  std::vector<PolicyPair> bad{{0, 0, 9, toy.world.context(0).s, 0}};
  EXPECT_THROW(dpo_loss_and_grad(toy.model, ref, bad, 1.0), ValidationError);
  std::vector<GrpoPrompt> short_rewards{{0, {1.0}, toy.world.context(0).s, 0}};
  EXPECT_THROW(grpo_loss_and_grad(toy.model, ref, short_rewards, 1.0), ValidationError);
}

TEST(Proxies, HalfAtReference) {
  const Toy toy(toy_config());
  const Vector ref = toy.model.theta_ref();
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(dpo_group_proxy(toy.model, ref, toy.data.pairs, 1.0, i), 0.5);
    EXPECT_EQ(kto_group_proxy(toy.model, ref, toy.data.kto, 1.0, i), 0.5);
    EXPECT_EQ(grpo_group_proxy(toy.model, ref, toy.data.prompts, 1.0, i), 0.5);
  }
}

TEST(Proxies, MatchNaiveEnumeration) {
  const Toy toy(toy_config(1, 3), 60, 400);
  RandomStream rng(5, StreamId::kTest);
  const auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (int t = 0; t < 5; ++t) {
    const Vector theta = random_theta(rng, 3);
    const double beta = rng.uniform(0.3, 2.0);
    const auto pi = toy.model.policy(theta);
    const auto ref = toy.model.reference();
    const auto lr = [&](std::size_t x, std::size_t a) { return std::log(pi(x, a)) - std::log(ref(x, a)); };
    std::map<std::size_t, std::pair<double, int>> dpo, kto, grpo;
    for (const auto& pr : toy.data.pairs) {
      auto& c = dpo[pr.s[0]];
      c.first += sig(beta * (lr(pr.context, pr.winner) - lr(pr.context, pr.loser)));
      ++c.second;
    }
    for (const auto& ex : toy.data.kto) {
      if (!ex.desirable) continue;
      auto& c = kto[ex.s[0]];
      c.first += sig(beta * lr(ex.context, ex.action));
      ++c.second;
    }
    for (const auto& pr : toy.data.prompts)
      for (std::size_t a = 0; a < pr.rewards.size(); ++a)
        for (std::size_t b = 0; b < pr.rewards.size(); ++b)
          if (pr.rewards[a] > pr.rewards[b]) {
            auto& c = grpo[pr.s[0]];
            c.first += sig(beta * (lr(pr.context, a) - lr(pr.context, b)));
            ++c.second;
          }
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(dpo_group_proxy(toy.model, theta, toy.data.pairs, beta, i), dpo[i].first / dpo[i].second, 1e-12);
      EXPECT_NEAR(kto_group_proxy(toy.model, theta, toy.data.kto, beta, i), kto[i].first / kto[i].second, 1e-12);
      EXPECT_NEAR(grpo_group_proxy(toy.model, theta, toy.data.prompts, beta, i),
                  grpo[i].first / grpo[i].second, 1e-12);
    }
  }
}

TEST(Proxies, SingleStratumCfEqualsDp) {
  const Toy toy(toy_config(1, 3), 40, 300);
  RandomStream rng(6, StreamId::kTest);
  const Vector theta = random_theta(rng, 3);
  const auto dp = dpo_proxy_accumulator(toy.model, theta, toy.data.pairs, 1.0, Family::kDP, false).stats();
  const auto cf = dpo_proxy_accumulator(toy.model, theta, toy.data.pairs, 1.0, Family::kCF, false).stats();
  EXPECT_EQ(dp.values, cf.values);
  EXPECT_EQ(dp.counts, cf.counts);
}

TEST(Proxies, KtoGroupWithoutDesirableExamplesFails) {
  const Toy toy(toy_config());
  std::vector<KTOExample> data;
  for (const auto& ex : toy.data.kto)
    if (ex.desirable || ex.s[0] == 0) data.push_back(ex);
  for (auto& ex : data)
    if (ex.s[0] == 1) ex.desirable = 0;
  ASSERT_FALSE(data.empty());
  const Vector ref = toy.model.theta_ref();
  EXPECT_NO_THROW(kto_group_proxy(toy.model, ref, data, 1.0, 0));
  EXPECT_THROW(kto_group_proxy(toy.model, ref, data, 1.0, 1), InfeasibleError);
}

TEST(Proxies, KtoRejectsEqualizedOdds) {
  const Toy toy(toy_config());
  EXPECT_THROW(kto_proxy_accumulator(toy.model, toy.model.theta_ref(), toy.data.kto, 1.0, Family::kEO, false),
               ValidationError);
}

TEST(Proxies, ConstraintJacobiansMatchFiniteDifferences) {
  RandomStream rng(7, StreamId::kTest);
  for (std::size_t K : {1u, 2u}) {
    const Toy toy(toy_config(K, 3), 30, 200);
    const Family fam = K == 1 ? Family::kDP : Family::kCF;
    const auto spec = ConstraintSpec::uniform(fam, 3, K, 0.01, 1.0);
    for (Method m : {Method::kDPO, Method::kKTO, Method::kGRPO}) {
      const AlignmentProblem problem(m, toy.model, toy.data, spec, 0.8);
      for (int t = 0; t < 5; ++t) {
        const Vector theta = random_theta(rng, 3);
        const auto cv = problem.constraints(theta, true);
        for (std::size_t j = 0; j < cv.c.size(); ++j) {
          const auto fd =
              finite_difference([&](const Vector& th) { return problem.constraints(th, false).c[j]; }, theta);
          EXPECT_LE(relative_error(cv.jacobian[j], fd), 1e-4) << to_string(m) << " K=" << K << " j=" << j;
        }
      }
    }
  }
}

SolverConfig da_solver(std::size_t T) {
  SolverConfig cfg;
  cfg.T = T;
  cfg.eta_phi = 1.0;
  cfg.eps_rel = 1e-8;
  return cfg;
}

TEST(FaroDa, InfiniteTolerancesEqualUnconstrainedFit) {
  const Toy toy(toy_config(), 40, 300);
  const double inf = std::numeric_limits<double>::infinity();
  for (Method m : {Method::kDPO, Method::kKTO, Method::kGRPO}) {
    auto frozen_cfg = da_solver(3);
    frozen_cfg.freeze_dual = true;
    const auto frozen = faro_da_train(m, frozen_cfg, toy.model, toy.data,
                                      ConstraintSpec::uniform(Family::kDP, 2, 1, 0.01, 1.0), 1.0);
    const auto open = faro_da_train(m, da_solver(3), toy.model, toy.data,
                                    ConstraintSpec::uniform(Family::kDP, 2, 1, inf, 1.0), 1.0);
    EXPECT_EQ(open.theta, frozen.theta) << to_string(m);
    for (double l : open.state.lambda) EXPECT_EQ(l, 0.0);
    // Every round is the plain fit from theta_ref.
    const auto plain = inner_minimize(AlignmentProblem(m, toy.model, toy.data,
                                                       ConstraintSpec::uniform(Family::kDP, 2, 1, 0.0, 1.0), 1.0),
                                      toy.model.theta_ref(), Vector(2, 0.0), da_solver(1));
    EXPECT_EQ(open.state.phi_history.front(), plain.phi);
  }
}

TEST(FaroDa, Deterministic) {
  const Toy toy(toy_config(), 40, 300);
  const auto spec = ConstraintSpec::uniform(Family::kDP, 2, 1, 0.01, 1.0);
  const auto a = faro_da_train(Method::kDPO, da_solver(6), toy.model, toy.data, spec, 1.0);
  const auto b = faro_da_train(Method::kDPO, da_solver(6), toy.model, toy.data, spec, 1.0);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.state.lambda, b.state.lambda);
}

TEST(FaroDa, ConstrainedDpoReducesInducedPolicyViolation) {
  auto cfg = toy_config();
  cfg.bias_strength = 1.5;
  const Toy toy(cfg, 200, 2000);
  const auto spec = ConstraintSpec::uniform(Family::kDP, 2, 1, 0.01, 2.0);
  const auto fair = faro_da_train(Method::kDPO, da_solver(24), toy.model, toy.data, spec, 1.0);
  auto plain_cfg = da_solver(1);
  plain_cfg.freeze_dual = true;
  const auto plain = faro_da_train(Method::kDPO, plain_cfg, toy.model, toy.data, spec, 1.0);
  const double fair_proxy = alignment_violation(Method::kDPO, toy.model, toy.data, fair.theta, 1.0, Family::kDP);
  const double plain_proxy = alignment_violation(Method::kDPO, toy.model, toy.data, plain.theta, 1.0, Family::kDP);
  EXPECT_LT(fair_proxy, plain_proxy);
  const double fair_pi = policy_violation(toy.model.policy(fair.theta), toy.world, {});
  const double plain_pi = policy_violation(toy.model.policy(plain.theta), toy.world, {});
  EXPECT_LT(fair_pi, plain_pi);
}

TEST(FaroDa, MissingGroupIsInfeasible) {
  const Toy toy(toy_config(), 40, 300);
  AlignmentData only0;
  for (const auto& pr : toy.data.pairs)
    if (pr.s[0] == 0) only0.pairs.push_back(pr);
  EXPECT_THROW(AlignmentProblem(Method::kDPO, toy.model, only0, ConstraintSpec::uniform(Family::kDP, 2, 1, 0.0, 1.0), 1.0),
               InfeasibleError);
}

TEST(Method, StringRoundTrip) {
  for (Method m : {Method::kDPO, Method::kKTO, Method::kGRPO}) EXPECT_EQ(method_from_string(to_string(m)), m);
  EXPECT_THROW(method_from_string("ppo"), ValidationError);
}

TEST(Generators, DeterministicAndWellFormed) {
  const Toy a(toy_config(), 40, 200), b(toy_config(), 40, 200);
  ASSERT_EQ(a.data.pairs.size(), 200u);
  for (std::size_t r = 0; r < a.data.pairs.size(); ++r) {
    EXPECT_EQ(a.data.pairs[r].winner, b.data.pairs[r].winner);
    EXPECT_NE(a.data.pairs[r].winner, a.data.pairs[r].loser);
    EXPECT_EQ(a.data.pairs[r].s, a.world.context(a.data.pairs[r].context).s);
  }
  EXPECT_EQ(a.data.prompts.size(), a.world.size());
}

}  // namespace
}  // namespace faro
