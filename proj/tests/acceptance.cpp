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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. argv[1] is a scratch directory for the
// command reports.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "faro/commands.hpp"
#include "faro/faro.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace faro;
using testing::finite_difference;
using testing::relative_error;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path g_root;

CommandContext context(const Json& config, const std::string& sub) {
  CommandContext c;
  c.config = config;
  c.base_dir = g_root;
  c.out_dir = g_root / sub;
  fs::create_directories(c.out_dir);
  return c;
}

const Json kPlantedData = {{"synthetic", {{"n_examples", 2000}, {"d", 5}, {"bias_strength", 1.0}}}};
const Json kSolver = {{"T", 64}, {"eta_phi", 1.0}, {"eps_rel", 1e-8}};
const Json kWorld = {{"synthetic", {{"n_contexts", 400}, {"n_actions", 4}, {"seed", 11}}}};

Json train_config() {
  return {{"seed", 7},
          {"data", kPlantedData},
          {"spec", {{"family", "dp"}, {"tolerance", 0.02}, {"R", 2.0}}},
          {"solver", kSolver},
          {"delta", 0.05},
          {"baseline", true}};
}

Json transfer_config() {
  return {{"seed", 7},
          {"data", kPlantedData},
          {"world", kWorld},
          {"spec", {{"family", "dp"}, {"tolerance", 0.02}, {"R", 2.0}}},
          {"solver", kSolver},
          {"betas", {0.03, 0.1, 0.3, 1.0, 3.0}},
          {"delta", 0.05}};
}

Json pareto_config() {
  return {{"seed", 7},
          {"data", kPlantedData},
          {"world", kWorld},
          {"family", "dp"},
          {"R", 2.0},
          {"betas", {0.1, 0.3, 1.0, 3.0}},
          {"tolerances", {0.01, 0.05, 0.2}},
          {"solver", {{"T", 32}, {"eta_phi", 1.0}, {"eps_rel", 1e-8}}},
          {"alphas", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}}};
}

// Reports from the first runs of criteria 4, 8 and 10, kept for criterion 12.
Json g_train, g_transfer, g_pareto;

// ---------------------------------------------------------------------------

Outcome gradient_oracle() {
  double worst_nll = 0, worst_c = 0, worst_lag = 0, worst_dpo = 0, worst_kto = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RandomStream rng(seed, StreamId::kTest, 1);
    AttributeLayout layout;
    layout.sensitive_dims = {2 + rng.below(3)};
    layout.unrestricted_card = 1 + rng.below(3);
    const std::size_t d = 1 + rng.below(4);
    const Dataset ds = testing::covering_dataset(rng, layout, d, 60 + rng.below(80));
    for (Arch arch : {Arch::kLinear, Arch::kMlp}) {
      const auto params = testing::random_params(rng, arch, d, 4, 0.5);
      const auto make = [&](const Vector& w) { return RewardParams{arch, d, params.hidden, w}; };
      const auto lv = nll_and_grad(params, ds);
      worst_nll = std::max(worst_nll, relative_error(lv.grad, finite_difference(
                                                                  [&](const Vector& w) { return nll(make(w), ds); },
                                                                  params.weights)));
      for (Family f : {Family::kDP, Family::kEO, Family::kCF}) {
        if (group_stats(params, ds, f).first_empty()) continue;
        const auto spec = ConstraintSpec::uniform(f, layout.group_count(), layout.unrestricted_card, 0.03, 2.0);
        const auto cv = constraint_vector(params, ds, spec);
        for (std::size_t j = 0; j < cv.c.size(); ++j) {
          // EO strata stay at their values under params, as in the analytic Jacobian.
          const auto fd = finite_difference(
              [&](const Vector& w) {
                if (f != Family::kEO) return constraint_vector(make(w), ds, spec, false).c[j];
                ProxyAccumulator acc(f, layout.group_count(), 2, 0);
                for (std::size_t r = 0; r < ds.size(); ++r)
                  acc.add(ds.group_of(r), margin(params, ds[r]) >= 0.0 ? 1 : 0, pref_prob(make(w), ds[r]));
                return acc.constraints(spec, layout.unrestricted_card).c[j];
              },
              params.weights);
          worst_c = std::max(worst_c, relative_error(cv.jacobian[j], fd));
        }
        if (f == Family::kEO) continue;
        RewardProblem problem(ds, spec, arch, params.hidden, 0);
        Vector lambda(problem.constraint_count());
        for (double& l : lambda) l = rng.uniform(0.0, 2.0);
        const auto lg = lagrangian_and_grad(problem, params.weights, lambda);
        const auto fd = finite_difference([&](const Vector& w) { return lagrangian_value(problem, w, lambda); },
                                          params.weights);
        worst_lag = std::max(worst_lag, relative_error(lg.grad, fd));
      }
    }
    SyntheticConfig wc;
    wc.seed = seed;
    wc.d = 3;
    const auto world = make_synthetic_world(wc, 20, 4);
    const ToyPolicyModel model(world);
    const auto pairs = make_synthetic_pairs(world, wc, 80);
    const auto kto = make_synthetic_kto(world, wc, 80);
    Vector theta(3);
    for (double& v : theta) v = rng.normal();
    const double beta = rng.uniform(0.2, 2.0);
    worst_dpo = std::max(worst_dpo, relative_error(dpo_loss_and_grad(model, theta, pairs, beta).grad,
                                                   finite_difference(
                                                       [&](const Vector& t) {
                                                         return dpo_loss_and_grad(model, t, pairs, beta).nll;
                                                       },
                                                       theta)));
    worst_kto = std::max(worst_kto, relative_error(kto_loss_and_grad(model, theta, kto, beta).grad,
                                                   finite_difference(
                                                       [&](const Vector& t) {
                                                         return kto_loss_and_grad(model, t, kto, beta).nll;
                                                       },
                                                       theta)));
  }
  const double worst = std::max({worst_nll, worst_c, worst_lag, worst_dpo, worst_kto});
  return {worst <= 1e-4, fmt("20 seeds; max rel err nll %.1e, constraints %.1e, lagrangian %.1e, dpo %.1e, kto %.1e",
                             worst_nll, worst_c, worst_lag, worst_dpo, worst_kto)};
}

Outcome proxy_oracle() {
  RandomStream rng(2, StreamId::kTest, 2);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int t = 0; t < 50; ++t) {
    AttributeLayout layout;
    layout.sensitive_dims = {1 + rng.below(5)};
    layout.unrestricted_card = 1 + rng.below(4);
    const std::size_t d = 1 + rng.below(3);
    const std::size_t n = std::max<std::size_t>(layout.group_count() * layout.unrestricted_card, 20 + rng.below(181));
    const Dataset ds = testing::covering_dataset(rng, layout, d, std::min<std::size_t>(n, 200));
    const auto params = testing::random_params(rng, t % 2 ? Arch::kMlp : Arch::kLinear, d, 3);
    for (Family f : {Family::kDP, Family::kEO, Family::kCF}) {
      const auto st = group_stats(params, ds, f);
      for (std::size_t i = 0; i < st.groups; ++i)
        for (std::size_t k = 0; k < st.strata; ++k) {
          std::size_t count = 0;
          const double naive = testing::naive_cell_mean(params, ds, f, i, k, &count);
          if (count != st.count(i, k)) return {false, fmt("instance %d: cell count mismatch", t)};
          if (count) worst = std::max(worst, std::abs(naive - st.value(i, k)));
        }
      if (!st.first_empty()) {
        worst = std::max(worst, std::abs(true_violation(st) - testing::naive_violation(params, ds, f)));
        ++checked;
      }
    }
  }
  return {worst <= 1e-12, fmt("50 instances, %zu violations compared; max abs diff %.1e", checked, worst)};
}

Outcome constraint_counting() {
  RandomStream rng(3, StreamId::kTest, 3);
  std::size_t cases = 0;
  for (std::size_t p = 2; p <= 6; ++p)
    for (std::size_t K = 1; K <= 4; ++K) {
      AttributeLayout layout;
      layout.sensitive_dims = {p};
      layout.unrestricted_card = K;
      const Dataset ds = testing::covering_dataset(rng, layout, 2, 600);
      const auto params = testing::random_params(rng, Arch::kLinear, 2, 0);
      const std::size_t want[] = {2 * (p - 1), 4 * (p - 1), 2 * K * (p - 1)};
      const Family fams[] = {Family::kDP, Family::kEO, Family::kCF};
      for (int k = 0; k < 3; ++k) {
        const auto spec = ConstraintSpec::uniform(fams[k], p, K, 0.0, 1.0);
        const auto len = constraint_vector(params, ds, spec, false).c.size();
        if (len != want[k])
          return {false, fmt("%s p=%zu K=%zu: length %zu, expected %zu", to_string(fams[k]).c_str(), p, K, len, want[k])};
        ++cases;
      }
    }
  return {true, fmt("%zu (family, p, K) cases", cases)};
}

Outcome fairness_reduction() {
  g_train = cmd_train(context(train_config(), "c4"));
  const auto& r = g_train["result"];
  const double gamma = 0.02;
  const double eps = r["slack"]["epsilon_T"].get<double>();
  const double fair_delta = r["train"]["violation"].get<double>();
  const double fair_nll = r["train"]["nll"].get<double>();
  const double base_delta = r["baseline"]["violation"].get<double>();
  const double base_nll = r["baseline"]["nll"].get<double>();
  const bool floor = base_delta >= 0.15;
  const bool within = fair_delta <= gamma + eps;
  const bool nll_ok = fair_nll <= 1.10 * base_nll;
  return {floor && within && nll_ok,
          fmt("unconstrained delta %.4f (>= 0.15: %s); FARO delta %.4f <= %.2f + eps_T %.4f: %s; "
              "NLL %.4f vs %.4f (+%.1f%%)",
              base_delta, floor ? "yes" : "no", fair_delta, gamma, eps, within ? "yes" : "no", fair_nll, base_nll,
              100.0 * (fair_nll / base_nll - 1.0))};
}

Outcome convergence_rate() {
  SyntheticConfig g;
  const Dataset ds = generate_synthetic(g);
  const auto spec = ConstraintSpec::uniform(Family::kDP, 2, 1, 0.02, 2.0);
  const std::size_t Ts[] = {4, 16, 64, 256};
  Vector xs, ys;
  std::string trace;
  for (std::size_t T : Ts) {
    SolverConfig cfg;
    cfg.T = T;
    cfg.eta_phi = 1.0;
    cfg.eps_rel = 1e-8;
    const auto st = run(cfg, ds, spec, Arch::kLinear);
    const auto c = constraint_vector(averaged_params(st, Arch::kLinear, g.d, 0), ds, spec, false).c;
    const double v = max_violation(c);
    trace += fmt("%sT=%zu: %.3e", trace.empty() ? "" : ", ", T, v);
    if (!(v > 0.0)) return {false, "violation reached zero, slope undefined (" + trace + ")"};
    xs.push_back(std::log(static_cast<double>(T)));
    ys.push_back(std::log(v));
  }
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k] / xs.size();
    my += ys[k] / ys.size();
  }
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  const double slope = sxy / sxx;
  return {slope <= -0.4, fmt("slope %.3f (%s)", slope, trace.c_str())};
}

FinitePolicy random_policy(RandomStream& rng, const FiniteWorld& w) {
  FinitePolicy pi;
  for (const auto& c : w.contexts()) {
    Vector row(c.actions.size());
    double t = 0.0;
    // Heavy-tailed weights give near-deterministic rows as well as flat ones.
    for (double& v : row) t += (v = std::exp(3.0 * rng.normal()));
    for (double& v : row) v /= t;
    pi.table.push_back(std::move(row));
  }
  return pi;
}

Outcome pinsker_drift() {
  RandomStream rng(6, StreamId::kTest, 6);
  std::size_t pinsker_bad = 0, drift_bad = 0, drift_checks = 0;
  double tightest = 0.0;
  for (int t = 0; t < 500; ++t) {
    const auto w = testing::random_world(rng, 2, t % 2 == 0);
    const FinitePolicy ref = t % 3 == 0 ? reference_policy(w) : random_policy(rng, w);
    const FinitePolicy pi = random_policy(rng, w);
    const auto pk = pinsker_check(pi, ref, w, {});
    if (!pk.holds) ++pinsker_bad;
    if (pk.rhs > 0) tightest = std::max(tightest, pk.lhs / pk.rhs);
    for (const auto& d : drift_check(pi, ref, w, {})) {
      ++drift_checks;
      if (!d.holds) ++drift_bad;
    }
  }
  return {pinsker_bad == 0 && drift_bad == 0,
          fmt("500 worlds; Pinsker violations %zu (max lhs/rhs %.3f); per-group drift violations %zu of %zu",
              pinsker_bad, tightest, drift_bad, drift_checks)};
}

Outcome beta_monotone() {
  RandomStream rng(7, StreamId::kTest, 7);
  std::size_t bad = 0;
  for (int t = 0; t < 100; ++t) {
    const auto w = testing::random_world(rng, 3, t % 2 == 0);
    const auto params = testing::random_params(rng, t % 4 == 0 ? Arch::kMlp : Arch::kLinear, 3, 4, 2.0);
    Vector betas(8);
    for (double& b : betas) b = std::exp(rng.uniform(std::log(0.01), std::log(100.0)));
    std::sort(betas.begin(), betas.end());
    if (!beta_monotonicity(params, w, reference_policy(w), betas).monotone) ++bad;
  }
  return {bad == 0, fmt("100 rewards x 8 betas; non-monotone grids: %zu", bad)};
}

Outcome transfer() {
  g_transfer = cmd_transfer(context(transfer_config(), "c8"));
  const auto& r = g_transfer["result"];
  std::string rows;
  for (const auto& row : r["rows"])
    rows += fmt("%sbeta %.2g: %.4f vs %.4f", rows.empty() ? "" : "; ", row["beta"].get<double>(),
                row["delta_fair"].get<double>(), row["delta_plain"].get<double>());
  const bool ok = r["all_hold"].get<bool>();
  std::string flagged;
  for (const auto& b : r["counterexamples"]) flagged += fmt(" %.2g", b.get<double>());
  return {ok, fmt("eps_T %.4f; fair vs plain %s%s", r["epsilon_T"].get<double>(), rows.c_str(),
                  ok ? "" : ("; counterexamples at beta" + flagged).c_str())};
}

Outcome groupwise() {
  SyntheticConfig g;
  g.layout.sensitive_dims = {4};
  g.n_examples = 4000;
  const Dataset ds = generate_synthetic(g);
  ConstraintSpec spec{Family::kDP, {0.01, 0.03, 0.05}, 2.0};
  SolverConfig cfg;
  cfg.T = 64;
  cfg.eta_phi = 1.0;
  cfg.eps_rel = 1e-8;
  const auto st = run(cfg, ds, spec, Arch::kLinear);
  const double eps = slack_bound(st, 0.05).epsilon_T;
  const auto bounds = groupwise_bounds(averaged_params(st, Arch::kLinear, g.d, 0), ds, spec, eps);
  std::size_t bad = 0;
  double worst_ratio = 0.0;
  for (const auto& b : bounds) {
    if (!b.holds) ++bad;
    worst_ratio = std::max(worst_ratio, b.gap / b.bound);
  }
  return {bad == 0 && bounds.size() == 6,
          fmt("p=4, tolerances (0.01, 0.03, 0.05), eps_T %.4f; %zu of %zu pairs violate; max gap/bound %.3f", eps,
              bad, bounds.size(), worst_ratio)};
}

Outcome pareto() {
  g_pareto = cmd_pareto(context(pareto_config(), "c10"));
  const auto& r = g_pareto["result"];
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : r["points"]) {
    if (p["failed"].get<bool>()) return {false, "a sweep cell failed: " + p["failure"].get<std::string>()};
    pts.emplace_back(p["error"].get<double>(), p["fairness"].get<double>());
  }
  std::vector<std::size_t> brute;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dom = false;
    for (std::size_t j = 0; j < pts.size(); ++j)
      dom = dom || (pts[j].first <= pts[i].first && pts[j].second <= pts[i].second &&
                    (pts[j].first < pts[i].first || pts[j].second < pts[i].second));
    if (!dom) brute.push_back(i);
  }
  const auto front = r["frontier"].get<std::vector<std::size_t>>();
  const bool match = front == brute && !front.empty();
  const bool scal = r["scalarization"]["all_on_frontier"].get<bool>() && r["scalarization"]["entries"].size() == 9;
  std::string fs_;
  for (auto k : front) fs_ += fmt("%s%zu", fs_.empty() ? "" : ",", k);
  return {match && scal && pts.size() == 12,
          fmt("%zu points; frontier {%s} %s brute force; 9 weighted-sum minimizers on frontier: %s", pts.size(),
              fs_.c_str(), match ? "equals" : "DIFFERS FROM", scal ? "yes" : "no")};
}

Outcome metrics_sanity() {
  RandomStream rng(11, StreamId::kTest, 11);
  std::size_t bad = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<Prediction> p(1 + rng.below(200));
    const double skew = rng.uniform(0.0, 1.0);
    for (auto& q : p) q = {std::pow(rng.uniform(), 1.0 + 3.0 * skew), rng.bernoulli(rng.uniform()) ? 1 : 0};
    const auto m = calibration_metrics(p);
    if (!(m.ece <= m.rmsce && m.rmsce <= m.mce)) ++bad;
  }
  std::vector<Prediction> cal(100000);
  for (auto& q : cal) {
    q.p = rng.uniform();
    q.y = rng.bernoulli(q.p) ? 1 : 0;
  }
  const double ece = calibration_metrics(cal).ece;
  return {bad == 0 && ece <= 0.02, fmt("ordering violations %zu of 1000; calibrated ECE at n=1e5: %.4f", bad, ece)};
}

Outcome determinism() {
  if (g_train.is_null() || g_transfer.is_null() || g_pareto.is_null())
    return {false, "criteria 4, 8 and 10 did not all produce reports"};
  const auto train = cmd_train(context(train_config(), "c12_train"));
  const auto transfer = cmd_transfer(context(transfer_config(), "c12_transfer"));
  const auto pareto = cmd_pareto(context(pareto_config(), "c12_pareto"));
  const bool a = stable_dump(train) == stable_dump(g_train) &&
                 slurp(g_root / "c12_train" / "params.json") == slurp(g_root / "c4" / "params.json");
  const bool b = stable_dump(transfer) == stable_dump(g_transfer);
  const bool c = stable_dump(pareto) == stable_dump(g_pareto) &&
                 slurp(g_root / "c12_pareto" / "frontier.csv") == slurp(g_root / "c10" / "frontier.csv");
  return {a && b && c, fmt("train %s, transfer %s, pareto %s", a ? "identical" : "DIFFERS",
                           b ? "identical" : "DIFFERS", c ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  g_root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "faro_acceptance";
  fs::remove_all(g_root);
  fs::create_directories(g_root);

  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient oracle", gradient_oracle},
      {"proxy oracle equivalence", proxy_oracle},
      {"constraint counting", constraint_counting},
      {"fairness reduction on planted bias", fairness_reduction},
      {"convergence rate", convergence_rate},
      {"Pinsker and per-group drift", pinsker_drift},
      {"KL monotone in beta", beta_monotone},
      {"reward-to-policy transfer", transfer},
      {"groupwise bound", groupwise},
      {"Pareto frontier", pareto},
      {"metrics sanity", metrics_sanity},
      {"determinism", determinism},
  };
  int failed = 0;
  int n = 0;
  for (const auto& [name, fn] : criteria) {
    ++n;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d %s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", n, name, out.detail.c_str(), secs);
    std::fflush(stdout);
    failed += out.pass ? 0 : 1;
  }
  std::printf("%d of %d criteria passed\n", n - failed, n);
  return failed == 0 ? 0 : 1;
}
