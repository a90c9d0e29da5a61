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

// Subcommand implementations behind faro_cli. Each takes a parsed JSON
// config, writes its artifacts under the output directory and returns the
// report it wrote.

#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "faro/certificates.hpp"
#include "faro/dataset.hpp"
#include "faro/io.hpp"
#include "faro/metrics.hpp"
#include "faro/pareto.hpp"
#include "faro/policy.hpp"
#include "faro/proxygda.hpp"

namespace faro {

struct CommandContext {
  Json config = Json::object();
  /// Relative paths in the config resolve against this directory.
  std::filesystem::path base_dir = ".";
  std::filesystem::path out_dir = ".";
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed_override;
};

namespace cmd_detail {

using json_detail::get;
using json_detail::get_or;

inline std::uint64_t global_seed(const CommandContext& ctx) {
  if (ctx.seed_override) return *ctx.seed_override;
  return get_or<std::uint64_t>(ctx.config, "seed", 7, "");
}

/// The config as it will be echoed: the effective seed is written back.
inline Json effective_config(const CommandContext& ctx) {
  Json c = ctx.config;
  c["seed"] = global_seed(ctx);
  return c;
}

inline std::filesystem::path resolve(const CommandContext& ctx, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : ctx.base_dir / path;
}

inline std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Reporter {
 public:
  Reporter(std::string command, const CommandContext& ctx)
      : command_(std::move(command)), ctx_(&ctx), started_(utc_now()),
        t0_(std::chrono::steady_clock::now()) {}

  Json finish(Json result, const std::string& file = "report.json") const {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    Json r = {{"command", command_},
              {"version", kVersion},
              {"seed", global_seed(*ctx_)},
              {"config", effective_config(*ctx_)},
              {"result", std::move(result)},
              {"wall_clock", {{"started_utc", started_}, {"seconds", secs}}}};
    write_json_file(r, (ctx_->out_dir / file).string());
    return r;
  }

 private:
  std::string command_;
  const CommandContext* ctx_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
};

struct DataSource {
  Dataset data;
  std::optional<SyntheticConfig> synthetic;
};

/// {"path": csv} or {"synthetic": {...}}.
inline DataSource load_data(const CommandContext& ctx, const Json& j, const std::string& name) {
  json_detail::check_keys(j, {"path", "synthetic"}, name);
  if (j.contains("path") == j.contains("synthetic"))
    throw ValidationError(name + " needs exactly one of 'path' and 'synthetic'");
  if (j.contains("path")) {
    const auto path = resolve(ctx, get<std::string>(j, "path", name));
    if (!std::filesystem::exists(path)) throw ValidationError(name + ".path: file not found: " + path.string());
    try {
      return {load_csv(path.string()), std::nullopt};
    } catch (const ParseError& e) {
      throw ValidationError(name + ".path: " + e.what());
    }
  }
  auto cfg = synthetic_from_json(j.at("synthetic"), global_seed(ctx), name + ".synthetic");
  return {generate_synthetic(cfg), cfg};
}

inline const Json& section(const Json& config, const std::string& key) {
  if (!config.contains(key)) throw ValidationError("missing field " + key);
  return config.at(key);
}

/// {"path": world json} or {"synthetic": {"n_contexts", "n_actions", ...}},
/// the synthetic world inheriting d, layout and bias from the data.
inline FiniteWorld load_world(const CommandContext& ctx, const Json& j, const DataSource* data) {
  json_detail::check_keys(j, {"path", "synthetic"}, "world");
  if (j.contains("path") == j.contains("synthetic"))
    throw ValidationError("world needs exactly one of 'path' and 'synthetic'");
  if (j.contains("path")) return world_from_json(read_json_file(resolve(ctx, get<std::string>(j, "path", "world")).string()));
  const Json& s = j.at("synthetic");
  json_detail::check_keys(s, {"n_contexts", "n_actions", "d", "layout", "bias_strength", "seed"}, "world.synthetic");
  SyntheticConfig cfg;
  if (data && data->synthetic) cfg = *data->synthetic;
  if (data) {
    cfg.d = data->data.dim();
    cfg.layout = data->data.layout();
  }
  cfg.seed = global_seed(ctx);
  cfg.d = get_or<std::size_t>(s, "d", cfg.d, "world.synthetic");
  if (s.contains("layout")) cfg.layout = layout_from_json(s.at("layout"), "world.synthetic.layout");
  cfg.bias_strength = get_or<double>(s, "bias_strength", cfg.bias_strength, "world.synthetic");
  cfg.seed = get_or<std::uint64_t>(s, "seed", cfg.seed, "world.synthetic");
  return make_synthetic_world(cfg, get_or<std::size_t>(s, "n_contexts", 200, "world.synthetic"),
                              get_or<std::size_t>(s, "n_actions", 4, "world.synthetic"));
}

struct ModelChoice {
  Arch arch = Arch::kLinear;
  std::size_t hidden = 0;
};

inline ModelChoice load_model(const Json& config) {
  ModelChoice m;
  if (!config.contains("model")) return m;
  const auto& j = config.at("model");
  json_detail::check_keys(j, {"arch", "hidden"}, "model");
  m.arch = arch_from_string(get_or<std::string>(j, "arch", "linear", "model"));
  m.hidden = get_or<std::size_t>(j, "hidden", m.arch == Arch::kMlp ? 8 : 0, "model");
  if (m.arch == Arch::kMlp) require(m.hidden >= 1, "model.hidden must be >= 1 for the mlp arch");
  if (m.arch == Arch::kLinear) m.hidden = 0;
  return m;
}

inline SolverConfig load_solver(const CommandContext& ctx) {
  return ctx.config.contains("solver") ? solver_from_json(ctx.config.at("solver"), global_seed(ctx))
                                       : solver_from_json(Json::object(), global_seed(ctx));
}

inline ConstraintSpec load_spec(const Json& config, const Dataset& data) {
  return spec_from_json(section(config, "spec"), data.group_count(), data.layout().unrestricted_card);
}

inline double load_delta(const Json& config) {
  const double delta = get_or<double>(config, "delta", 0.05, "");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  return delta;
}

inline Vector load_betas(const Json& config) {
  const Vector betas = get<Vector>(config, "betas", "");
  require(!betas.empty(), "betas must be nonempty");
  for (double b : betas) require(b > 0.0 && std::isfinite(b), "betas must be positive and finite");
  return betas;
}

inline RewardParams load_params(const CommandContext& ctx, const Json& config) {
  const auto path = resolve(ctx, get<std::string>(config, "params", ""));
  return params_from_json(read_json_file(path.string()));
}

inline void check_keys(const CommandContext& ctx, std::initializer_list<const char*> allowed) {
  json_detail::check_keys(ctx.config, allowed, "");
}

}  // namespace cmd_detail

// ---------------------------------------------------------------------------

/// Writes data.csv and a provenance report.
inline Json cmd_gen_data(const CommandContext& ctx) {
  using namespace cmd_detail;
  check_keys(ctx, {"seed", "synthetic", "file"});
  Reporter rep("gen-data", ctx);
  const auto cfg = synthetic_from_json(section(ctx.config, "synthetic"), global_seed(ctx), "synthetic");
  const Dataset ds = generate_synthetic(cfg);
  const std::string file = get_or<std::string>(ctx.config, "file", "data.csv", "");
  save_csv(ds, (ctx.out_dir / file).string());
  Json counts = ds.group_sizes();
  return rep.finish({{"file", file},
                     {"generator", to_json(cfg)},
                     {"n", ds.size()},
                     {"group_sizes", counts}},
                    "provenance.json");
}

/// Trains a reward under the spec, audits its averaged iterate, and writes
/// params.json plus report.json.
inline Json cmd_train(const CommandContext& ctx) {
  using namespace cmd_detail;
  check_keys(ctx, {"seed", "data", "eval", "model", "spec", "solver", "delta", "baseline"});
  Reporter rep("train", ctx);
  const auto train = load_data(ctx, section(ctx.config, "data"), "data");
  std::optional<DataSource> eval;
  if (ctx.config.contains("eval")) eval = load_data(ctx, ctx.config.at("eval"), "eval");
  const Dataset& audit_data = eval ? eval->data : train.data;
  require(audit_data.dim() == train.data.dim() && audit_data.layout() == train.data.layout(),
          "eval data must match the training data's dimension and layout");
  const auto model = load_model(ctx.config);
  const auto spec = load_spec(ctx.config, train.data);
  const auto solver = load_solver(ctx);
  const double delta = load_delta(ctx.config);

  const auto st = run(solver, train.data, spec, model.arch, model.hidden);
  const auto params = averaged_params(st, model.arch, train.data.dim(), model.hidden);
  write_json_file(to_json(params), (ctx.out_dir / "params.json").string());

  const auto cert = verify_certificate(params, st, audit_data, spec, delta);
  const auto slack = slack_bound(st, delta);
  Json result = {{"solver", to_json(st)},
                 {"train", {{"nll", nll(params, train.data)},
                            {"violation", json_detail::number(train.data.group_count() > 1
                                                                  ? true_violation(params, train.data, spec.family)
                                                                  : 0.0)}}},
                 {"slack", to_json(slack)},
                 {"certificate", to_json(cert)}};
  if (audit_data.group_count() > 1) {
    Json pairs = Json::array();
    for (const auto& b : groupwise_bounds(params, audit_data, spec, slack.epsilon_T)) pairs.push_back(to_json(b));
    result["groupwise"] = std::move(pairs);
  }
  result["eval"] = to_json(evaluate(params, audit_data));
  if (get_or<bool>(ctx.config, "baseline", false, "")) {
    SolverConfig plain = solver;
    plain.freeze_dual = true;
    plain.T = 1;
    const auto pst = run(plain, train.data, spec, model.arch, model.hidden);
    const auto pp = averaged_params(pst, model.arch, train.data.dim(), model.hidden);
    result["baseline"] = {{"nll", nll(pp, train.data)},
                          {"violation", json_detail::number(train.data.group_count() > 1
                                                                ? true_violation(pp, train.data, spec.family)
                                                                : 0.0)}};
  }
  return rep.finish(std::move(result));
}

/// Certificate for saved params on a dataset. Slack inputs come from a
/// training report (`train_report`), explicit `slack` values, or default
/// to zero.
inline Json cmd_audit(const CommandContext& ctx) {
  using namespace cmd_detail;
  check_keys(ctx, {"seed", "params", "data", "spec", "delta", "train_report", "slack"});
  Reporter rep("audit", ctx);
  RewardParams params;
  try {
    params = load_params(ctx, ctx.config);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("params: ") + e.what());
  }
  const auto src = load_data(ctx, section(ctx.config, "data"), "data");
  require(params.d == src.data.dim(), "params.d does not match the data dimension");
  const auto spec = load_spec(ctx.config, src.data);
  const double delta = load_delta(ctx.config);
  SolverState st;
  st.m = spec.constraint_count(src.data.group_count(), src.data.layout().unrestricted_card);
  st.T = 1;
  st.dual_bound = spec.dual_bound;
  st.n_min = src.data.min_group_size();
  if (ctx.config.contains("train_report")) {
    const Json tr = read_json_file(resolve(ctx, get<std::string>(ctx.config, "train_report", "")).string());
    try {
      const auto& s = tr.at("result").at("solver");
      st.rho_estimate = s.at("rho_estimate").get<double>();
      st.G_estimate = s.at("G_estimate").get<double>();
      st.T = s.at("T").get<std::size_t>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("train_report lacks result.solver.{rho_estimate, G_estimate, T}");
    }
  } else if (ctx.config.contains("slack")) {
    const auto& s = ctx.config.at("slack");
    json_detail::check_keys(s, {"rho", "G", "T"}, "slack");
    st.rho_estimate = get_or<double>(s, "rho", 0.0, "slack");
    st.G_estimate = get_or<double>(s, "G", 0.0, "slack");
    st.T = get_or<std::size_t>(s, "T", 1, "slack");
    require(st.T >= 1, "slack.T must be >= 1");
  }
  const auto cert = verify_certificate(params, st, src.data, spec, delta);
  Json result = {{"certificate", to_json(cert)}};
  if (src.data.group_count() > 1) result["stats"] = to_json(group_stats(params, src.data, spec.family));
  return rep.finish(std::move(result), "certificate.json");
}

/// (beta, tolerances) sweep; writes frontier.csv and report.json.
inline Json cmd_pareto(const CommandContext& ctx) {
  using namespace cmd_detail;
  check_keys(ctx, {"seed", "data", "world", "model", "family", "R", "betas", "tolerance_sets", "tolerances",
                   "solver", "reward_only", "alphas"});
  Reporter rep("pareto", ctx);
  const auto src = load_data(ctx, section(ctx.config, "data"), "data");
  const auto model = load_model(ctx.config);
  SweepGrid grid;
  grid.family = family_from_string(get_or<std::string>(ctx.config, "family", "dp", ""));
  grid.dual_bound = get_or<double>(ctx.config, "R", 2.0, "");
  grid.arch = model.arch;
  grid.hidden = model.hidden;
  grid.solver = load_solver(ctx);
  grid.reward_only = get_or<bool>(ctx.config, "reward_only", false, "");
  grid.betas = grid.reward_only && !ctx.config.contains("betas") ? Vector{1.0} : load_betas(ctx.config);
  if (ctx.config.contains("tolerance_sets") == ctx.config.contains("tolerances"))
    throw ValidationError("exactly one of tolerance_sets and tolerances is required");
  if (ctx.config.contains("tolerance_sets")) {
    const auto& ts = ctx.config.at("tolerance_sets");
    if (!ts.is_array() || ts.empty()) throw ValidationError("tolerance_sets must be a nonempty array");
    for (std::size_t k = 0; k < ts.size(); ++k)
      grid.tolerance_sets.push_back(json_detail::tolerance_list(ts[k], "tolerance_sets[" + std::to_string(k) + "]"));
  } else {
    const std::size_t n = tolerance_count(grid.family, src.data.group_count(), src.data.layout().unrestricted_card);
    for (double t : get<Vector>(ctx.config, "tolerances", "")) grid.tolerance_sets.emplace_back(n, t);
    require(!grid.tolerance_sets.empty(), "tolerances must be nonempty");
  }
  Vector alphas = get_or<Vector>(ctx.config, "alphas", Vector{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}, "");

  std::optional<FiniteWorld> world;
  std::optional<FinitePolicy> ref;
  if (!grid.reward_only) {
    world = load_world(ctx, section(ctx.config, "world"), &src);
    require(world->dim() == src.data.dim(), "world dimension does not match the data");
    ref = reference_policy(*world);
  }
  auto points = sweep(grid, src.data, world ? &*world : nullptr, ref ? &*ref : nullptr, ctx.jobs);
  {
    std::ofstream out(ctx.out_dir / "frontier.csv");
    if (!out) throw std::runtime_error("cannot write frontier.csv");
    write_frontier_csv(points, out);
  }
  Json jp = Json::array();
  std::vector<std::pair<double, double>> coords;
  std::vector<std::size_t> ok;
  Json frontier = Json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    jp.push_back(to_json(points[i]));
    if (!points[i].failed) {
      coords.emplace_back(points[i].error, points[i].fairness);
      ok.push_back(i);
      if (!points[i].dominated) frontier.push_back(i);
    }
  }
  Json result = {{"points", std::move(jp)}, {"frontier", std::move(frontier)}};
  if (!coords.empty()) {
    auto sc = scalarization_check(coords, alphas);
    for (auto& e : sc.entries) e.minimizer = ok[e.minimizer];
    result["scalarization"] = to_json(sc);
  }
  return rep.finish(std::move(result));
}

/// Fair (spec) and plain (frozen-dual) rewards pushed through Gibbs
/// policies on a beta grid.
inline Json cmd_transfer(const CommandContext& ctx) {
  using namespace cmd_detail;
  check_keys(ctx, {"seed", "data", "world", "model", "spec", "solver", "betas", "delta"});
  Reporter rep("transfer", ctx);
  const auto src = load_data(ctx, section(ctx.config, "data"), "data");
  const auto betas = load_betas(ctx.config);
  const auto model = load_model(ctx.config);
  const auto spec = load_spec(ctx.config, src.data);
  const auto solver = load_solver(ctx);
  const double delta = load_delta(ctx.config);
  const auto world = load_world(ctx, section(ctx.config, "world"), &src);
  require(world.dim() == src.data.dim(), "world dimension does not match the data");
  const auto ref = reference_policy(world);

  const auto fst = run(solver, src.data, spec, model.arch, model.hidden);
  SolverConfig plain_cfg = solver;
  plain_cfg.freeze_dual = true;
  plain_cfg.T = 1;
  const auto pst = run(plain_cfg, src.data, spec, model.arch, model.hidden);
  const auto fair = averaged_params(fst, model.arch, src.data.dim(), model.hidden);
  const auto plain = averaged_params(pst, model.arch, src.data.dim(), model.hidden);
  const double eps = slack_bound(fst, delta).epsilon_T;

  Json rows = Json::array();
  Json counterexamples = Json::array();
  bool all = true;
  for (double b : betas) {
    const auto r = transfer_experiment(fair, plain, world, ref, b, PolicyFairnessSpec{}, eps);
    rows.push_back(to_json(r));
    if (!r.transfer_holds) counterexamples.push_back(b);
    all = all && r.transfer_holds;
  }
  return rep.finish({{"epsilon_T", eps},
                     {"reward_violation", {{"fair", true_violation(fair, src.data, spec.family)},
                                           {"plain", true_violation(plain, src.data, spec.family)}}},
                     {"rows", std::move(rows)},
                     {"counterexamples", std::move(counterexamples)},
                     {"all_hold", all}});
}

/// Gibbs policies of saved params (or the zero reward) on a world.
inline Json cmd_policy_eval(const CommandContext& ctx) {
  using namespace cmd_detail;
  check_keys(ctx, {"seed", "world", "params", "betas", "event"});
  Reporter rep("policy-eval", ctx);
  const auto world = load_world(ctx, section(ctx.config, "world"), nullptr);
  RewardParams params = ctx.config.contains("params") ? load_params(ctx, ctx.config)
                                                      : RewardParams::zeros(Arch::kLinear, world.dim());
  require(params.d == world.dim(), "params.d does not match the world dimension");
  const auto betas = load_betas(ctx.config);
  const std::string event = get_or<std::string>(ctx.config, "event", "f", "");
  require(event == "f" || event == "best_action", "event must be 'f' or 'best_action'");
  const auto spec = event == "f" ? PolicyFairnessSpec{} : PolicyFairnessSpec::best_action();
  const auto ref = reference_policy(world);
  Json rows = Json::array();
  for (double b : betas) {
    const auto pi = gibbs_policy(params, world, ref, b);
    const auto pk = pinsker_check(pi, ref, world, spec);
    Json drift = Json::array();
    for (const auto& d : drift_check(pi, ref, world, spec))
      drift.push_back({{"group", d.group}, {"shift", d.shift}, {"group_kl", d.group_kl}, {"bound", d.bound}, {"holds", d.holds}});
    rows.push_back({{"beta", b},
                    {"kl", kl(pi, ref, world)},
                    {"violation", policy_violation(pi, world, spec)},
                    {"accuracy", expected_accuracy(pi, world)},
                    {"pinsker", {{"lhs", pk.lhs}, {"rhs", pk.rhs}, {"holds", pk.holds}}},
                    {"drift", std::move(drift)}});
  }
  Vector sorted = betas;
  std::sort(sorted.begin(), sorted.end());
  const auto mono = beta_monotonicity(params, world, ref, sorted);
  return rep.finish({{"reference_violation", policy_violation(ref, world, spec)},
                     {"rows", std::move(rows)},
                     {"kl_monotone_in_beta", mono.monotone}});
}

/// Reads a `p,y` CSV of predictions.
inline std::vector<Prediction> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::string line;
  std::size_t n = 1;
  if (!std::getline(in, line) || line.rfind("p,y", 0) != 0)
    throw ValidationError(path + ": line 1: expected header 'p,y'");
  std::vector<Prediction> out;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto toks = csv_detail::split_line(line);
    if (toks.size() != 2) throw ValidationError(path + ": line " + std::to_string(n) + ": expected 2 fields");
    try {
      out.push_back({csv_detail::parse_double(toks[0], n), static_cast<int>(csv_detail::parse_index(toks[1], n))});
    } catch (const ParseError& e) {
      throw ValidationError(path + ": " + e.what());
    }
  }
  return out;
}

/// EvalReport for saved params on a dataset, or for a predictions CSV.
inline Json cmd_metrics(const CommandContext& ctx) {
  using namespace cmd_detail;
  check_keys(ctx, {"seed", "params", "data", "predictions", "bins"});
  Reporter rep("metrics", ctx);
  if (ctx.config.contains("predictions")) {
    const auto preds = load_predictions(resolve(ctx, get<std::string>(ctx.config, "predictions", "")).string());
    const auto bins = get_or<std::size_t>(ctx.config, "bins", 10, "");
    EvalReport r = evaluate_predictions(preds);
    const auto cal = calibration_metrics(preds, bins);
    r.ece = cal.ece;
    r.mce = cal.mce;
    r.rmsce = cal.rmsce;
    return rep.finish({{"metrics", to_json(r)}});
  }
  const auto params = load_params(ctx, ctx.config);
  const auto src = load_data(ctx, section(ctx.config, "data"), "data");
  require(params.d == src.data.dim(), "params.d does not match the data dimension");
  return rep.finish({{"metrics", to_json(evaluate(params, src.data))}});
}

/// The report without its wall-clock block, serialized.
inline std::string stable_dump(Json report) {
  report.erase("wall_clock");
  return report.dump();
}

}  // namespace faro
