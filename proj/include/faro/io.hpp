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

// JSON encodings of configs, parameters, worlds and reports.

#pragma once

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "faro/certificates.hpp"
#include "faro/common.hpp"
#include "faro/dataset.hpp"
#include "faro/fairness.hpp"
#include "faro/metrics.hpp"
#include "faro/pareto.hpp"
#include "faro/policy.hpp"
#include "faro/proxygda.hpp"
#include "faro/reward_model.hpp"

namespace faro {

using Json = nlohmann::ordered_json;

namespace json_detail {

inline std::string join(const std::string& ctx, const std::string& key) {
  return ctx.empty() ? key : ctx + "." + key;
}

/// Rejects keys outside `allowed` so that typos surface as errors.
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
  if (!j.is_object()) throw ValidationError((ctx.empty() ? "config" : ctx) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError("unknown field " + join(ctx, key));
  }
}

template <class T>
T get(const Json& j, const std::string& key, const std::string& ctx) {
  const std::string name = join(ctx, key);
  if (!j.contains(key)) throw ValidationError("missing field " + name);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("field " + name + " has the wrong type");
  }
}

template <class T>
T get_or(const Json& j, const std::string& key, T fallback, const std::string& ctx) {
  return j.contains(key) ? get<T>(j, key, ctx) : fallback;
}

/// NaN and infinities become null.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json numbers(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

/// Reads a list of numbers where null stands for +infinity (tolerances).
inline Vector tolerance_list(const Json& j, const std::string& name) {
  if (!j.is_array()) throw ValidationError("field " + name + " must be an array");
  Vector out;
  for (const auto& v : j) {
    if (v.is_null()) out.push_back(std::numeric_limits<double>::infinity());
    else if (v.is_number()) out.push_back(v.get<double>());
    else throw ValidationError("field " + name + " must hold numbers");
  }
  return out;
}

}  // namespace json_detail

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("malformed JSON in " + path + ": " + e.what());
  }
}

inline void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

inline Json to_json(const AttributeLayout& l) {
  return {{"sensitive_dims", l.sensitive_dims}, {"unrestricted_card", l.unrestricted_card}};
}

inline AttributeLayout layout_from_json(const Json& j, const std::string& ctx = "layout") {
  json_detail::check_keys(j, {"sensitive_dims", "unrestricted_card"}, ctx);
  AttributeLayout l;
  l.sensitive_dims = json_detail::get_or<std::vector<std::size_t>>(j, "sensitive_dims", l.sensitive_dims, ctx);
  l.unrestricted_card = json_detail::get_or<std::size_t>(j, "unrestricted_card", l.unrestricted_card, ctx);
  l.validate();
  return l;
}

inline Json to_json(const SyntheticConfig& c) {
  return {{"n_examples", c.n_examples}, {"d", c.d},         {"layout", to_json(c.layout)},
          {"bias_strength", c.bias_strength}, {"noise", c.noise}, {"seed", c.seed}};
}

/// `seed` defaults to the caller's global seed.
inline SyntheticConfig synthetic_from_json(const Json& j, std::uint64_t seed, const std::string& ctx) {
  json_detail::check_keys(j, {"n_examples", "d", "layout", "bias_strength", "noise", "seed"}, ctx);
  SyntheticConfig c;
  c.n_examples = json_detail::get_or<std::size_t>(j, "n_examples", c.n_examples, ctx);
  c.d = json_detail::get_or<std::size_t>(j, "d", c.d, ctx);
  if (j.contains("layout")) c.layout = layout_from_json(j.at("layout"), json_detail::join(ctx, "layout"));
  c.bias_strength = json_detail::get_or<double>(j, "bias_strength", c.bias_strength, ctx);
  c.noise = json_detail::get_or<double>(j, "noise", c.noise, ctx);
  c.seed = json_detail::get_or<std::uint64_t>(j, "seed", seed, ctx);
  require(c.n_examples >= 1, json_detail::join(ctx, "n_examples") + " must be >= 1");
  require(c.d >= 1, json_detail::join(ctx, "d") + " must be >= 1");
  c.validate();
  return c;
}

inline Json to_json(const SolverConfig& c) {
  Json j = {{"T", c.T}, {"eta_phi", c.eta_phi}};
  j["eta_lambda"] = c.eta_lambda ? Json(*c.eta_lambda) : Json(nullptr);
  j["eps_rel"] = c.eps_rel;
  j["max_inner"] = c.max_inner;
  j["seed"] = c.seed;
  j["warm_start"] = c.warm_start;
  j["freeze_dual"] = c.freeze_dual;
  j["divergence_patience"] = c.divergence_patience;
  return j;
}

inline SolverConfig solver_from_json(const Json& j, std::uint64_t seed, const std::string& ctx = "solver") {
  json_detail::check_keys(j, {"T", "eta_phi", "eta_lambda", "eps_rel", "max_inner", "seed", "warm_start",
                              "freeze_dual", "divergence_patience"},
                          ctx);
  using json_detail::get_or;
  SolverConfig c;
  c.T = get_or<std::size_t>(j, "T", c.T, ctx);
  c.eta_phi = get_or<double>(j, "eta_phi", c.eta_phi, ctx);
  if (j.contains("eta_lambda") && !j.at("eta_lambda").is_null())
    c.eta_lambda = json_detail::get<double>(j, "eta_lambda", ctx);
  c.eps_rel = get_or<double>(j, "eps_rel", c.eps_rel, ctx);
  c.max_inner = get_or<std::size_t>(j, "max_inner", c.max_inner, ctx);
  c.seed = get_or<std::uint64_t>(j, "seed", seed, ctx);
  c.warm_start = get_or<bool>(j, "warm_start", c.warm_start, ctx);
  c.freeze_dual = get_or<bool>(j, "freeze_dual", c.freeze_dual, ctx);
  c.divergence_patience = get_or<std::size_t>(j, "divergence_patience", c.divergence_patience, ctx);
  c.validate();
  return c;
}

inline Json to_json(const ConstraintSpec& s) {
  return {{"family", to_string(s.family)}, {"tolerances", json_detail::numbers(s.tolerances)}, {"R", s.dual_bound}};
}

/// Either `tolerances` (a full list; null means unbounded) or a scalar
/// `tolerance` applied everywhere.
inline ConstraintSpec spec_from_json(const Json& j, std::size_t p, std::size_t K,
                                     const std::string& ctx = "spec") {
  json_detail::check_keys(j, {"family", "tolerances", "tolerance", "R"}, ctx);
  ConstraintSpec s;
  s.family = family_from_string(json_detail::get_or<std::string>(j, "family", "dp", ctx));
  s.dual_bound = json_detail::get_or<double>(j, "R", s.dual_bound, ctx);
  const bool has_list = j.contains("tolerances");
  const bool has_scalar = j.contains("tolerance");
  if (has_list == has_scalar)
    throw ValidationError("exactly one of " + json_detail::join(ctx, "tolerances") + " and " +
                          json_detail::join(ctx, "tolerance") + " is required");
  if (has_list) {
    s.tolerances = json_detail::tolerance_list(j.at("tolerances"), json_detail::join(ctx, "tolerances"));
  } else {
    const auto& t = j.at("tolerance");
    const double tol = t.is_null() ? std::numeric_limits<double>::infinity()
                                   : json_detail::get<double>(j, "tolerance", ctx);
    s.tolerances.assign(tolerance_count(s.family, p, K), tol);
  }
  s.validate(p, K);
  return s;
}

inline Json to_json(const RewardParams& p) {
  return {{"arch", to_string(p.arch)}, {"d", p.d}, {"hidden", p.hidden}, {"weights", json_detail::numbers(p.weights)}};
}

inline RewardParams params_from_json(const Json& j, const std::string& ctx = "params") {
  json_detail::check_keys(j, {"arch", "d", "hidden", "weights"}, ctx);
  RewardParams p;
  p.arch = arch_from_string(json_detail::get<std::string>(j, "arch", ctx));
  p.d = json_detail::get<std::size_t>(j, "d", ctx);
  p.hidden = json_detail::get_or<std::size_t>(j, "hidden", 0, ctx);
  p.weights = json_detail::get<Vector>(j, "weights", ctx);
  p.validate();
  return p;
}

/// {d, layout, contexts: [{id, features, s, u, p}], actions: [{context_id,
/// features, f, quality, ref_prob}]}; quality and ref_prob are optional.
inline Json to_json(const FiniteWorld& w) {
  Json contexts = Json::array();
  Json actions = Json::array();
  for (const auto& c : w.contexts()) {
    contexts.push_back({{"id", c.id}, {"features", c.features}, {"s", c.s}, {"u", c.u}, {"p", c.prob}});
    for (const auto& a : c.actions) {
      Json ja = {{"context_id", c.id}, {"features", a.features}, {"f", a.f}, {"quality", a.quality}};
      if (!std::isnan(a.ref_prob)) ja["ref_prob"] = a.ref_prob;
      actions.push_back(std::move(ja));
    }
  }
  return {{"d", w.dim()}, {"layout", to_json(w.layout())}, {"contexts", std::move(contexts)},
          {"actions", std::move(actions)}};
}

inline FiniteWorld world_from_json(const Json& j, const std::string& ctx = "world") {
  using json_detail::get;
  using json_detail::get_or;
  using json_detail::join;
  json_detail::check_keys(j, {"d", "layout", "contexts", "actions"}, ctx);
  const auto d = get<std::size_t>(j, "d", ctx);
  const auto layout = j.contains("layout") ? layout_from_json(j.at("layout"), join(ctx, "layout")) : AttributeLayout{};
  for (const char* key : {"contexts", "actions"})
    if (!j.contains(key) || !j.at(key).is_array())
      throw ValidationError("field " + join(ctx, key) + " must be an array");
  const auto& jc = j.at("contexts");
  std::vector<WorldContext> contexts;
  std::map<std::string, std::size_t> index;
  for (std::size_t x = 0; x < jc.size(); ++x) {
    const std::string cctx = join(ctx, "contexts[" + std::to_string(x) + "]");
    const auto& c = jc[x];
    json_detail::check_keys(c, {"id", "features", "s", "u", "p"}, cctx);
    WorldContext wc;
    wc.id = get<std::string>(c, "id", cctx);
    wc.features = get<Vector>(c, "features", cctx);
    wc.s = get<std::vector<std::size_t>>(c, "s", cctx);
    wc.u = get_or<std::size_t>(c, "u", 0, cctx);
    wc.prob = get<double>(c, "p", cctx);
    require(wc.s.size() == layout.attribute_count(),
            cctx + ".s must have " + std::to_string(layout.attribute_count()) + " entries");
    for (std::size_t n = 0; n < wc.s.size(); ++n)
      require(wc.s[n] < layout.sensitive_dims[n], cctx + ".s[" + std::to_string(n) + "] out of range");
    if (!index.emplace(wc.id, x).second) throw ValidationError(cctx + ".id '" + wc.id + "' is duplicated");
    contexts.push_back(std::move(wc));
  }
  const auto& ja = j.at("actions");
  for (std::size_t k = 0; k < ja.size(); ++k) {
    const std::string actx = join(ctx, "actions[" + std::to_string(k) + "]");
    json_detail::check_keys(ja[k], {"context_id", "features", "f", "quality", "ref_prob"}, actx);
    const auto id = get<std::string>(ja[k], "context_id", actx);
    const auto it = index.find(id);
    if (it == index.end()) throw ValidationError(actx + ".context_id '" + id + "' names no context");
    WorldAction wa;
    wa.features = get<Vector>(ja[k], "features", actx);
    wa.f = get_or<int>(ja[k], "f", 0, actx);
    wa.quality = get_or<double>(ja[k], "quality", 0.0, actx);
    if (ja[k].contains("ref_prob")) wa.ref_prob = get<double>(ja[k], "ref_prob", actx);
    contexts[it->second].actions.push_back(std::move(wa));
  }
  return FiniteWorld(layout, d, std::move(contexts));
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline Json to_json(const SlackBound& s) {
  return {{"epsilon_T", json_detail::number(s.epsilon_T)}, {"stat_term", json_detail::number(s.stat_term)}};
}

inline Json to_json(const Certificate& c) {
  return {{"family", to_string(c.family)},
          {"rho", json_detail::number(c.rho)},
          {"R", c.R},
          {"G", json_detail::number(c.G)},
          {"m", c.m},
          {"T", c.T},
          {"n_min", c.n_min},
          {"delta", c.delta},
          {"epsilon_T", json_detail::number(c.epsilon_T)},
          {"stat_term", json_detail::number(c.stat_term)},
          {"max_tolerance", json_detail::number(c.max_tolerance)},
          {"threshold", json_detail::number(c.threshold())},
          {"measured_violation", json_detail::number(c.measured_violation)},
          {"pass", c.pass}};
}

/// Solver summary; `trace` adds one entry per outer round.
inline Json to_json(const SolverState& st, bool trace = true) {
  Json j = {{"T", st.T},
            {"m", st.m},
            {"n_min", st.n_min},
            {"R", st.dual_bound},
            {"eta_lambda", json_detail::number(st.eta_lambda)},
            {"rho_estimate", json_detail::number(st.rho_estimate)},
            {"G_estimate", json_detail::number(st.G_estimate)},
            {"G_prepass", json_detail::number(st.G_prepass)},
            {"lambda", json_detail::numbers(st.lambda)},
            {"phi_bar", json_detail::numbers(st.phi_bar)}};
  if (trace) {
    Json rounds = Json::array();
    for (const auto& r : st.rounds)
      rounds.push_back({{"loss", json_detail::number(r.loss)},
                        {"inner_steps", r.inner_steps},
                        {"max_violation", json_detail::number(max_violation(r.c))},
                        {"lambda_max", r.lambda.empty() ? 0.0 : *std::max_element(r.lambda.begin(), r.lambda.end())}});
    j["rounds"] = std::move(rounds);
  }
  return j;
}

inline Json to_json(const GroupStats& st) {
  Json cells = Json::array();
  for (std::size_t g = 0; g < st.groups; ++g)
    for (std::size_t k = 0; k < st.strata; ++k)
      cells.push_back({{"group", g}, {"stratum", k}, {"q", json_detail::number(st.value(g, k))},
                       {"count", st.count(g, k)}});
  return {{"family", to_string(st.family)}, {"cells", std::move(cells)}};
}

inline Json to_json(const PairBound& b) {
  return {{"i", b.i}, {"j", b.j}, {"stratum", b.stratum}, {"gap", b.gap}, {"bound", b.bound}, {"holds", b.holds}};
}

inline Json to_json(const TransferReport& r) {
  return {{"beta", r.beta},
          {"epsilon_T", json_detail::number(r.epsilon_T)},
          {"delta_fair", json_detail::number(r.delta_fair)},
          {"delta_plain", json_detail::number(r.delta_plain)},
          {"delta_ref", json_detail::number(r.delta_ref)},
          {"kl_fair", json_detail::number(r.kl_fair)},
          {"kl_plain", json_detail::number(r.kl_plain)},
          {"transfer_holds", r.transfer_holds},
          {"drift_fair_holds", r.drift_fair_holds},
          {"drift_plain_holds", r.drift_plain_holds}};
}

/// Three panels: ordinal, cardinal and fairness.
inline Json to_json(const EvalReport& r) {
  using json_detail::number;
  return {{"n", r.n},
          {"ordinal", {{"acc01", number(r.acc01)}, {"f1", number(r.f1)}}},
          {"cardinal", {{"ece", number(r.ece)}, {"mce", number(r.mce)}, {"rmsce", number(r.rmsce)}}},
          {"fairness", {{"delta_dp", number(r.delta_dp)}, {"delta_eo", number(r.delta_eo)},
                        {"delta_cf", number(r.delta_cf)}}}};
}

inline Json to_json(const ParetoPoint& p) {
  Json j = {{"beta", p.beta},
            {"tolerance_set", p.tolerance_set},
            {"tolerances", json_detail::numbers(p.tolerances)},
            {"error", json_detail::number(p.error)},
            {"fairness", json_detail::number(p.fairness)},
            {"failed", p.failed},
            {"dominated", p.dominated}};
  if (p.failed) j["failure"] = p.failure;
  return j;
}

inline Json to_json(const ScalarizationReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"alpha", e.alpha}, {"minimizer", e.minimizer}, {"value", e.value},
                       {"on_frontier", e.on_frontier}});
  return {{"entries", std::move(entries)}, {"all_on_frontier", r.all_on_frontier}};
}

/// CSV of sweep points: beta, tolerance set, tolerances (';'-joined),
/// error, fairness, failed and dominated flags.
inline void write_frontier_csv(const std::vector<ParetoPoint>& points, std::ostream& os) {
  os << "beta,tolerance_set,tolerances,error,fairness,failed,dominated\n";
  for (const auto& p : points) {
    os << format_double(p.beta) << ',' << p.tolerance_set << ',';
    for (std::size_t k = 0; k < p.tolerances.size(); ++k)
      os << (k ? ";" : "") << format_double(p.tolerances[k]);
    os << ',' << format_double(p.error) << ',' << format_double(p.fairness) << ',' << (p.failed ? 1 : 0) << ','
       << (p.dominated ? 1 : 0) << '\n';
  }
}

}  // namespace faro
