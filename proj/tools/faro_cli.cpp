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

// faro_cli: command-line front end.
//
//   faro_cli <gen-data|train|audit|pareto|transfer|policy-eval|metrics>
//            --config cfg.json [--out dir] [--jobs n] [--seed u64]
//
// Exit codes: 0 success, 1 internal error, 2 invalid input.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "faro/commands.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInvalid = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-constrained reward optimization"};
  app.set_version_flag("--version", std::string(faro::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;

  using Command = std::function<faro::Json(const faro::CommandContext&)>;
  const std::map<std::string, std::pair<Command, std::string>> commands = {
      {"gen-data", {faro::cmd_gen_data, "Generate a planted-bias preference dataset"}},
      {"train", {faro::cmd_train, "Train a reward model under fairness constraints"}},
      {"audit", {faro::cmd_audit, "Certify saved reward params on a dataset"}},
      {"pareto", {faro::cmd_pareto, "Sweep (beta, tolerances) and report the frontier"}},
      {"transfer", {faro::cmd_transfer, "Compare Gibbs policies of fair and plain rewards"}},
      {"policy-eval", {faro::cmd_policy_eval, "Evaluate Gibbs policies on a finite world"}},
      {"metrics", {faro::cmd_metrics, "Accuracy, calibration and fairness metrics"}},
  };
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.second);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--jobs", jobs, "Worker threads for sweeps")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Seed (overrides the config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  const auto* chosen = app.get_subcommands().front();
  try {
    faro::CommandContext ctx;
    ctx.config = faro::read_json_file(config_path);
    ctx.base_dir = std::filesystem::absolute(config_path).parent_path();
    ctx.out_dir = out_dir;
    ctx.jobs = jobs;
    ctx.seed_override = seed;
    std::filesystem::create_directories(ctx.out_dir);
    commands.at(chosen->get_name()).first(ctx);
    std::cout << chosen->get_name() << ": wrote " << std::filesystem::absolute(ctx.out_dir).string() << '\n';
    return kExitOk;
  } catch (const faro::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const faro::InfeasibleError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const faro::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const faro::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}
