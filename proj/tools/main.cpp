/*
 * Copyright 2026 The FAAP Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// faap <command> --config FILE [--seed S] [--force] [--flavor F] [--set k=v]...
//
// Failures print one line to stderr:
//   error code=<ErrorCode> message="<text>"
// and exit with 2 for configuration errors, 1 otherwise.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "faap/commands.hpp"

namespace {

int fail(faap::ErrorCode code, std::string message) {
  for (char& c : message) {
    if (c == '\n' || c == '"') c = c == '\n' ? ' ' : '\'';
  }
  std::cerr << "error code=" << faap::to_string(code) << " message=\"" << message << "\""
            << std::endl;
  return code == faap::ErrorCode::kConfigInvalid ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware adversarial perturbation pipeline"};
  app.require_subcommand(1, 1);

  std::string config_file;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::string flavor;
  std::string ablation;
  bool heldout = false;
  bool ensemble = false;
  std::vector<std::string> sets;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_file, "INI run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "seed (defaults to run.seed)");
    cmd->add_flag("--force", force, "rebuild outputs that already exist");
    cmd->add_option("--set", sets, "override a key: section.key=value (repeatable)");
    return cmd;
  };
  common(app.add_subcommand("gen-data", "generate or index the dataset"));
  auto* train_deployed = common(app.add_subcommand("train-deployed", "train a deployed model"));
  train_deployed->add_option("--flavor", flavor, "normal|fair|lf|rg");
  train_deployed->add_flag("--heldout", heldout, "train the model behind the mock endpoint");
  auto* train_faap = common(app.add_subcommand("train-faap", "train a perturbation generator"));
  train_faap->add_option("--flavor", flavor, "deployed model to attack");
  train_faap->add_option("--ablation", ablation, "none|target_only");
  train_faap->add_flag("--ensemble", ensemble, "train against the eval.surrogates ensemble");
  common(app.add_subcommand("evaluate", "before/after table over flavors and seeds"));
  common(app.add_subcommand("transfer", "ensemble generator against the mock endpoint"));
  auto* visualize = common(app.add_subcommand("visualize", "Grad-CAM grid and embeddings"));
  visualize->add_option("--flavor", flavor, "deployed model to visualise");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(faap::ErrorCode::kConfigInvalid, e.what());
  }

  try {
    faap::ConfigOverrides overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        throw faap::Error(faap::ErrorCode::kConfigInvalid, "--set expects key=value, got " + s);
      }
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (!ablation.empty()) overrides.emplace_back("faap.ablation", ablation);
    const faap::RunConfig config = faap::load_run_config(config_file, overrides);
    const faap::RunContext ctx =
        faap::RunContext::create(config, seed.value_or(config.seed), force);
    const faap::RunLock lock(ctx.dir);
    faap::log_info("run directory " + ctx.dir.string());

    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "gen-data") faap::cmd_gen_data(ctx);
    if (name == "train-deployed") faap::cmd_train_deployed(ctx, flavor, heldout);
    if (name == "train-faap") faap::cmd_train_faap(ctx, flavor, ensemble);
    if (name == "evaluate") faap::cmd_evaluate(ctx);
    if (name == "transfer") faap::cmd_transfer(ctx);
    if (name == "visualize") faap::cmd_visualize(ctx, flavor);
  } catch (const faap::Error& e) {
    std::string what = e.what();
    const std::string prefix = std::string(faap::to_string(e.code())) + ": ";
    if (what.rfind(prefix, 0) == 0) what = what.substr(prefix.size());
    return fail(e.code(), what);
  } catch (const std::exception& e) {
    return fail(faap::ErrorCode::kIoError, e.what());
  }
  return 0;
}
