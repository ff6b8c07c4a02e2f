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

// Pipeline commands behind the `faap` executable.
//
// Layout under <root>/<config hash>/:
//   manifest.json                     canonical config, hash, version
//   data/s<seed>/                     images, attribute table, split indices
//   models/<flavor>_s<seed>.ckpt      deployed models
//   models/heldout_s<seed>.ckpt       the model behind the mock endpoint
//   generators/<flavor>_s<seed>.ckpt  perturbation generators (a
//                                     `_target_only` suffix for the ablation)
//   generators/ensemble_s<seed>.ckpt  surrogate-ensemble generator
//   logs/, reports/, figures/
//
// <root> is $FAAP_OUTPUT_ROOT when set, else run.output_dir.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "faap/config.hpp"

namespace faap {

inline constexpr const char* kOutputRootEnv = "FAAP_OUTPUT_ROOT";

struct RunContext {
  RunConfig config;
  std::uint64_t seed = 0;
  bool force = false;
  std::filesystem::path dir;

  static RunContext create(RunConfig config, std::uint64_t seed, bool force);

  std::filesystem::path data_dir(std::uint64_t s) const;
  std::filesystem::path model_path(const std::string& flavor, std::uint64_t s) const;
  std::filesystem::path heldout_path(std::uint64_t s) const;
  std::filesystem::path generator_path(const std::string& flavor, std::uint64_t s) const;
  std::filesystem::path ensemble_path(std::uint64_t s) const;
  std::filesystem::path reports_dir() const { return dir / "reports"; }
  std::filesystem::path figures_dir() const { return dir / "figures"; }
  std::filesystem::path logs_dir() const { return dir / "logs"; }

  /// {config_hash, seed, version} stamped into every artifact.
  nlohmann::json provenance(std::uint64_t s) const;
};

/// Exclusive `.lock` file in the run directory for the lifetime of the
/// object. Throws IoError when another process holds it.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

DatasetBundle load_bundle(const RunContext& ctx, std::uint64_t seed);

void cmd_gen_data(const RunContext& ctx);
/// `flavor` empty means deployed.flavor; `heldout` trains the endpoint model.
void cmd_train_deployed(const RunContext& ctx, const std::string& flavor, bool heldout = false);
/// `ensemble` trains one generator against every eval.surrogates model.
void cmd_train_faap(const RunContext& ctx, const std::string& flavor, bool ensemble = false);
/// Before/after grid over eval.flavors x eval.seeds -> reports/table1.*.
void cmd_evaluate(const RunContext& ctx);
/// Ensemble generators against the mock endpoint over eval.seeds ->
/// reports/table2.* and raw logs.
void cmd_transfer(const RunContext& ctx);
/// Grad-CAM grid and feature embeddings for one seed -> figures/.
void cmd_visualize(const RunContext& ctx, const std::string& flavor);

/// Logs to standard error with a fixed prefix.
void log_info(const std::string& message);

}  // namespace faap
