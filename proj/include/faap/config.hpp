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

// Run configuration: an INI document with [run], [data], [deployed], [faap],
// [eval] and [viz] sections. Every key is optional; unknown sections or keys
// are rejected.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "faap/data.hpp"
#include "faap/eval.hpp"
#include "faap/faap.hpp"
#include "faap/model_zoo.hpp"
#include "faap/viz.hpp"

namespace faap {

struct DataSection {
  std::string source = "synthetic";  // synthetic | corpus
  std::filesystem::path corpus;
  int image_size = 32;
  std::string target_attribute = "Target";
  std::string protected_attribute = "Protected";
  BiasSpec bias;
};

struct DeployedSection {
  std::string flavor = "normal";
  double fair_weight = 0.5;      // adversary weight of the fair flavour
  double reversal_weight = 1.0;  // adversary weight of the rg flavour
  double flip_rate = 0.5;        // label-flip rate of the lf flavour
  TrainConfig train;
  /// The architecture behind the mock endpoint in transfer runs.
  ArchitectureConfig heldout;

  DeployedSection() {
    heldout.base_width = 12;
    heldout.residual = false;
  }
  FlavorSpec flavor_spec(const std::string& name) const;
};

struct EvalSection {
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<std::string> flavors{"normal", "fair", "lf", "rg"};
  std::vector<std::string> surrogates{"normal", "fair"};
  std::string endpoint = "mock";
  LabelScheme label_scheme = LabelScheme::kSmile;
  double failure_rate = 0.0;
  int max_attempts = 3;
};

struct VizSection {
  bool grad_cam = true;
  bool embedding = true;
  int grid_samples = 6;
  int embed_points = 400;
  TsneConfig tsne;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs";
  DataSection data;
  DeployedSection deployed;
  FaapConfig faap;
  EvalSection eval;
  VizSection viz;

  /// Throws ConfigInvalid naming the offending key.
  void validate() const;
  /// Canonical form; excludes run.seed, run.output_dir and faap.ablation,
  /// which select a run or an artifact variant rather than an experiment.
  nlohmann::json to_json() const;
  /// Hex FNV-1a of to_json().dump().
  std::string hash() const;
};

/// `section.key=value` assignments, applied in order.
using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Defaults, then the file (when non-empty), then the overrides; the result
/// is validated. Throws ConfigInvalid on unknown keys, malformed values or a
/// failed validation and MissingArtifact when the file is absent.
RunConfig load_run_config(const std::filesystem::path& file, const ConfigOverrides& overrides = {});

/// Applies one dotted assignment; throws ConfigInvalid.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Every accepted `section.key`, sorted.
std::vector<std::string> config_keys();

}  // namespace faap
