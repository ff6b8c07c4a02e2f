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

// Versioned checkpoint container:
//
//   FAAPCKPT <version>\n
//   <single-line JSON header>\n
//   <little-endian float32 parameters of each network, in header order>
//
// The header records the container kind, free-form metadata, each network's
// layer description and parameter count, and an FNV-1a checksum of the
// payload. Loading verifies magic, version, kind and checksum.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "faap/network.hpp"

namespace faap {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;
  nlohmann::json metadata;
  std::vector<std::pair<std::string, Network<float>>> networks;

  const Network<float>& network(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws MissingArtifact when the file is absent and CheckpointCorrupt on
/// any format, version, kind or checksum mismatch.
Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& expected_kind);

}  // namespace faap
