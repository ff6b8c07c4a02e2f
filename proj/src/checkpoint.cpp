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

#include "faap/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace faap {

namespace {

constexpr const char* kMagic = "FAAPCKPT";

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

const Network<float>& Checkpoint::network(const std::string& name) const {
  for (const auto& [n, net] : networks) {
    if (n == name) return net;
  }
  throw Error(ErrorCode::kCheckpointCorrupt, "checkpoint has no network '" + name + "'");
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::string payload;
  nlohmann::json nets = nlohmann::json::array();
  for (const auto& [name, net] : checkpoint.networks) {
    const Eigen::VectorXf flat = net.flatten();
    payload.append(reinterpret_cast<const char*>(flat.data()),
                   sizeof(float) * static_cast<std::size_t>(flat.size()));
    nets.push_back({{"name", name}, {"layers", net.describe()}, {"count", flat.size()}});
  }
  nlohmann::json header = {{"kind", checkpoint.kind},
                           {"metadata", checkpoint.metadata},
                           {"networks", nets},
                           {"checksum", hex64(fnv1a(payload.data(), payload.size()))}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out << kMagic << ' ' << kCheckpointVersion << '\n' << header.dump() << '\n';
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingArtifact, "checkpoint not found: " + path.string());
  auto corrupt = [&](const std::string& why) {
    return Error(ErrorCode::kCheckpointCorrupt, path.string() + ": " + why);
  };
  std::string magic_line;
  std::getline(in, magic_line);
  std::istringstream magic(magic_line);
  std::string tag;
  int version = 0;
  magic >> tag >> version;
  if (tag != kMagic) throw corrupt("not a checkpoint");
  if (version != kCheckpointVersion) throw corrupt("unsupported version " + std::to_string(version));
  std::string header_line;
  std::getline(in, header_line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception&) {
    throw corrupt("unreadable header");
  }
  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (header.value("checksum", "") != hex64(fnv1a(payload.data(), payload.size()))) {
    throw corrupt("checksum mismatch");
  }
  Checkpoint ckpt;
  ckpt.kind = header.value("kind", "");
  if (ckpt.kind != expected_kind) {
    throw corrupt("expected a '" + expected_kind + "' checkpoint, found '" + ckpt.kind + "'");
  }
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  std::size_t offset = 0;
  for (const auto& entry : header.at("networks")) {
    Network<float> net = Network<float>::from_description(entry.at("layers"));
    const auto count = entry.at("count").get<Eigen::Index>();
    const std::size_t bytes = sizeof(float) * static_cast<std::size_t>(count);
    if (count != net.num_parameters() || offset + bytes > payload.size()) {
      throw corrupt("parameter count mismatch");
    }
    Eigen::VectorXf flat(count);
    std::memcpy(flat.data(), payload.data() + offset, bytes);
    offset += bytes;
    net.assign(flat);
    ckpt.networks.emplace_back(entry.at("name").get<std::string>(), std::move(net));
  }
  if (offset != payload.size()) throw corrupt("trailing payload bytes");
  return ckpt;
}

}  // namespace faap
