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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace faap {

enum class ErrorCode {
  kEmptyInput,
  kEmptyGroup,
  kEmptyClassWithinGroup,
  kInvalidRecord,
  kShapeMismatch,
  kMissingAttribute,
  kCorruptImage,
  kEmptySplit,
  kInvalidSpec,
  kInvalidConfig,
  kNonConvergence,
  kFrozenViolation,
  kNonFiniteLoss,
  kEndpointFailure,
  kTooFewSamples,
  kLengthMismatch,
  kConfigInvalid,
  kMissingArtifact,
  kCheckpointCorrupt,
  kIoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kEmptyClassWithinGroup: return "EmptyClassWithinGroup";
    case ErrorCode::kInvalidRecord: return "InvalidRecord";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kMissingAttribute: return "MissingAttribute";
    case ErrorCode::kCorruptImage: return "CorruptImage";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kFrozenViolation: return "FrozenViolation";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEndpointFailure: return "EndpointFailure";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kMissingArtifact: return "MissingArtifact";
    case ErrorCode::kCheckpointCorrupt: return "CheckpointCorrupt";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace faap
