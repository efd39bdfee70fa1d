// Copyright 2026 The InnerSelf Authors.
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace innerself {

/// Every failure the pipeline can report. The API layer maps each one to a
/// stable wire code via error_code_name().
enum class ErrorCode {
  kInvalidArgument,
  kInvalidAudio,
  kInvalidUtf8,
  kClipTooShort,
  kSilentClip,
  kEmptyTranscript,
  kEmptyText,
  kAdapterUnavailable,
  kModalityMismatch,
  kNonFiniteInput,
  kDimensionMismatch,
  kContextOverflow,
  kEnrollmentRejected,
  kNoValidSamples,
  kOversizeAppend,
  kStoreUnavailable,
  kChunkMissing,
  kChecksumMismatch,
  kUnknownSession,
  kBusy,
  kScriptParseError,
  kConfigError,
  kTableError,
  kEmptyUtterance,
  kNoVoiceProfile,
  kNotFound,
};

std::string_view error_code_name(ErrorCode code);

/// HTTP status used when the error reaches the API.
int http_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  // Structured context, e.g. {"seq": 3} or {"retry_after_ms": 1000}.
  const nlohmann::json& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  nlohmann::json details_;
};

}  // namespace innerself
