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

#include "innerself/error.hpp"

namespace innerself {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kInvalidAudio: return "INVALID_AUDIO";
    case ErrorCode::kInvalidUtf8: return "INVALID_UTF8";
    case ErrorCode::kClipTooShort: return "CLIP_TOO_SHORT";
    case ErrorCode::kSilentClip: return "SILENT_CLIP";
    case ErrorCode::kEmptyTranscript: return "EMPTY_TRANSCRIPT";
    case ErrorCode::kEmptyText: return "EMPTY_TEXT";
    case ErrorCode::kAdapterUnavailable: return "ADAPTER_UNAVAILABLE";
    case ErrorCode::kModalityMismatch: return "MODALITY_MISMATCH";
    case ErrorCode::kNonFiniteInput: return "NON_FINITE_INPUT";
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kContextOverflow: return "CONTEXT_OVERFLOW";
    case ErrorCode::kEnrollmentRejected: return "ENROLLMENT_REJECTED";
    case ErrorCode::kNoValidSamples: return "NO_VALID_SAMPLES";
    case ErrorCode::kOversizeAppend: return "OVERSIZE_APPEND";
    case ErrorCode::kStoreUnavailable: return "STORE_UNAVAILABLE";
    case ErrorCode::kChunkMissing: return "CHUNK_MISSING";
    case ErrorCode::kChecksumMismatch: return "CHECKSUM_MISMATCH";
    case ErrorCode::kUnknownSession: return "UNKNOWN_SESSION";
    case ErrorCode::kBusy: return "BUSY";
    case ErrorCode::kScriptParseError: return "SCRIPT_PARSE_ERROR";
    case ErrorCode::kConfigError: return "CONFIG_ERROR";
    case ErrorCode::kTableError: return "TABLE_ERROR";
    case ErrorCode::kEmptyUtterance: return "EMPTY_UTTERANCE";
    case ErrorCode::kNoVoiceProfile: return "NO_VOICE_PROFILE";
    case ErrorCode::kNotFound: return "NOT_FOUND";
  }
  return "UNKNOWN";
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSession:
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kBusy:
    case ErrorCode::kNoVoiceProfile:
      return 409;
    case ErrorCode::kOversizeAppend:
      return 413;
    case ErrorCode::kAdapterUnavailable:
    case ErrorCode::kStoreUnavailable:
      return 503;
    case ErrorCode::kChunkMissing:
    case ErrorCode::kChecksumMismatch:
    case ErrorCode::kConfigError:
    case ErrorCode::kTableError:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kModalityMismatch:
      return 500;
    case ErrorCode::kClipTooShort:
    case ErrorCode::kSilentClip:
    case ErrorCode::kEmptyTranscript:
    case ErrorCode::kEmptyUtterance:
    case ErrorCode::kEnrollmentRejected:
    case ErrorCode::kNoValidSamples:
    case ErrorCode::kContextOverflow:
      return 422;
    default:
      return 400;
  }
}

}  // namespace innerself
