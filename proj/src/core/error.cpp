// Copyright 2026 The Observatory Authors
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

#include "obs/core/error.hpp"

namespace obs {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidName: return "InvalidName";
    case ErrorCode::kInvalidLabelKey: return "InvalidLabelKey";
    case ErrorCode::kTooManyLabels: return "TooManyLabels";
    case ErrorCode::kUnknownUnit: return "UnknownUnit";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidValue: return "InvalidValue";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSourceUnavailable: return "SourceUnavailable";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kInsufficientPoints: return "InsufficientPoints";
    case ErrorCode::kNonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::kNegativeCounter: return "NegativeCounter";
    case ErrorCode::kTimestampOutOfWindow: return "TimestampOutOfWindow";
    case ErrorCode::kRetentionViolation: return "RetentionViolation";
    case ErrorCode::kStorageFull: return "StorageFull";
    case ErrorCode::kInvalidRange: return "InvalidRange";
    case ErrorCode::kQuantileNeedsRaw: return "QuantileNeedsRaw";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kUnalignedWindow: return "UnalignedWindow";
    case ErrorCode::kInconsistentStats: return "InconsistentStats";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kWindowTooSmall: return "WindowTooSmall";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kInsufficientOverlap: return "InsufficientOverlap";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kQueryFailed: return "QueryFailed";
    case ErrorCode::kDropped: return "Dropped";
    case ErrorCode::kUnauthenticated: return "Unauthenticated";
    case ErrorCode::kForbidden: return "Forbidden";
    case ErrorCode::kScopeConflict: return "ScopeConflict";
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kValidationFailed: return "ValidationFailed";
    case ErrorCode::kStackUnreachable: return "StackUnreachable";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace obs
