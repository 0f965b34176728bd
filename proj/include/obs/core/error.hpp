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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace obs {

enum class ErrorCode {
  kInvalidName,
  kInvalidLabelKey,
  kTooManyLabels,
  kUnknownUnit,
  kParseError,
  kInvalidValue,
  kInvalidArgument,
  kSourceUnavailable,
  kOutOfRange,
  kInsufficientPoints,
  kNonMonotonicTime,
  kNegativeCounter,
  kTimestampOutOfWindow,
  kRetentionViolation,
  kStorageFull,
  kInvalidRange,
  kQuantileNeedsRaw,
  kEmptyInput,
  kUnalignedWindow,
  kInconsistentStats,
  kNotFound,
  kWindowTooSmall,
  kInsufficientData,
  kInsufficientOverlap,
  kZeroVariance,
  kQueryFailed,
  kDropped,
  kUnauthenticated,
  kForbidden,
  kScopeConflict,
  kFileNotFound,
  kValidationFailed,
  kStackUnreachable,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

/// Error raised by every module. `code()` is stable and maps onto the
/// error names used in HTTP responses and reject lists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace obs
