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

#include <optional>
#include <string>
#include <string_view>

#include "obs/core/metric.hpp"

namespace obs {

// Line format, one sample per line:
//
//   <name>{<k>="<v>",...} <kind> <unit-symbol> <value> <timestamp-ms>\n
//
// Label values escape `"` and `\` with a backslash (and newline as `\n`).
// Values use the shortest decimal that round-trips. `#` starts a comment.

/// Parses one line. Returns nullopt for comment and blank lines.
/// Throws kParseError, kInvalidValue, kUnknownUnit or a key canonicalization
/// error.
std::optional<MetricSample> ParseExpositionLine(std::string_view line);

/// Formats a sample, including the trailing newline.
std::string FormatExpositionLine(const MetricSample& sample);

/// Shortest decimal representation that parses back to the same double.
std::string FormatDouble(double value);

std::string EscapeLabelValue(std::string_view value);

}  // namespace obs
