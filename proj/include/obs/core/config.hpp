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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace obs {

/// Sectioned `key = value` configuration text.
///
///   # comment
///   components = collector, gateway
///   [collector]
///   interval_seconds = 5
///   power_model.p_idle_watts = 50
///
/// Keys inside a section are addressed as `section.key`, so the example
/// above exposes `collector.power_model.p_idle_watts`.
class ConfigFile {
 public:
  static ConfigFile Load(const std::filesystem::path& path);
  static ConfigFile ParseText(std::string_view text);

  std::optional<std::string> Get(std::string_view key) const;
  std::string GetOr(std::string_view key, std::string fallback) const;
  /// Throws Error(kParseError) if present but not numeric.
  double GetDouble(std::string_view key, double fallback) const;
  std::int64_t GetInt(std::string_view key, std::int64_t fallback) const;

  /// Every key beginning with `prefix`, in sorted order.
  std::vector<std::string> KeysWithPrefix(std::string_view prefix) const;
  /// Source line of a key, 0 if absent.
  int LineOf(std::string_view key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  void Set(std::string key, std::string value) { entries_[std::move(key)] = std::move(value); }

 private:
  std::map<std::string, std::string> entries_;
  std::map<std::string, int> lines_;
};

using EnvMap = std::map<std::string, std::string>;

/// Reads a `.env` style file: `NAME=value` per line, `#` comments, optional
/// surrounding quotes on the value.
EnvMap LoadEnvFile(const std::filesystem::path& path);
EnvMap ParseEnvText(std::string_view text);

/// Splits on commas and trims whitespace; drops empty items.
std::vector<std::string> SplitList(std::string_view text, char sep = ',');

std::string_view TrimView(std::string_view s);

struct HttpUrl {
  std::string base;  // scheme://host:port
  std::string path;  // starts with '/'

  /// Throws Error(kInvalidArgument) if the URL has no scheme or host.
  static HttpUrl Parse(std::string_view url);
};

}  // namespace obs
