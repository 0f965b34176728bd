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

#include "obs/core/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "obs/core/error.hpp"

namespace obs {
namespace {

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view TrimView(std::string_view s) {
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string> SplitList(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(sep, start);
    if (end == std::string_view::npos) end = text.size();
    auto item = TrimView(text.substr(start, end - start));
    if (!item.empty()) out.emplace_back(item);
    start = end + 1;
  }
  return out;
}

ConfigFile ConfigFile::Load(const std::filesystem::path& path) {
  return ParseText(ReadFile(path));
}

ConfigFile ConfigFile::ParseText(std::string_view text) {
  ConfigFile cfg;
  std::string section;
  int line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = TrimView(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(line_no) + ": unterminated section header");
      }
      section = std::string(TrimView(line.substr(1, line.size() - 2)));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    auto key = TrimView(line.substr(0, eq));
    auto value = TrimView(line.substr(eq + 1));
    if (key.empty()) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": empty key");
    }
    std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    cfg.entries_[full] = std::string(value);
    cfg.lines_[full] = line_no;
  }
  return cfg;
}

std::optional<std::string> ConfigFile::Get(std::string_view key) const {
  auto it = entries_.find(std::string(key));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string ConfigFile::GetOr(std::string_view key, std::string fallback) const {
  auto v = Get(key);
  return v ? *v : std::move(fallback);
}

double ConfigFile::GetDouble(std::string_view key, double fallback) const {
  auto v = Get(key);
  if (!v) return fallback;
  double out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw Error(ErrorCode::kParseError, std::string(key) + ": not a number: '" + *v + "'");
  }
  return out;
}

std::int64_t ConfigFile::GetInt(std::string_view key, std::int64_t fallback) const {
  auto v = Get(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw Error(ErrorCode::kParseError, std::string(key) + ": not an integer: '" + *v + "'");
  }
  return out;
}

std::vector<std::string> ConfigFile::KeysWithPrefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (auto it = entries_.lower_bound(std::string(prefix)); it != entries_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    out.push_back(it->first);
  }
  return out;
}

int ConfigFile::LineOf(std::string_view key) const {
  auto it = lines_.find(std::string(key));
  return it == lines_.end() ? 0 : it->second;
}

EnvMap ParseEnvText(std::string_view text) {
  EnvMap env;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = TrimView(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    if (line.substr(0, 7) == "export ") line = TrimView(line.substr(7));
    auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    auto key = TrimView(line.substr(0, eq));
    auto value = TrimView(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
        value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    env[std::string(key)] = std::string(value);
  }
  return env;
}

EnvMap LoadEnvFile(const std::filesystem::path& path) { return ParseEnvText(ReadFile(path)); }

HttpUrl HttpUrl::Parse(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos || scheme_end == 0) {
    throw Error(ErrorCode::kInvalidArgument, "URL needs a scheme: '" + std::string(url) + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  HttpUrl out;
  if (path_start == std::string_view::npos) {
    out.base = std::string(url);
    out.path = "/";
  } else {
    out.base = std::string(url.substr(0, path_start));
    out.path = std::string(url.substr(path_start));
  }
  if (out.base.size() <= scheme_end + 3) {
    throw Error(ErrorCode::kInvalidArgument, "URL needs a host: '" + std::string(url) + "'");
  }
  return out;
}

}  // namespace obs
