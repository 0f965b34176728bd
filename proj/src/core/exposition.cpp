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

#include "obs/core/exposition.hpp"

#include <charconv>
#include <cmath>
#include <vector>

#include "obs/core/error.hpp"

namespace obs {
namespace {

[[noreturn]] void Fail(std::string_view line, const std::string& why) {
  throw Error(ErrorCode::kParseError, why + ": '" + std::string(line) + "'");
}

bool IsSpace(char c) { return c == ' ' || c == '\t'; }

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (IsSpace(s.front()) || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (IsSpace(s.back()) || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

// Parses `k="v",k2="v2"` up to and including the closing brace. `pos` points
// just past the opening brace on entry.
LabelList ParseLabels(std::string_view line, std::size_t& pos) {
  LabelList labels;
  while (true) {
    if (pos >= line.size()) Fail(line, "unterminated label set");
    if (line[pos] == '}') {
      ++pos;
      return labels;
    }
    if (!labels.empty()) {
      if (line[pos] != ',') Fail(line, "expected ',' between labels");
      ++pos;
    }
    std::size_t eq = line.find('=', pos);
    if (eq == std::string_view::npos) Fail(line, "label without '='");
    std::string key(line.substr(pos, eq - pos));
    if (key.empty()) Fail(line, "empty label key");
    pos = eq + 1;
    if (pos >= line.size() || line[pos] != '"') Fail(line, "label value must be quoted");
    ++pos;
    std::string value;
    bool closed = false;
    while (pos < line.size()) {
      char c = line[pos++];
      if (c == '"') {
        closed = true;
        break;
      }
      if (c == '\\') {
        if (pos >= line.size()) Fail(line, "dangling escape");
        char e = line[pos++];
        if (e == '"' || e == '\\') {
          value += e;
        } else if (e == 'n') {
          value += '\n';
        } else {
          Fail(line, "unknown escape");
        }
        continue;
      }
      value += c;
    }
    if (!closed) Fail(line, "unterminated label value");
    labels.emplace_back(std::move(key), std::move(value));
  }
}

std::vector<std::string_view> SplitFields(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && IsSpace(s[i])) ++i;
    if (i >= s.size()) break;
    std::size_t start = i;
    while (i < s.size() && !IsSpace(s[i])) ++i;
    out.push_back(s.substr(start, i - start));
  }
  return out;
}

}  // namespace

std::string EscapeLabelValue(std::string_view value) {
  std::string out;
  out.reserve(value.size());
  for (char c : value) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

std::string FormatDouble(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

std::optional<MetricSample> ParseExpositionLine(std::string_view raw) {
  std::string_view line = Trim(raw);
  if (line.empty() || line.front() == '#') return std::nullopt;

  std::size_t pos = 0;
  while (pos < line.size() && line[pos] != '{' && !IsSpace(line[pos])) ++pos;
  std::string_view name = line.substr(0, pos);
  if (name.empty()) Fail(line, "missing metric name");

  LabelList labels;
  if (pos < line.size() && line[pos] == '{') {
    ++pos;
    labels = ParseLabels(line, pos);
  }
  if (pos < line.size() && !IsSpace(line[pos])) Fail(line, "expected space after series");

  auto fields = SplitFields(line.substr(pos));
  if (fields.size() != 4) Fail(line, "expected '<kind> <unit> <value> <timestamp>'");

  auto kind = ParseKind(fields[0]);
  if (!kind) Fail(line, "unknown kind '" + std::string(fields[0]) + "'");

  double value = 0;
  {
    auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), value);
    if (ec != std::errc() || ptr != fields[2].data() + fields[2].size()) {
      Fail(line, "malformed value");
    }
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kInvalidValue, "non-finite value: '" + std::string(line) + "'");
  }

  TimestampMs ts = 0;
  {
    auto [ptr, ec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), ts);
    if (ec != std::errc() || ptr != fields[3].data() + fields[3].size()) {
      Fail(line, "malformed timestamp");
    }
  }
  if (ts <= 0) Fail(line, "timestamp must be positive");

  ConvertedValue converted = ConvertUnit(value, fields[1]);
  if (!std::isfinite(converted.value)) {
    throw Error(ErrorCode::kInvalidValue, "value overflows after unit conversion");
  }

  MetricSample sample;
  sample.key = SeriesKey::Canonicalize(name, std::span<const Label>(labels));
  sample.value = converted.value;
  sample.timestamp = ts;
  sample.unit = std::move(converted.unit);
  sample.kind = *kind;
  return sample;
}

std::string FormatExpositionLine(const MetricSample& sample) {
  std::string out = sample.key.ToString();
  out += ' ';
  out += KindName(sample.kind);
  out += ' ';
  out += WireSymbol(sample.unit.canonical);
  out += ' ';
  out += FormatDouble(sample.value);
  out += ' ';
  out += std::to_string(sample.timestamp);
  out += '\n';
  return out;
}

}  // namespace obs
