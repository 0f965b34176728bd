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

#include "obs/core/metric.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include "obs/core/error.hpp"
#include "obs/core/exposition.hpp"

namespace obs {
namespace {

struct UnitEntry {
  std::string_view symbol;
  CanonicalUnit unit;
  double factor;
  bool divide = false;
};

// clang-format off
constexpr std::array<UnitEntry, 24> kUnitTable{{
    {"ms", CanonicalUnit::kSeconds, 1e-3},
    {"s", CanonicalUnit::kSeconds, 1},
    {"min", CanonicalUnit::kSeconds, 60},
    {"h", CanonicalUnit::kSeconds, 3600},
    {"B", CanonicalUnit::kBytes, 1},
    {"kB", CanonicalUnit::kBytes, 1e3},
    {"MB", CanonicalUnit::kBytes, 1e6},
    {"GB", CanonicalUnit::kBytes, 1e9},
    {"KiB", CanonicalUnit::kBytes, 1024.0},
    {"MiB", CanonicalUnit::kBytes, 1048576.0},
    {"GiB", CanonicalUnit::kBytes, 1073741824.0},
    {"J", CanonicalUnit::kJoules, 1},
    {"Wh", CanonicalUnit::kJoules, 3600},
    {"kWh", CanonicalUnit::kJoules, 3.6e6},
    {"mWh", CanonicalUnit::kJoules, 3.6},
    {"W", CanonicalUnit::kWatts, 1},
    {"mW", CanonicalUnit::kWatts, 1e-3},
    {"kW", CanonicalUnit::kWatts, 1e3},
    // Percent is the one divide entry: x / 100 is exact where x * 0.01 is not.
    {"%", CanonicalUnit::kRatio, 100, true},
    {"ratio", CanonicalUnit::kRatio, 1},
    {"degC", CanonicalUnit::kCelsius, 1},
    {"count", CanonicalUnit::kCount, 1},
    {"", CanonicalUnit::kNone, 1},
    {"none", CanonicalUnit::kNone, 1},
}};
// clang-format on

bool IsLower(char c) { return c >= 'a' && c <= 'z'; }
bool IsDigit(char c) { return c >= '0' && c <= '9'; }

std::string Lower(std::string_view in) {
  std::string out(in);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace

std::string_view CanonicalSymbol(CanonicalUnit unit) {
  switch (unit) {
    case CanonicalUnit::kSeconds: return "s";
    case CanonicalUnit::kBytes: return "B";
    case CanonicalUnit::kJoules: return "J";
    case CanonicalUnit::kWatts: return "W";
    case CanonicalUnit::kCelsius: return "degC";
    case CanonicalUnit::kRatio: return "ratio";
    case CanonicalUnit::kCount: return "count";
    case CanonicalUnit::kNone: return "";
  }
  return "";
}

std::string_view WireSymbol(CanonicalUnit unit) {
  return unit == CanonicalUnit::kNone ? std::string_view("none") : CanonicalSymbol(unit);
}

ConvertedValue ConvertUnit(double value, std::string_view source_symbol) {
  for (const auto& entry : kUnitTable) {
    if (entry.symbol == source_symbol) {
      double converted = entry.divide ? value / entry.factor : value * entry.factor;
      return {converted, Unit{entry.unit, std::string(source_symbol)}};
    }
  }
  throw Error(ErrorCode::kUnknownUnit, "unknown unit '" + std::string(source_symbol) + "'");
}

std::string_view KindName(MetricKind kind) {
  switch (kind) {
    case MetricKind::kGauge: return "gauge";
    case MetricKind::kCounter: return "counter";
    case MetricKind::kEvent: return "event";
  }
  return "gauge";
}

std::optional<MetricKind> ParseKind(std::string_view text) {
  if (text == "gauge") return MetricKind::kGauge;
  if (text == "counter") return MetricKind::kCounter;
  if (text == "event") return MetricKind::kEvent;
  return std::nullopt;
}

bool IsValidMetricName(std::string_view name) {
  if (name.empty() || !(IsLower(name[0]) || name[0] == '_')) return false;
  return std::all_of(name.begin() + 1, name.end(), [](char c) {
    return IsLower(c) || IsDigit(c) || c == '_' || c == ':';
  });
}

bool IsValidLabelKey(std::string_view key) {
  if (key.empty() || !(IsLower(key[0]) || key[0] == '_')) return false;
  return std::all_of(key.begin() + 1, key.end(),
                     [](char c) { return IsLower(c) || IsDigit(c) || c == '_'; });
}

SeriesKey SeriesKey::Canonicalize(std::string_view name, std::span<const Label> labels) {
  if (name.empty()) throw Error(ErrorCode::kInvalidName, "metric name is empty");
  if (labels.size() >= kMaxLabels) {
    throw Error(ErrorCode::kTooManyLabels,
                "series has " + std::to_string(labels.size()) + " labels, limit is " +
                    std::to_string(kMaxLabels - 1));
  }
  std::string canonical_name = Lower(name);
  if (!IsValidMetricName(canonical_name)) {
    throw Error(ErrorCode::kInvalidName, "invalid metric name '" + std::string(name) + "'");
  }
  LabelList out;
  out.reserve(labels.size());
  for (const auto& [key, value] : labels) {
    std::string canonical_key = Lower(key);
    if (!IsValidLabelKey(canonical_key)) {
      throw Error(ErrorCode::kInvalidLabelKey, "invalid label key '" + key + "'");
    }
    out.emplace_back(std::move(canonical_key), value);
  }
  std::sort(out.begin(), out.end(),
            [](const Label& a, const Label& b) { return a.first < b.first; });
  auto dup = std::adjacent_find(out.begin(), out.end(),
                                [](const Label& a, const Label& b) { return a.first == b.first; });
  if (dup != out.end()) {
    throw Error(ErrorCode::kInvalidLabelKey, "duplicate label key '" + dup->first + "'");
  }
  return SeriesKey(std::move(canonical_name), std::move(out));
}

SeriesKey SeriesKey::Canonicalize(std::string_view name, const LabelMap& labels) {
  LabelList list(labels.begin(), labels.end());
  return Canonicalize(name, std::span<const Label>(list));
}

std::optional<std::string_view> SeriesKey::label(std::string_view key) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), key,
                             [](const Label& l, std::string_view k) { return l.first < k; });
  if (it == labels_.end() || it->first != key) return std::nullopt;
  return std::string_view(it->second);
}

std::string SeriesKey::ToString() const {
  std::string out = name_;
  out += '{';
  bool first = true;
  for (const auto& [key, value] : labels_) {
    if (!first) out += ',';
    first = false;
    out += key;
    out += "=\"";
    out += EscapeLabelValue(value);
    out += '"';
  }
  out += '}';
  return out;
}

std::size_t SeriesKeyHash::operator()(const SeriesKey& key) const noexcept {
  std::size_t h = std::hash<std::string>{}(key.name());
  for (const auto& [k, v] : key.labels()) {
    h ^= std::hash<std::string>{}(k) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::hash<std::string>{}(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

TimestampMs WallClockMs() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace obs
