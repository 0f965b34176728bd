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

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace obs {

/// Milliseconds since the Unix epoch, UTC.
using TimestampMs = std::int64_t;

using Label = std::pair<std::string, std::string>;
using LabelList = std::vector<Label>;
using LabelMap = std::map<std::string, std::string>;

inline constexpr std::size_t kMaxLabels = 64;

enum class CanonicalUnit { kSeconds, kBytes, kJoules, kWatts, kCelsius, kRatio, kCount, kNone };

/// Symbol of the canonical unit: s, B, J, W, degC, ratio, count, "".
std::string_view CanonicalSymbol(CanonicalUnit unit);

/// Token written on the wire. Identical to CanonicalSymbol except that the
/// dimensionless unit is spelled `none` so the field is never empty.
std::string_view WireSymbol(CanonicalUnit unit);

struct Unit {
  CanonicalUnit canonical = CanonicalUnit::kNone;
  // Symbol the value arrived with, kept for provenance only.
  std::string source_symbol;

  bool operator==(const Unit& other) const { return canonical == other.canonical; }
};

struct ConvertedValue {
  double value = 0;
  Unit unit;
};

/// Multiplies `value` by the table factor for `source_symbol`.
/// Throws Error(kUnknownUnit) for symbols outside the table.
ConvertedValue ConvertUnit(double value, std::string_view source_symbol);

enum class MetricKind { kGauge, kCounter, kEvent };

std::string_view KindName(MetricKind kind);
std::optional<MetricKind> ParseKind(std::string_view text);

/// Canonical identity of a series: metric name plus labels sorted by key.
class SeriesKey {
 public:
  SeriesKey() = default;

  /// Lowercases and validates name and label keys, then sorts labels.
  /// Input order is irrelevant. Throws kInvalidName, kInvalidLabelKey or
  /// kTooManyLabels.
  static SeriesKey Canonicalize(std::string_view name, std::span<const Label> labels);
  static SeriesKey Canonicalize(std::string_view name, const LabelMap& labels);

  const std::string& name() const { return name_; }
  const LabelList& labels() const { return labels_; }

  std::optional<std::string_view> label(std::string_view key) const;
  LabelMap label_map() const { return LabelMap(labels_.begin(), labels_.end()); }

  /// `name{k="v",...}` with exposition escaping.
  std::string ToString() const;

  friend auto operator<=>(const SeriesKey&, const SeriesKey&) = default;
  friend bool operator==(const SeriesKey&, const SeriesKey&) = default;

 private:
  SeriesKey(std::string name, LabelList labels)
      : name_(std::move(name)), labels_(std::move(labels)) {}

  std::string name_;
  LabelList labels_;
};

struct SeriesKeyHash {
  std::size_t operator()(const SeriesKey& key) const noexcept;
};

struct MetricSample {
  SeriesKey key;
  double value = 0;
  TimestampMs timestamp = 0;
  Unit unit;
  MetricKind kind = MetricKind::kGauge;

  friend bool operator==(const MetricSample&, const MetricSample&) = default;
};

bool IsValidMetricName(std::string_view name);
bool IsValidLabelKey(std::string_view key);

using Clock = std::function<TimestampMs()>;

/// Wall clock in milliseconds.
TimestampMs WallClockMs();

}  // namespace obs
