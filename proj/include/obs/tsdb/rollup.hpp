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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "obs/core/metric.hpp"

namespace obs::tsdb {

inline constexpr TimestampMs kSecond = 1'000;
inline constexpr TimestampMs kMinute = 60'000;
inline constexpr TimestampMs kHour = 3'600'000;
inline constexpr TimestampMs kDay = 24 * kHour;

/// Floor division that is correct for negative timestamps.
inline TimestampMs AlignDown(TimestampMs t, TimestampMs resolution) {
  TimestampMs q = t / resolution;
  if (t % resolution != 0 && t < 0) --q;
  return q * resolution;
}

/// Distilled summary of one window of raw points.
struct RollupPoint {
  TimestampMs window_start = 0;
  TimestampMs window_len = 0;
  std::uint64_t count = 0;
  double sum = 0;
  double min = 0;
  double max = 0;
  double sum_sq = 0;

  static RollupPoint FromValue(TimestampMs window_start, TimestampMs window_len, double v);

  void Add(double v);
  /// Folds `other` in. Window fields are left untouched.
  void Merge(const RollupPoint& other);

  double mean() const { return sum / static_cast<double>(count); }
  /// Population variance clamped at zero.
  double variance() const;

  friend bool operator==(const RollupPoint&, const RollupPoint&) = default;
};

/// Folds fine rollups into coarser windows of `resolution`. Input must be
/// sorted by window_start; output is sorted and omits empty windows.
std::vector<RollupPoint> Reaggregate(std::span<const RollupPoint> fine, TimestampMs resolution);

struct RetentionPolicy {
  TimestampMs raw = 24 * kHour;
  TimestampMs rollup_1m = 7 * kDay;
  TimestampMs rollup_1h = 90 * kDay;

  /// Throws Error(kInvalidArgument) unless raw < rollup_1m < rollup_1h.
  void Validate() const;
};

enum class Aggregation { kRaw, kMean, kMin, kMax, kSum, kCount, kQuantile };

struct AggSpec {
  Aggregation kind = Aggregation::kRaw;
  double q = 0;  // only for kQuantile

  /// Accepts raw, mean, min, max, sum, count, quantile(0.99).
  static AggSpec Parse(std::string_view text);
  std::string ToString() const;

  friend bool operator==(const AggSpec&, const AggSpec&) = default;
};

/// Nearest-rank quantile: the ceil(q*n)-th smallest value (1-based).
/// Throws kEmptyInput for no values and kInvalidArgument for q outside (0, 1].
double Quantile(std::span<const double> values, double q);

}  // namespace obs::tsdb
