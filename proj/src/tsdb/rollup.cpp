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

#include "obs/tsdb/rollup.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "obs/core/error.hpp"
#include "obs/core/exposition.hpp"

namespace obs::tsdb {

RollupPoint RollupPoint::FromValue(TimestampMs window_start, TimestampMs window_len, double v) {
  return RollupPoint{window_start, window_len, 1, v, v, v, v * v};
}

void RollupPoint::Add(double v) {
  if (count == 0) {
    min = max = v;
  } else {
    min = std::min(min, v);
    max = std::max(max, v);
  }
  ++count;
  sum += v;
  sum_sq += v * v;
}

void RollupPoint::Merge(const RollupPoint& other) {
  if (other.count == 0) return;
  if (count == 0) {
    min = other.min;
    max = other.max;
  } else {
    min = std::min(min, other.min);
    max = std::max(max, other.max);
  }
  count += other.count;
  sum += other.sum;
  sum_sq += other.sum_sq;
}

double RollupPoint::variance() const {
  double m = mean();
  return std::max(0.0, sum_sq / static_cast<double>(count) - m * m);
}

std::vector<RollupPoint> Reaggregate(std::span<const RollupPoint> fine, TimestampMs resolution) {
  std::vector<RollupPoint> out;
  for (const auto& p : fine) {
    TimestampMs start = AlignDown(p.window_start, resolution);
    if (out.empty() || out.back().window_start != start) {
      out.push_back(RollupPoint{start, resolution, 0, 0, 0, 0, 0});
    }
    out.back().Merge(p);
  }
  return out;
}

void RetentionPolicy::Validate() const {
  if (!(raw > 0 && raw < rollup_1m && rollup_1m < rollup_1h)) {
    throw Error(ErrorCode::kInvalidArgument,
                "retention must satisfy 0 < raw < rollup_1m < rollup_1h");
  }
}

AggSpec AggSpec::Parse(std::string_view text) {
  if (text == "raw") return {Aggregation::kRaw};
  if (text == "mean" || text == "avg") return {Aggregation::kMean};
  if (text == "min") return {Aggregation::kMin};
  if (text == "max") return {Aggregation::kMax};
  if (text == "sum") return {Aggregation::kSum};
  if (text == "count") return {Aggregation::kCount};
  if (text.starts_with("quantile(") && text.ends_with(")")) {
    auto inner = text.substr(9, text.size() - 10);
    double q = 0;
    auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), q);
    if (ec != std::errc() || ptr != inner.data() + inner.size() || !(q > 0 && q <= 1)) {
      throw Error(ErrorCode::kInvalidArgument, "quantile must be in (0, 1]");
    }
    return {Aggregation::kQuantile, q};
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown aggregation '" + std::string(text) + "'");
}

std::string AggSpec::ToString() const {
  switch (kind) {
    case Aggregation::kRaw: return "raw";
    case Aggregation::kMean: return "mean";
    case Aggregation::kMin: return "min";
    case Aggregation::kMax: return "max";
    case Aggregation::kSum: return "sum";
    case Aggregation::kCount: return "count";
    case Aggregation::kQuantile: return "quantile(" + FormatDouble(q) + ")";
  }
  return "raw";
}

double Quantile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "quantile of empty input");
  if (!(q > 0 && q <= 1)) throw Error(ErrorCode::kInvalidArgument, "quantile must be in (0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  // q is a decimal fraction; q*n landing a rounding error above an integer
  // (0.07 * 100 == 7.000000000000001) must still select that integer rank.
  double exact = q * static_cast<double>(sorted.size());
  double nearest = std::round(exact);
  if (std::abs(exact - nearest) <= 1e-9 * std::max(1.0, exact)) exact = nearest;
  auto rank = static_cast<std::size_t>(std::ceil(exact));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(sorted.begin(), nth, sorted.end());
  return *nth;
}

}  // namespace obs::tsdb
