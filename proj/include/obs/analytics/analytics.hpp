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

#include <functional>
#include <mutex>
#include <span>
#include <vector>

#include "obs/core/config.hpp"
#include "obs/core/metric.hpp"
#include "obs/core/self_metrics.hpp"
#include "obs/tsdb/tsdb.hpp"

namespace obs::metastore {
class Metastore;
}

namespace obs::analytics {

struct AnomalyParams {
  int window_points = 60;
  double threshold_k = 3.5;
  double min_mad_epsilon = 1e-12;

  /// Throws kInvalidArgument.
  void Validate() const;
};

struct AnomalySpan {
  SeriesKey key;
  TimestampMs start = 0;
  TimestampMs end = 0;
  double peak_score = 0;  // largest |score| in the span
  TimestampMs onset = 0;

  friend bool operator==(const AnomalySpan&, const AnomalySpan&) = default;
};

/// 0.6745 * (x - median) / max(MAD, epsilon). Throws kWindowTooSmall (< 8).
double RobustZScore(std::span<const double> window, double x, double min_mad_epsilon = 1e-12);

/// Scores each point after the first `window_points` against the
/// `window_points` most recent earlier points that were not flagged, and
/// merges consecutive flagged points into spans. Throws kInsufficientData.
std::vector<AnomalySpan> DetectAnomalies(const SeriesKey& key,
                                         std::span<const tsdb::QueryPoint> points,
                                         const AnomalyParams& params);

/// Pearson r over the buckets present in both series. Throws
/// kInsufficientOverlap (< 3 shared buckets) and kZeroVariance.
double Correlate(std::span<const tsdb::QueryPoint> a, std::span<const tsdb::QueryPoint> b);

struct RootCause {
  SeriesKey key;
  double score = 0;
  TimestampMs onset = 0;
  double correlation = 0;
};

struct CycleReport {
  std::size_t series_distilled = 0;
  std::size_t summaries_written = 0;
  std::uint64_t raw_cleared = 0;
  std::uint64_t rollups_cleared = 0;

  friend bool operator==(const CycleReport&, const CycleReport&) = default;
};

enum class CyclePhase { kGathered, kDistilled, kCleared };

struct AnalyticsOptions {
  AnomalyParams anomaly;
  int cycle_interval_seconds = 300;
  // How far ahead of raw expiry the cycle distills.
  TimestampMs distill_lead = tsdb::kHour;
  // Called after each phase of a distill cycle; lets tests stop in between.
  std::function<void(CyclePhase)> phase_hook;

  /// Reads `analytics.*` keys. Throws kValidationFailed.
  static AnalyticsOptions FromConfig(const ConfigFile& config);
};

/// Processing layer over both stores.
class Analytics {
 public:
  Analytics(tsdb::Tsdb& tsdb, metastore::Metastore* metastore, AnalyticsOptions options = {});

  /// Raw points of `key` in [start, end) through DetectAnomalies.
  std::vector<AnomalySpan> DetectAnomalies(const SeriesKey& key, TimestampMs start,
                                           TimestampMs end) const;
  std::vector<AnomalySpan> DetectAnomalies(const SeriesKey& key, TimestampMs start,
                                           TimestampMs end, const AnomalyParams& params) const;

  /// Correlation of bucket means at `step`.
  double Correlate(const SeriesKey& a, const SeriesKey& b, TimestampMs start, TimestampMs end,
                   TimestampMs step) const;

  /// Anomalous candidates scored by |r| * (1 + lead / window length), best
  /// first; ties go to the earlier onset, then the smaller key.
  std::vector<RootCause> RankRootCauses(const AnomalySpan& target,
                                        const std::vector<SeriesKey>& candidates,
                                        TimestampMs start, TimestampMs end,
                                        TimestampMs step) const;

  /// Gather, distill, clear. One cycle runs at a time.
  CycleReport DistillCycle(TimestampMs now);

  SelfMetrics& metrics() { return metrics_; }
  const AnalyticsOptions& options() const { return options_; }

 private:
  tsdb::Tsdb& tsdb_;
  metastore::Metastore* metastore_;
  AnalyticsOptions options_;
  std::mutex cycle_mu_;
  SelfMetrics metrics_;
};

}  // namespace obs::analytics
