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

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "obs/core/metric.hpp"
#include "obs/core/selector.hpp"
#include "obs/core/self_metrics.hpp"
#include "obs/tsdb/rollup.hpp"

namespace obs::tsdb {

struct QueryPoint {
  TimestampMs t = 0;
  double v = 0;

  friend bool operator==(const QueryPoint&, const QueryPoint&) = default;
};

struct SeriesResult {
  SeriesKey key;
  std::vector<QueryPoint> points;
};

struct RetentionReport {
  std::uint64_t raw_deleted = 0;
  std::uint64_t rollups_deleted = 0;
  // Series whose aged raw points were kept because they are not distilled.
  std::uint64_t blocked_series = 0;
};

struct DistillResult {
  std::size_t rollups_1m = 0;
  std::size_t rollups_1h = 0;
  // Aggregate over every raw point folded in by this call; count 0 if none.
  RollupPoint summary;
  TimestampMs window_start = 0;
  TimestampMs window_end = 0;
};

enum class Tier { k1m, k1h };

struct TsdbOptions {
  // Empty path keeps everything in memory.
  std::filesystem::path data_dir;
  RetentionPolicy retention;
  std::size_t max_series = 1'000'000;
  int shards = 4;
  TimestampMs block_len = 2 * kHour;
  Clock clock = WallClockMs;
  // Receives `tsdb_retention_blocked` events.
  std::function<void(const MetricSample&)> event_sink;
};

/// Time-series store for high-frequency metrics.
///
/// Raw points live in an in-memory head backed by append-only segment files,
/// one per 2 h block per shard. Each record is 24 bytes little-endian:
/// series id (u64), timestamp ms (i64), value (f64). Series ids resolve
/// through `series.dict`, one `<id>\t<kind>\t<unit>\t<series>` line each.
///
/// Raw data is distilled into 1 m rollups, 1 m rollups into 1 h rollups, and
/// each tier is cleared after its retention only once the next tier holds it.
class Tsdb {
 public:
  explicit Tsdb(TsdbOptions options);
  ~Tsdb();

  Tsdb(const Tsdb&) = delete;
  Tsdb& operator=(const Tsdb&) = delete;

  /// Stores one raw point. Returns false when (series, timestamp) already
  /// exists; the first written value is kept. Throws kRetentionViolation or
  /// kStorageFull.
  bool Append(const MetricSample& sample);

  /// Range query over [start, end). Buckets are [start + i*step, ...);
  /// empty buckets and series without points are omitted. `step` is ignored
  /// for raw queries. Throws kInvalidRange and kQuantileNeedsRaw.
  std::vector<SeriesResult> QueryRange(const Selector& selector, TimestampMs start,
                                       TimestampMs end, TimestampMs step, AggSpec agg) const;

  /// Rollups of the raw points in [start, end) at `resolution`. Pure: does
  /// not store anything. Throws kUnalignedWindow.
  std::vector<RollupPoint> Downsample(const SeriesKey& key, TimestampMs resolution,
                                      TimestampMs start, TimestampMs end) const;

  std::vector<QueryPoint> RawPoints(const SeriesKey& key, TimestampMs start,
                                    TimestampMs end) const;
  std::vector<RollupPoint> Rollups(const SeriesKey& key, Tier tier, TimestampMs start,
                                   TimestampMs end) const;

  std::vector<SeriesKey> ListSeries(const Selector& selector) const;
  std::size_t series_count() const { return series_total_.load(); }

  /// Series holding raw points below `horizon` that have no rollup yet.
  std::vector<SeriesKey> SeriesNeedingDistill(TimestampMs horizon) const;

  /// Writes 1 m rollups for raw data below `horizon` and 1 h rollups for the
  /// hours they complete. `horizon` must be hour aligned.
  DistillResult Distill(const SeriesKey& key, TimestampMs horizon);

  /// Clears each tier past its retention, never touching raw points that
  /// have not been distilled. Idempotent.
  RetentionReport EnforceRetention(TimestampMs now);

  /// Hands buffered segment and log writes to the OS. Distill and retention
  /// fsync on their own.
  void Flush();

  SelfMetrics& metrics() { return metrics_; }
  const RetentionPolicy& retention() const { return options_.retention; }

 private:
  struct SeriesState {
    std::uint64_t id = 0;
    SeriesKey key;
    MetricKind kind = MetricKind::kGauge;
    CanonicalUnit unit = CanonicalUnit::kNone;
    std::map<TimestampMs, double> raw;
    std::map<TimestampMs, RollupPoint> r1m;
    std::map<TimestampMs, RollupPoint> r1h;
    // Raw below distilled_1m has 1 m rollups; 1 m below distilled_1h is in 1 h.
    TimestampMs distilled_1m = INT64_MIN;
    TimestampMs distilled_1h = INT64_MIN;
    // Data of each tier below its floor has been cleared.
    TimestampMs raw_floor = INT64_MIN;
    TimestampMs r1m_floor = INT64_MIN;
    TimestampMs r1h_floor = INT64_MIN;
    // Minutes below distilled_1m that received late points.
    std::set<TimestampMs> dirty_minutes;
  };

  struct Shard {
    int index = 0;
    mutable std::shared_mutex mu;
    std::unordered_map<SeriesKey, std::unique_ptr<SeriesState>, SeriesKeyHash> series;
    std::map<TimestampMs, std::FILE*> segments;
    std::map<TimestampMs, std::set<std::uint64_t>> block_series;
  };

  Shard& ShardFor(const SeriesKey& key) const;
  SeriesState* FindLocked(const Shard& shard, const SeriesKey& key) const;
  SeriesState& GetOrCreateLocked(Shard& shard, const MetricSample& sample);

  void Replay();
  void WriteSegmentRecord(Shard& shard, std::uint64_t id, TimestampMs ts, double value);
  void WriteRollup(Tier tier, std::uint64_t id, const RollupPoint& p);
  void WriteState(std::uint8_t kind, std::uint64_t id, TimestampMs a, TimestampMs b,
                  TimestampMs c);
  std::filesystem::path SegmentPath(TimestampMs block, int shard_index) const;

  TsdbOptions options_;
  std::vector<std::unique_ptr<Shard>> shards_;
  std::atomic<std::uint64_t> next_id_{1};
  std::atomic<std::size_t> series_total_{0};

  std::mutex dict_mu_;
  std::FILE* dict_file_ = nullptr;
  std::mutex log_mu_;
  std::FILE* rollup_file_ = nullptr;
  std::FILE* state_file_ = nullptr;

  SelfMetrics metrics_;
};

}  // namespace obs::tsdb
