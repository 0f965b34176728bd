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
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "obs/core/metric.hpp"
#include "obs/core/selector.hpp"
#include "obs/core/self_metrics.hpp"

namespace obs::metastore {

struct EntityRecord {
  std::string entity_id;
  std::string kind;
  std::map<std::string, std::string> attributes;
  TimestampMs created_at = 0;
  TimestampMs updated_at = 0;

  friend bool operator==(const EntityRecord&, const EntityRecord&) = default;
};

struct SummaryStats {
  std::uint64_t count = 0;
  double sum = 0;
  double min = 0;
  double max = 0;
  double mean = 0;
  double stddev = 0;
  // Kept so the variance identity can be checked on every read.
  double sum_sq = 0;

  friend bool operator==(const SummaryStats&, const SummaryStats&) = default;
};

struct SummaryRecord {
  std::string summary_id;
  // Serialized selector of the summarized series, e.g. `cpu{host="n1"}`.
  std::string selector;
  TimestampMs window_start = 0;
  TimestampMs window_end = 0;
  SummaryStats stats;
  TimestampMs produced_at = 0;

  friend bool operator==(const SummaryRecord&, const SummaryRecord&) = default;
};

struct EventRecord {
  std::string event_id;
  std::string kind;  // event name
  LabelMap attributes;
  double value = 0;
  TimestampMs timestamp = 0;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// Throws Error(kInconsistentStats) unless count >= 1, mean == sum/count,
/// min <= mean <= max, and stddev^2 == sum_sq/count - mean^2 >= 0 (1e-9).
void ValidateStats(const SummaryStats& stats);

/// Builds consistent stats from count/sum/min/max/sum_sq.
SummaryStats MakeStats(std::uint64_t count, double sum, double min, double max, double sum_sq);

struct MetastoreOptions {
  // Empty path keeps everything in memory.
  std::filesystem::path file;
  std::size_t max_records = 10'000'000;
  Clock clock = WallClockMs;
  // The log is rewritten once it is this many times larger than the live set.
  double compact_ratio = 2.0;
  std::size_t compact_min_bytes = 1 << 20;
};

/// The regular database: entities, events, condensed statistics and the
/// JSON documents (rules, dashboards, alert history) other modules keep.
///
/// Backed by a single append-only JSON-lines log replayed on open and
/// compacted by rewrite-and-rename. Writes are serialized; reads run
/// concurrently against the in-memory state.
class Metastore {
 public:
  explicit Metastore(MetastoreOptions options = {});
  ~Metastore();

  Metastore(const Metastore&) = delete;
  Metastore& operator=(const Metastore&) = delete;

  /// Insert or replace by (kind, entity_id). created_at is kept on replace.
  void UpsertEntity(EntityRecord record);
  std::optional<EntityRecord> GetEntity(const std::string& kind, const std::string& id) const;
  std::vector<EntityRecord> ListEntities(const std::optional<std::string>& kind) const;
  bool DeleteEntity(const std::string& kind, const std::string& id);

  /// Assigns an id when `summary_id` is empty. Throws kInconsistentStats.
  std::string StoreSummary(SummaryRecord summary);
  /// Summaries whose series matches `selector` and whose window overlaps
  /// [start, end). Records failing the stats check are skipped and counted.
  std::vector<SummaryRecord> QuerySummaries(const Selector& selector, TimestampMs start,
                                            TimestampMs end) const;

  /// Assigns an id when `event_id` is empty.
  std::string StoreEvent(EventRecord event);
  /// Events with kind == selector.name (any kind if empty) whose attributes
  /// satisfy the matchers, time-sorted over [start, end). Throws kInvalidRange.
  std::vector<EventRecord> QueryEvents(const Selector& selector, TimestampMs start,
                                       TimestampMs end) const;

  void PutDocument(const std::string& table, const std::string& key, nlohmann::json doc);
  std::optional<nlohmann::json> GetDocument(const std::string& table, const std::string& key) const;
  std::vector<nlohmann::json> ListDocuments(const std::string& table) const;
  bool DeleteDocument(const std::string& table, const std::string& key);

  /// Rewrites the log with only live records.
  void Compact();
  std::size_t record_count() const;

  SelfMetrics& metrics() { return metrics_; }

 private:
  using Table = std::map<std::string, nlohmann::json>;

  void Replay();
  void Apply(const nlohmann::json& op);
  void Log(const nlohmann::json& op);
  void PutLocked(const std::string& table, const std::string& key, nlohmann::json value);
  bool DeleteLocked(const std::string& table, const std::string& key);
  void MaybeCompactLocked();
  void CompactLocked();

  MetastoreOptions options_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Table> tables_;
  std::uint64_t next_seq_ = 1;
  std::FILE* log_ = nullptr;
  std::size_t log_bytes_ = 0;
  mutable SelfMetrics metrics_;
};

}  // namespace obs::metastore
