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

#include <array>
#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "obs/core/config.hpp"
#include "obs/core/error.hpp"
#include "obs/core/metric.hpp"
#include "obs/core/self_metrics.hpp"

namespace obs::tsdb {
class Tsdb;
}
namespace obs::metastore {
class Metastore;
}

namespace obs::gateway {

struct Reject {
  int line_number = 0;  // 1-based
  std::string line;
  ErrorCode code = ErrorCode::kParseError;
  std::string message;
};

struct NormalizedBatch {
  std::vector<MetricSample> accepted;
  std::vector<Reject> rejects;
};

const std::set<std::string>& DefaultDenylist();

/// Parses every line of `raw`, merging `source_labels` under the sample's own
/// labels and `forced_labels` over them, then drops denylisted keys. Bad
/// lines end up in `rejects`; nothing aborts the batch.
NormalizedBatch NormalizeBatch(std::string_view raw, const LabelMap& source_labels,
                               const std::set<std::string>& denylist = DefaultDenylist(),
                               SelfMetrics* metrics = nullptr,
                               const LabelMap& forced_labels = {});

/// Per-series counter bookkeeping. Updates to one series are serialized;
/// different series proceed in parallel on separate stripes.
class CounterState {
 public:
  /// Returns the reset-adjusted cumulative value. Throws kNegativeCounter.
  /// A timestamp at or before the last one seen is a resend: the state is
  /// left alone and the last adjusted value returned.
  double Adjust(const SeriesKey& key, double raw_value, TimestampMs timestamp = 0,
                bool* reset = nullptr);

 private:
  struct Entry {
    double last_raw = 0;
    double adjusted = 0;
    TimestampMs last_ts = 0;
  };
  struct Stripe {
    std::mutex mu;
    std::unordered_map<SeriesKey, Entry, SeriesKeyHash> entries;
  };
  std::array<Stripe, 64> stripes_;
};

enum class Destination { kTsdb, kMetastore };

Destination RouteRecord(const MetricSample& sample);

struct IngestResult {
  std::size_t accepted = 0;
  std::vector<Reject> rejects;

  /// `{"accepted": n, "rejected": [{"line": ..., "error": ...}]}`
  nlohmann::json ToJson() const;
};

struct GatewayOptions {
  std::set<std::string> denylist = DefaultDenylist();
  TimestampMs max_future = 5 * 60 * 1000;
  // Used when no tsdb is attached; otherwise the tsdb's raw retention applies.
  TimestampMs max_age = 24 * 60 * 60 * 1000;
  Clock clock = WallClockMs;
};

/// Aggregation-layer entry point. Either store may be null, but not both.
class Gateway {
 public:
  Gateway(tsdb::Tsdb* tsdb, metastore::Metastore* metastore, GatewayOptions options = {});

  /// Normalizes, checks the timestamp window, repairs counters and routes
  /// each accepted sample. `now` overrides the clock when set.
  IngestResult Ingest(std::string_view raw, const LabelMap& source_labels,
                      const LabelMap& forced_labels = {},
                      std::optional<TimestampMs> now = std::nullopt);

  SelfMetrics& metrics() { return metrics_; }

 private:
  tsdb::Tsdb* tsdb_;
  metastore::Metastore* metastore_;
  GatewayOptions options_;
  CounterState counters_;
  SelfMetrics metrics_;
};

struct ScrapeTarget {
  std::string url;
  int interval_seconds = 15;
  LabelMap labels;
};

/// Reads `gateway.scrape_targets.<n>.{url,interval_seconds,labels}`, where
/// labels is `k=v,k=v`. Throws kValidationFailed on a bad entry.
std::vector<ScrapeTarget> ParseScrapeTargets(const ConfigFile& config);

/// Pulls every target on its interval and feeds the body to the gateway.
class Scraper {
 public:
  using Fetch = std::function<std::string(const std::string& url)>;

  Scraper(Gateway& gateway, std::vector<ScrapeTarget> targets, Fetch fetch = {});
  ~Scraper();

  void Start();
  void Stop();
  /// Scrapes every target once; returns the number that failed.
  int ScrapeAll();

 private:
  int ScrapeOne(const ScrapeTarget& target);
  void Loop();

  Gateway& gateway_;
  std::vector<ScrapeTarget> targets_;
  Fetch fetch_;
  std::thread thread_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stop_ = false;
};

}  // namespace obs::gateway
