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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "obs/core/config.hpp"
#include "obs/core/metric.hpp"
#include "obs/core/selector.hpp"
#include "obs/core/self_metrics.hpp"
#include "obs/tsdb/rollup.hpp"

namespace obs::tsdb {
class Tsdb;
}
namespace obs::analytics {
class Analytics;
}
namespace obs::metastore {
class Metastore;
}

namespace obs::alerting {

enum class Comparator { kGreater, kLess, kGreaterEqual, kLessEqual };
enum class RuleMode { kThreshold, kAnomaly };
enum class AlertState { kInactive, kPending, kFiring, kResolved };

std::string_view ComparatorSymbol(Comparator c);
Comparator ParseComparator(std::string_view text);
std::string_view StateName(AlertState s);

struct AlertRule {
  std::string rule_id;
  Selector selector;
  tsdb::AggSpec agg{tsdb::Aggregation::kMean, 0};
  Comparator comparator = Comparator::kGreater;
  double threshold = 0;
  TimestampMs for_duration = 0;
  TimestampMs eval_interval = 15'000;
  RuleMode mode = RuleMode::kThreshold;
  LabelMap labels;
  std::string webhook_url;

  /// Throws kInvalidArgument.
  void Validate() const;
  nlohmann::json ToJson() const;
  /// Throws kInvalidArgument on missing or bad fields.
  static AlertRule FromJson(const nlohmann::json& j, TimestampMs default_eval_interval = 15'000);
};

/// FNV-1a 64 over `rule_id \0 k=v \0 k=v \0 ...` with labels in key order.
std::uint64_t Fingerprint(std::string_view rule_id, const LabelList& sorted_labels);
std::uint64_t Fnv1a64(std::string_view bytes);
std::string FingerprintHex(std::uint64_t fp);

struct AlertInstance {
  std::uint64_t fingerprint = 0;
  std::string rule_id;
  SeriesKey key;
  AlertState state = AlertState::kInactive;
  TimestampMs since = 0;
  double last_value = 0;
  // Time the current episode started firing; 0 outside an episode.
  TimestampMs episode_start = 0;
};

struct Transition {
  std::uint64_t fingerprint = 0;
  std::string rule_id;
  AlertState from = AlertState::kInactive;
  AlertState to = AlertState::kInactive;
  double value = 0;
  LabelMap labels;
  TimestampMs timestamp = 0;
  TimestampMs episode_start = 0;
};

struct Notification {
  std::uint64_t fingerprint = 0;
  std::string rule_id;
  AlertState state = AlertState::kFiring;
  double value = 0;
  LabelMap labels;
  TimestampMs timestamp = 0;
  TimestampMs episode_start = 0;

  /// Webhook body; keys in the fixed order fingerprint, rule_id, state,
  /// value, labels, timestamp_ms.
  std::string Body() const;
};

enum class DeliveryResult { kDelivered, kSuppressed, kDropped };

/// Returns true when the receiver accepted the POST.
using WebhookPost = std::function<bool(const std::string& url, const std::string& body)>;
using SleepFn = std::function<void(std::chrono::milliseconds)>;

struct AlertingOptions {
  TimestampMs default_eval_interval = 15'000;
  // Anomaly-mode rules look back this far for detection.
  TimestampMs anomaly_lookback = 60 * 60 * 1000;
  WebhookPost post;  // default: HTTP POST, 2xx = success
  SleepFn sleep;     // default: std::this_thread::sleep_for
  // Deliver inline from Evaluate instead of on the delivery thread.
  bool synchronous_delivery = false;
  // Used for rules without a webhook_url of their own.
  std::string default_webhook_url;

  /// Reads alerting.default_eval_interval_seconds and alerting.webhook_url.
  /// Throws kValidationFailed.
  static AlertingOptions FromConfig(const ConfigFile& config);
};

/// Rule store, per-series state machines and webhook delivery.
///
/// Evaluations are serialized. Deliveries run on a worker thread; the
/// (fingerprint, episode, state) ledger is checked and set atomically so a
/// notification is sent at most once per episode and state.
class AlertManager {
 public:
  AlertManager(tsdb::Tsdb& tsdb, analytics::Analytics* analytics, metastore::Metastore* metastore,
               AlertingOptions options = {});
  ~AlertManager();

  AlertManager(const AlertManager&) = delete;
  AlertManager& operator=(const AlertManager&) = delete;

  /// Validates, stores (and persists to the metastore when present).
  void PutRule(AlertRule rule);
  bool DeleteRule(const std::string& rule_id);
  std::optional<AlertRule> GetRule(const std::string& rule_id) const;
  std::vector<AlertRule> ListRules() const;

  /// One evaluation of one rule. Throws kNotFound, or kQueryFailed after
  /// counting `alert_eval_errors_total` and leaving every state untouched.
  std::vector<Transition> EvaluateRule(const std::string& rule_id, TimestampMs now);

  /// Evaluates every rule whose interval has elapsed since its last run.
  std::vector<Transition> Tick(TimestampMs now);

  DeliveryResult Deliver(const Notification& n, const std::string& url);

  /// Waits until the delivery queue is empty.
  void Drain();

  std::vector<AlertInstance> Instances() const;
  TimestampMs default_eval_interval() const { return options_.default_eval_interval; }

  SelfMetrics& metrics() { return metrics_; }

 private:
  using LedgerKey = std::tuple<std::uint64_t, TimestampMs, AlertState>;
  struct Pending {
    Notification notification;
    std::string url;
  };

  std::vector<Transition> EvaluateLocked(const AlertRule& rule, TimestampMs now);
  void Notify(const Transition& t, const AlertRule& rule);
  void DeliveryLoop();

  tsdb::Tsdb& tsdb_;
  analytics::Analytics* analytics_;
  metastore::Metastore* metastore_;
  AlertingOptions options_;

  mutable std::mutex mu_;  // rules, instances, last_eval
  std::map<std::string, AlertRule> rules_;
  std::map<std::uint64_t, AlertInstance> instances_;
  std::map<std::string, TimestampMs> last_eval_;
  std::mutex eval_mu_;

  std::mutex ledger_mu_;
  std::map<LedgerKey, bool> ledger_;  // true once delivered

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::condition_variable drained_cv_;
  std::deque<Pending> queue_;
  int in_flight_ = 0;
  bool stop_ = false;
  std::thread worker_;

  SelfMetrics metrics_;
};

}  // namespace obs::alerting
