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
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <map>

#include <json.hpp>

#include "obs/core/metric.hpp"

namespace obs::api {
class ApiService;
}

namespace obs::scenario {

struct ScriptedSample {
  TimestampMs offset = 0;  // from the scenario base time
  std::string metric;
  LabelMap labels;
  MetricKind kind = MetricKind::kGauge;
  std::string unit = "none";
  double value = 0;
};

enum class ExpectKind { kValue, kSeriesCount, kAnomalySpans };
enum class CompareOp { kEqual, kApprox, kLess, kLessEqual, kGreater, kGreaterEqual };

struct Expectation {
  std::string name;
  ExpectKind kind = ExpectKind::kValue;
  std::string selector;
  std::string agg = "mean";  // kValue only
  TimestampMs start_offset = 0;
  TimestampMs end_offset = 60'000;
  CompareOp op = CompareOp::kEqual;
  double value = 0;
  double tolerance = 0;
  // kAnomalySpans: when set, some span must cover [cover_start, cover_end].
  std::optional<TimestampMs> cover_start;
  std::optional<TimestampMs> cover_end;
  int anomaly_window = 60;
};

struct Scenario {
  std::string name;
  std::vector<ScriptedSample> samples;
  std::vector<Expectation> expectations;
  // Unset: the hour before the current hour, so data is inside retention.
  std::optional<TimestampMs> base_time;

  /// Throws kValidationFailed: decreasing offsets, no expectations.
  void Validate() const;

  /// The JSON document format. Samples may be listed one by one or as runs:
  ///   {"metric": "lat", "labels": {...}, "unit": "ms", "start_offset_ms": 0,
  ///    "interval_ms": 60, "runs": [[950, 100], [50, 3000]]}
  static Scenario FromJson(const nlohmann::json& j);
  static Scenario Load(const std::filesystem::path& path);
};

struct ExpectationResult {
  std::string name;
  bool passed = false;
  std::optional<double> actual;
  std::string detail;
};

struct ScenarioReport {
  std::string scenario;
  int passed = 0;
  int failed = 0;
  std::vector<ExpectationResult> details;

  bool ok() const { return failed == 0; }
  nlohmann::json ToJson() const;
  /// One `PASS name: actual ...` / `FAIL name: detail` line each.
  std::string Render() const;

  friend bool operator==(const ScenarioReport& a, const ScenarioReport& b) {
    return a.ToJson() == b.ToJson();
  }
};

struct TransportResponse {
  int status = 0;  // 0: no response
  std::string body;
};

/// Sends one request to the API. `path` includes the query string.
using Transport = std::function<TransportResponse(
    const std::string& method, const std::string& path, const std::string& body,
    const std::map<std::string, std::string>& headers)>;

Transport HttpTransport(const std::string& base_url);
Transport InProcessTransport(api::ApiService& service);

struct RunnerOptions {
  std::string token;
  // Sleep until each sample's offset instead of sending virtual time.
  bool realtime = false;
  std::size_t batch_size = 5000;
  Clock clock = WallClockMs;
};

/// Pushes the script through /api/v1/ingest and checks each expectation
/// through the query endpoints. Throws kStackUnreachable when healthz
/// does not answer.
ScenarioReport RunScenario(const Scenario& scenario, const Transport& transport,
                           const RunnerOptions& options);

/// 1000 latency samples in one minute: 950 at 100 ms, then 50 contiguous
/// at 3000 ms, with mean, p99 and anomaly-span expectations.
Scenario MaskingScenario();


}  // namespace obs::scenario
