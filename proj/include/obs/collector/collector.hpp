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
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "obs/core/config.hpp"
#include "obs/core/metric.hpp"
#include "obs/core/self_metrics.hpp"

namespace obs::collector {

struct PowerModel {
  double p_idle = 50;
  double p_max = 150;
  double exponent = 1.0;

  /// Throws kInvalidArgument unless 0 <= p_idle <= p_max and exponent > 0.
  void Validate() const;
};

/// p_idle + (p_max - p_idle) * u^exponent. Throws kOutOfRange unless
/// 0 <= u <= 1.
double EstimatePower(double utilization, const PowerModel& model);

struct PowerPoint {
  TimestampMs t = 0;
  double watts = 0;
};

/// Trapezoidal integral in joules. Throws kInsufficientPoints (< 2) and
/// kNonMonotonicTime.
double IntegrateEnergy(std::span<const PowerPoint> points);

struct ResourceSnapshot {
  double cpu_utilization = 0;  // in [0, cores]
  double memory_used = 0;
  double memory_total = 0;
  double process_cpu_seconds = 0;
  int cores = 1;
  TimestampMs timestamp = 0;
};

class SnapshotProvider {
 public:
  virtual ~SnapshotProvider() = default;
  /// Throws Error(kSourceUnavailable) when nothing can be read.
  virtual ResourceSnapshot Read() = 0;
};

/// Replays recorded snapshots, one per line:
///
///   <timestamp_ms> <cpu_util> <mem_used> <mem_total> <process_cpu_seconds> [cores]
///
/// `#` lines are comments. A line reading `error` makes that Read() fail, as
/// does reading past the end.
class ReplayProvider : public SnapshotProvider {
 public:
  static ReplayProvider FromFile(const std::filesystem::path& path);
  static ReplayProvider FromText(std::string_view text);

  ResourceSnapshot Read() override;
  bool exhausted() const { return next_ >= rows_.size(); }

 private:
  std::vector<std::optional<ResourceSnapshot>> rows_;
  std::size_t next_ = 0;
};

/// Reads /proc for host CPU and memory plus one process's CPU time.
class ProcProvider : public SnapshotProvider {
 public:
  explicit ProcProvider(int pid = 0, Clock clock = WallClockMs);
  ResourceSnapshot Read() override;

 private:
  int pid_;
  Clock clock_;
  std::uint64_t last_busy_ = 0;
  std::uint64_t last_total_ = 0;
};

struct CollectorOptions {
  std::string host = "localhost";
  PowerModel power;
  int interval_seconds = 5;
  std::string push_url;
  std::string listen_addr;  // host:port for the pull endpoint, empty = off
  std::string token;        // bearer token for push

  /// Reads `collector.*` keys. Throws kValidationFailed.
  static CollectorOptions FromConfig(const ConfigFile& config);
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;
/// Returns true when the gateway accepted the batch.
using PostFn = std::function<bool(const std::string& body)>;

/// Collection-layer agent. Every batch carries the workload series, the
/// power and energy estimates, and the agent's own overhead counters.
class Collector {
 public:
  Collector(SnapshotProvider& provider, CollectorOptions options);

  /// One sample set sharing the snapshot timestamp. Throws kSourceUnavailable.
  std::vector<MetricSample> SampleResources();

  /// SampleResources() that logs and counts provider failures instead of
  /// throwing, then publishes the batch for the pull endpoint.
  std::vector<MetricSample> Tick();

  /// Latest published batch in exposition format. Never partially written.
  std::shared_ptr<const std::string> LatestExposition() const;

  /// POSTs with retries after 1 s, 2 s and 4 s; then drops the batch and
  /// adds its size to `collector_dropped_total`. Returns whether it landed.
  bool Push(const std::vector<MetricSample>& batch, const PostFn& post,
            const SleepFn& sleep = {});

  SelfMetrics& metrics() { return metrics_; }
  const CollectorOptions& options() const { return options_; }

 private:
  SnapshotProvider& provider_;
  CollectorOptions options_;
  SelfMetrics metrics_;
  std::optional<PowerPoint> last_power_;
  double energy_joules_ = 0;
  double samples_total_ = 0;

  mutable std::mutex publish_mu_;
  std::shared_ptr<const std::string> latest_ = std::make_shared<const std::string>();
};

/// Serves `GET /metrics` from a collector's latest batch.
class PullServer {
 public:
  explicit PullServer(const Collector& collector);
  ~PullServer();

  /// Binds host:port (port 0 = any) and serves on a background thread.
  /// Returns the bound port.
  int Start(const std::string& host, int port);
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace obs::collector
