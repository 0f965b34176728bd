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

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "obs/core/metric.hpp"

namespace obs {

/// Named counters and gauges a component reports about itself.
class SelfMetrics {
 public:
  void Add(const std::string& name, double delta = 1.0,
           CanonicalUnit unit = CanonicalUnit::kCount);
  void Set(const std::string& name, double value, CanonicalUnit unit = CanonicalUnit::kNone);

  /// Current value; 0 for names never touched.
  double Get(const std::string& name) const;

  /// One sample per registered name, each carrying `labels`.
  std::vector<MetricSample> Snapshot(TimestampMs now, const LabelMap& labels) const;

 private:
  struct Entry {
    double value = 0;
    MetricKind kind = MetricKind::kCounter;
    CanonicalUnit unit = CanonicalUnit::kCount;
  };

  mutable std::mutex mu_;
  std::map<std::string, Entry> entries_;
};

}  // namespace obs
