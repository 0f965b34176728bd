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

#include "obs/core/self_metrics.hpp"

namespace obs {

void SelfMetrics::Add(const std::string& name, double delta, CanonicalUnit unit) {
  std::lock_guard lock(mu_);
  auto& e = entries_[name];
  e.value += delta;
  e.kind = MetricKind::kCounter;
  e.unit = unit;
}

void SelfMetrics::Set(const std::string& name, double value, CanonicalUnit unit) {
  std::lock_guard lock(mu_);
  auto& e = entries_[name];
  e.value = value;
  e.kind = MetricKind::kGauge;
  e.unit = unit;
}

double SelfMetrics::Get(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(name);
  return it == entries_.end() ? 0.0 : it->second.value;
}

std::vector<MetricSample> SelfMetrics::Snapshot(TimestampMs now, const LabelMap& labels) const {
  std::lock_guard lock(mu_);
  std::vector<MetricSample> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) {
    MetricSample s;
    s.key = SeriesKey::Canonicalize(name, labels);
    s.value = e.value;
    s.timestamp = now;
    s.unit = Unit{e.unit, std::string(CanonicalSymbol(e.unit))};
    s.kind = e.kind;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace obs
