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

#include "obs/gateway/gateway.hpp"

#include <algorithm>
#include <chrono>

#include <spdlog/spdlog.h>

#include "obs/core/exposition.hpp"
#include "obs/metastore/metastore.hpp"
#include "obs/net/http.hpp"
#include "obs/tsdb/tsdb.hpp"

namespace obs::gateway {

const std::set<std::string>& DefaultDenylist() {
  static const std::set<std::string> kDenylist = {"email", "ip", "user_name"};
  return kDenylist;
}

NormalizedBatch NormalizeBatch(std::string_view raw, const LabelMap& source_labels,
                               const std::set<std::string>& denylist, SelfMetrics* metrics,
                               const LabelMap& forced_labels) {
  NormalizedBatch out;
  int line_number = 0;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    std::size_t nl = raw.find('\n', pos);
    std::string_view line = raw.substr(pos, nl == std::string_view::npos ? raw.npos : nl - pos);
    pos = nl == std::string_view::npos ? raw.size() : nl + 1;
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    try {
      auto sample = ParseExpositionLine(line);
      if (!sample) continue;
      const auto& own = sample->key.labels();
      bool needs_rebuild = !forced_labels.empty();
      if (!needs_rebuild) {
        for (const auto& [k, v] : source_labels) {
          if (!sample->key.label(k)) {
            needs_rebuild = true;
            break;
          }
        }
      }
      if (!needs_rebuild) {
        for (const auto& l : own) {
          if (denylist.contains(l.first)) {
            needs_rebuild = true;
            break;
          }
        }
      }
      if (needs_rebuild) {
        LabelMap merged = source_labels;
        for (const auto& l : own) merged[l.first] = l.second;
        for (const auto& [k, v] : forced_labels) merged[k] = v;
        std::size_t dropped = 0;
        for (const auto& key : denylist) dropped += merged.erase(key);
        if (dropped > 0 && metrics) {
          metrics->Add("gateway_sanitized_total", static_cast<double>(dropped));
        }
        sample->key = SeriesKey::Canonicalize(sample->key.name(), merged);
      }
      out.accepted.push_back(std::move(*sample));
    } catch (const Error& e) {
      out.rejects.push_back({line_number, std::string(line), e.code(), e.what()});
    }
  }
  return out;
}

double CounterState::Adjust(const SeriesKey& key, double raw_value, TimestampMs timestamp,
                            bool* reset) {
  if (reset) *reset = false;
  if (raw_value < 0) {
    throw Error(ErrorCode::kNegativeCounter, key.ToString() + ": counter value is negative");
  }
  auto& stripe = stripes_[SeriesKeyHash{}(key) % stripes_.size()];
  std::lock_guard lock(stripe.mu);
  auto [it, inserted] = stripe.entries.try_emplace(key);
  Entry& e = it->second;
  if (inserted) {
    e.adjusted = raw_value;
  } else if (timestamp != 0 && timestamp <= e.last_ts) {
    return e.adjusted;
  } else if (raw_value >= e.last_raw) {
    e.adjusted += raw_value - e.last_raw;
  } else {
    e.adjusted += raw_value;
    if (reset) *reset = true;
  }
  e.last_raw = raw_value;
  e.last_ts = timestamp;
  return e.adjusted;
}

Destination RouteRecord(const MetricSample& sample) {
  return sample.kind == MetricKind::kEvent ? Destination::kMetastore : Destination::kTsdb;
}

nlohmann::json IngestResult::ToJson() const {
  nlohmann::json rejected = nlohmann::json::array();
  for (const auto& r : rejects) {
    rejected.push_back({{"line", r.line},
                        {"line_number", r.line_number},
                        {"error", ErrorCodeName(r.code)},
                        {"message", r.message}});
  }
  return {{"accepted", accepted}, {"rejected", std::move(rejected)}};
}

Gateway::Gateway(tsdb::Tsdb* tsdb, metastore::Metastore* metastore, GatewayOptions options)
    : tsdb_(tsdb), metastore_(metastore), options_(std::move(options)) {
  if (!tsdb_ && !metastore_) {
    throw Error(ErrorCode::kInvalidArgument, "gateway needs a tsdb or a metastore");
  }
  if (!options_.clock) options_.clock = WallClockMs;
  if (tsdb_) options_.max_age = tsdb_->retention().raw;
}

IngestResult Gateway::Ingest(std::string_view raw, const LabelMap& source_labels,
                             const LabelMap& forced_labels, std::optional<TimestampMs> now) {
  TimestampMs t_now = now ? *now : options_.clock();
  NormalizedBatch batch =
      NormalizeBatch(raw, source_labels, options_.denylist, &metrics_, forced_labels);
  IngestResult result;
  result.rejects = std::move(batch.rejects);
  auto reject = [&](const MetricSample& s, ErrorCode code, const std::string& message) {
    result.rejects.push_back({0, FormatExpositionLine(s), code, message});
    result.rejects.back().line.pop_back();
  };
  for (auto& sample : batch.accepted) {
    if (sample.timestamp > t_now + options_.max_future || sample.timestamp < t_now - options_.max_age) {
      reject(sample, ErrorCode::kTimestampOutOfWindow, "timestamp outside the accepted window");
      continue;
    }
    try {
      if (RouteRecord(sample) == Destination::kMetastore) {
        if (!metastore_) throw Error(ErrorCode::kInvalidArgument, "no metastore attached");
        metastore::EventRecord ev;
        ev.kind = sample.key.name();
        ev.attributes = sample.key.label_map();
        ev.value = sample.value;
        ev.timestamp = sample.timestamp;
        metastore_->StoreEvent(std::move(ev));
      } else {
        if (!tsdb_) throw Error(ErrorCode::kInvalidArgument, "no tsdb attached");
        if (sample.kind == MetricKind::kCounter) {
          bool reset = false;
          sample.value = counters_.Adjust(sample.key, sample.value, sample.timestamp, &reset);
          if (reset) metrics_.Add("gateway_counter_resets_total");
        }
        tsdb_->Append(sample);
      }
      ++result.accepted;
    } catch (const Error& e) {
      reject(sample, e.code(), e.what());
    }
  }
  if (tsdb_) tsdb_->Flush();
  metrics_.Add("gateway_samples_accepted_total", static_cast<double>(result.accepted));
  metrics_.Add("gateway_samples_rejected_total", static_cast<double>(result.rejects.size()));
  return result;
}

std::vector<ScrapeTarget> ParseScrapeTargets(const ConfigFile& config) {
  const std::string prefix = "gateway.scrape_targets.";
  std::set<std::string> indices;
  for (const auto& key : config.KeysWithPrefix(prefix)) {
    auto rest = key.substr(prefix.size());
    indices.insert(rest.substr(0, rest.find('.')));
  }
  std::vector<ScrapeTarget> out;
  for (const auto& index : indices) {
    std::string base = prefix + index + ".";
    ScrapeTarget t;
    t.url = config.GetOr(base + "url", "");
    t.interval_seconds = static_cast<int>(config.GetInt(base + "interval_seconds", 15));
    if (t.url.empty()) {
      throw Error(ErrorCode::kValidationFailed, base + "url: must not be empty");
    }
    if (t.interval_seconds < 1) {
      throw Error(ErrorCode::kValidationFailed, base + "interval_seconds: must be at least 1");
    }
    for (const auto& pair : SplitList(config.GetOr(base + "labels", ""))) {
      auto eq = pair.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::kValidationFailed, base + "labels: expected k=v, got '" + pair + "'");
      }
      t.labels[std::string(TrimView(pair.substr(0, eq)))] =
          std::string(TrimView(pair.substr(eq + 1)));
    }
    out.push_back(std::move(t));
  }
  return out;
}

Scraper::Scraper(Gateway& gateway, std::vector<ScrapeTarget> targets, Fetch fetch)
    : gateway_(gateway), targets_(std::move(targets)), fetch_(std::move(fetch)) {
  if (!fetch_) {
    fetch_ = [](const std::string& url) {
      auto res = net::HttpGet(url);
      if (!res.ok()) {
        throw Error(ErrorCode::kSourceUnavailable,
                    url + ": " + (res.status ? std::to_string(res.status) : res.error));
      }
      return res.body;
    };
  }
}

Scraper::~Scraper() { Stop(); }

int Scraper::ScrapeOne(const ScrapeTarget& target) {
  try {
    auto body = fetch_(target.url);
    LabelMap source = target.labels;
    source.try_emplace("scrape_url", target.url);
    auto result = gateway_.Ingest(body, source);
    gateway_.metrics().Add("gateway_scrapes_total");
    return 0;
  } catch (const std::exception& e) {
    gateway_.metrics().Add("gateway_scrape_failures_total");
    spdlog::warn("scrape {} failed: {}", target.url, e.what());
    return 1;
  }
}

int Scraper::ScrapeAll() {
  int failed = 0;
  for (const auto& t : targets_) failed += ScrapeOne(t);
  return failed;
}

void Scraper::Start() {
  if (targets_.empty() || thread_.joinable()) return;
  stop_ = false;
  thread_ = std::thread([this] { Loop(); });
}

void Scraper::Stop() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void Scraper::Loop() {
  using Clock = std::chrono::steady_clock;
  std::vector<Clock::time_point> due(targets_.size(), Clock::now());
  std::unique_lock lock(mu_);
  while (!stop_) {
    auto now = Clock::now();
    for (std::size_t i = 0; i < targets_.size(); ++i) {
      if (due[i] <= now) {
        lock.unlock();
        ScrapeOne(targets_[i]);
        lock.lock();
        due[i] = now + std::chrono::seconds(targets_[i].interval_seconds);
      }
    }
    cv_.wait_until(lock, *std::min_element(due.begin(), due.end()), [this] { return stop_; });
  }
}

}  // namespace obs::gateway
