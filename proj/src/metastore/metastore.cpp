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

#include "obs/metastore/metastore.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "obs/core/error.hpp"

namespace obs::metastore {
namespace {

using nlohmann::json;

constexpr const char* kEntities = "entities";
constexpr const char* kSummaries = "summaries";
constexpr const char* kEvents = "events";

bool Close(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

json ToJson(const EntityRecord& r) {
  return {{"entity_id", r.entity_id}, {"kind", r.kind},
          {"attributes", r.attributes}, {"created_at", r.created_at},
          {"updated_at", r.updated_at}};
}

EntityRecord EntityFromJson(const json& j) {
  EntityRecord r;
  r.entity_id = j.at("entity_id").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.attributes = j.at("attributes").get<std::map<std::string, std::string>>();
  r.created_at = j.at("created_at").get<TimestampMs>();
  r.updated_at = j.at("updated_at").get<TimestampMs>();
  return r;
}

json ToJson(const SummaryRecord& r) {
  const auto& s = r.stats;
  return {{"summary_id", r.summary_id},
          {"selector", r.selector},
          {"window_start", r.window_start},
          {"window_end", r.window_end},
          {"produced_at", r.produced_at},
          {"stats",
           {{"count", s.count},
            {"sum", s.sum},
            {"min", s.min},
            {"max", s.max},
            {"mean", s.mean},
            {"stddev", s.stddev},
            {"sum_sq", s.sum_sq}}}};
}

SummaryRecord SummaryFromJson(const json& j) {
  SummaryRecord r;
  r.summary_id = j.at("summary_id").get<std::string>();
  r.selector = j.at("selector").get<std::string>();
  r.window_start = j.at("window_start").get<TimestampMs>();
  r.window_end = j.at("window_end").get<TimestampMs>();
  r.produced_at = j.at("produced_at").get<TimestampMs>();
  const auto& s = j.at("stats");
  r.stats.count = s.at("count").get<std::uint64_t>();
  r.stats.sum = s.at("sum").get<double>();
  r.stats.min = s.at("min").get<double>();
  r.stats.max = s.at("max").get<double>();
  r.stats.mean = s.at("mean").get<double>();
  r.stats.stddev = s.at("stddev").get<double>();
  r.stats.sum_sq = s.at("sum_sq").get<double>();
  return r;
}

json ToJson(const EventRecord& r) {
  return {{"event_id", r.event_id}, {"kind", r.kind}, {"attributes", r.attributes},
          {"value", r.value},       {"timestamp", r.timestamp}};
}

EventRecord EventFromJson(const json& j) {
  EventRecord r;
  r.event_id = j.at("event_id").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.attributes = j.at("attributes").get<LabelMap>();
  r.value = j.at("value").get<double>();
  r.timestamp = j.at("timestamp").get<TimestampMs>();
  return r;
}

// Zero-padded so lexical key order is insertion order.
std::string SeqId(const char* prefix, std::uint64_t seq) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%016llu", prefix, static_cast<unsigned long long>(seq));
  return buf;
}

}  // namespace

void ValidateStats(const SummaryStats& s) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kInconsistentStats, why); };
  if (s.count < 1) fail("count must be at least 1");
  auto n = static_cast<double>(s.count);
  if (!Close(s.mean, s.sum / n)) fail("mean != sum / count");
  if (s.min > s.mean + 1e-9 * std::max(1.0, std::abs(s.mean)) ||
      s.max < s.mean - 1e-9 * std::max(1.0, std::abs(s.mean))) {
    fail("mean outside [min, max]");
  }
  double variance = s.sum_sq / n - s.mean * s.mean;
  double scale = std::max(1.0, std::abs(s.sum_sq / n));
  if (variance < -1e-9 * scale) fail("negative variance");
  if (s.stddev < 0 || std::abs(s.stddev * s.stddev - std::max(0.0, variance)) > 1e-9 * scale) {
    fail("stddev^2 != sum_sq / count - mean^2");
  }
}

SummaryStats MakeStats(std::uint64_t count, double sum, double min, double max, double sum_sq) {
  SummaryStats s;
  s.count = count;
  s.sum = sum;
  s.min = min;
  s.max = max;
  s.sum_sq = sum_sq;
  s.mean = count ? sum / static_cast<double>(count) : 0;
  double variance = count ? sum_sq / static_cast<double>(count) - s.mean * s.mean : 0;
  s.stddev = std::sqrt(std::max(0.0, variance));
  return s;
}

Metastore::Metastore(MetastoreOptions options) : options_(std::move(options)) {
  if (!options_.clock) options_.clock = WallClockMs;
  if (!options_.file.empty()) {
    if (options_.file.has_parent_path()) {
      std::filesystem::create_directories(options_.file.parent_path());
    }
    Replay();
    log_ = std::fopen(options_.file.c_str(), "ab");
    if (!log_) throw Error(ErrorCode::kIoError, "cannot open " + options_.file.string());
  }
}

Metastore::~Metastore() {
  if (log_) std::fclose(log_);
}

void Metastore::Replay() {
  std::ifstream in(options_.file);
  std::string line;
  std::size_t applied = 0;
  while (std::getline(in, line)) {
    log_bytes_ += line.size() + 1;
    if (line.empty()) continue;
    try {
      Apply(json::parse(line));
      ++applied;
    } catch (const std::exception& e) {
      // A torn final line after a crash is expected; anything else is logged.
      spdlog::warn("metastore: skipping unreadable log line: {}", e.what());
    }
  }
  if (applied > 0) spdlog::info("metastore: replayed {} operations", applied);
}

void Metastore::Apply(const json& op) {
  const std::string table = op.at("t").get<std::string>();
  const std::string key = op.at("k").get<std::string>();
  if (op.at("op") == "put") {
    tables_[table][key] = op.at("v");
  } else {
    tables_[table].erase(key);
  }
  if (op.contains("seq")) next_seq_ = std::max(next_seq_, op["seq"].get<std::uint64_t>() + 1);
}

void Metastore::Log(const json& op) {
  if (!log_) return;
  std::string line = op.dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), log_) != line.size()) {
    throw Error(ErrorCode::kIoError, "metastore log write failed");
  }
  std::fflush(log_);
  log_bytes_ += line.size();
}

void Metastore::PutLocked(const std::string& table, const std::string& key, json value) {
  auto& t = tables_[table];
  std::size_t total = 0;
  for (const auto& [name, tab] : tables_) total += tab.size();
  if (!t.contains(key) && total >= options_.max_records) {
    throw Error(ErrorCode::kStorageFull, "metastore record limit reached");
  }
  json op = {{"op", "put"}, {"t", table}, {"k", key}, {"v", value}, {"seq", next_seq_ - 1}};
  Log(op);
  t[key] = std::move(value);
  MaybeCompactLocked();
}

bool Metastore::DeleteLocked(const std::string& table, const std::string& key) {
  auto it = tables_.find(table);
  if (it == tables_.end() || !it->second.contains(key)) return false;
  Log({{"op", "del"}, {"t", table}, {"k", key}});
  it->second.erase(key);
  MaybeCompactLocked();
  return true;
}

void Metastore::MaybeCompactLocked() {
  if (!log_ || log_bytes_ < options_.compact_min_bytes) return;
  std::size_t live = 0;
  for (const auto& [name, table] : tables_) {
    for (const auto& [key, value] : table) live += key.size() + value.dump().size() + 40;
  }
  if (static_cast<double>(log_bytes_) > options_.compact_ratio * static_cast<double>(live)) {
    CompactLocked();
  } else {
    // Avoid re-measuring on every write until the log grows again.
    options_.compact_min_bytes = log_bytes_ + log_bytes_ / 4;
  }
}

void Metastore::CompactLocked() {
  if (options_.file.empty()) return;
  auto tmp = options_.file;
  tmp += ".compact";
  std::FILE* out = std::fopen(tmp.c_str(), "wb");
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + tmp.string());
  std::size_t bytes = 0;
  for (const auto& [name, table] : tables_) {
    for (const auto& [key, value] : table) {
      std::string line =
          json{{"op", "put"}, {"t", name}, {"k", key}, {"v", value}, {"seq", next_seq_ - 1}}
              .dump() +
          "\n";
      std::fwrite(line.data(), 1, line.size(), out);
      bytes += line.size();
    }
  }
  std::fflush(out);
  ::fsync(::fileno(out));
  std::fclose(out);
  std::fclose(log_);
  std::filesystem::rename(tmp, options_.file);
  log_ = std::fopen(options_.file.c_str(), "ab");
  if (!log_) throw Error(ErrorCode::kIoError, "cannot reopen " + options_.file.string());
  log_bytes_ = bytes;
  metrics_.Add("metastore_compactions_total");
}

void Metastore::Compact() {
  std::unique_lock lock(mu_);
  CompactLocked();
}

std::size_t Metastore::record_count() const {
  std::shared_lock lock(mu_);
  std::size_t total = 0;
  for (const auto& [name, table] : tables_) total += table.size();
  return total;
}

void Metastore::UpsertEntity(EntityRecord record) {
  if (record.entity_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "entity_id must not be empty");
  }
  std::unique_lock lock(mu_);
  TimestampMs now = options_.clock();
  std::string key = record.kind + "/" + record.entity_id;
  auto& table = tables_[kEntities];
  auto it = table.find(key);
  record.created_at = it == table.end() ? now : it->second.at("created_at").get<TimestampMs>();
  record.updated_at = std::max(now, record.created_at);
  PutLocked(kEntities, key, ToJson(record));
}

std::optional<EntityRecord> Metastore::GetEntity(const std::string& kind,
                                                 const std::string& id) const {
  std::shared_lock lock(mu_);
  auto t = tables_.find(kEntities);
  if (t == tables_.end()) return std::nullopt;
  auto it = t->second.find(kind + "/" + id);
  if (it == t->second.end()) return std::nullopt;
  return EntityFromJson(it->second);
}

std::vector<EntityRecord> Metastore::ListEntities(const std::optional<std::string>& kind) const {
  std::shared_lock lock(mu_);
  std::vector<EntityRecord> out;
  auto t = tables_.find(kEntities);
  if (t == tables_.end()) return out;
  for (const auto& [key, value] : t->second) {
    auto rec = EntityFromJson(value);
    if (!kind || rec.kind == *kind) out.push_back(std::move(rec));
  }
  return out;
}

bool Metastore::DeleteEntity(const std::string& kind, const std::string& id) {
  std::unique_lock lock(mu_);
  return DeleteLocked(kEntities, kind + "/" + id);
}

std::string Metastore::StoreSummary(SummaryRecord summary) {
  ValidateStats(summary.stats);
  Selector::Parse(summary.selector);
  std::unique_lock lock(mu_);
  if (summary.summary_id.empty()) summary.summary_id = SeqId("sum", next_seq_);
  ++next_seq_;
  PutLocked(kSummaries, summary.summary_id, ToJson(summary));
  return summary.summary_id;
}

std::vector<SummaryRecord> Metastore::QuerySummaries(const Selector& selector, TimestampMs start,
                                                     TimestampMs end) const {
  if (start >= end) throw Error(ErrorCode::kInvalidRange, "start must be before end");
  std::shared_lock lock(mu_);
  std::vector<SummaryRecord> out;
  auto t = tables_.find(kSummaries);
  if (t == tables_.end()) return out;
  for (const auto& [key, value] : t->second) {
    SummaryRecord rec;
    try {
      rec = SummaryFromJson(value);
      ValidateStats(rec.stats);
    } catch (const std::exception& e) {
      metrics_.Add("metastore_corrupt_records_total");
      spdlog::warn("metastore: dropping corrupt summary {}: {}", key, e.what());
      continue;
    }
    if (rec.window_end <= start || rec.window_start >= end) continue;
    Selector stored = Selector::Parse(rec.selector);
    if (!selector.name.empty() && stored.name != selector.name) continue;
    LabelMap labels;
    for (const auto& m : stored.matchers) {
      if (m.op == MatchOp::kEqual) labels[m.key] = m.value;
    }
    if (!selector.MatchesLabels(labels)) continue;
    out.push_back(std::move(rec));
  }
  std::sort(out.begin(), out.end(), [](const SummaryRecord& a, const SummaryRecord& b) {
    return std::tie(a.window_start, a.summary_id) < std::tie(b.window_start, b.summary_id);
  });
  return out;
}

std::string Metastore::StoreEvent(EventRecord event) {
  std::unique_lock lock(mu_);
  if (event.event_id.empty()) event.event_id = SeqId("ev", next_seq_);
  ++next_seq_;
  PutLocked(kEvents, event.event_id, ToJson(event));
  return event.event_id;
}

std::vector<EventRecord> Metastore::QueryEvents(const Selector& selector, TimestampMs start,
                                                TimestampMs end) const {
  if (start >= end) throw Error(ErrorCode::kInvalidRange, "start must be before end");
  std::shared_lock lock(mu_);
  std::vector<EventRecord> out;
  auto t = tables_.find(kEvents);
  if (t == tables_.end()) return out;
  for (const auto& [key, value] : t->second) {
    TimestampMs ts = value.at("timestamp").get<TimestampMs>();
    if (ts < start || ts >= end) continue;
    auto rec = EventFromJson(value);
    if (!selector.name.empty() && rec.kind != selector.name) continue;
    if (!selector.MatchesLabels(rec.attributes)) continue;
    out.push_back(std::move(rec));
  }
  std::stable_sort(out.begin(), out.end(), [](const EventRecord& a, const EventRecord& b) {
    return a.timestamp < b.timestamp;
  });
  return out;
}

void Metastore::PutDocument(const std::string& table, const std::string& key, json doc) {
  std::unique_lock lock(mu_);
  PutLocked(table, key, std::move(doc));
}

std::optional<json> Metastore::GetDocument(const std::string& table,
                                           const std::string& key) const {
  std::shared_lock lock(mu_);
  auto t = tables_.find(table);
  if (t == tables_.end()) return std::nullopt;
  auto it = t->second.find(key);
  if (it == t->second.end()) return std::nullopt;
  return it->second;
}

std::vector<json> Metastore::ListDocuments(const std::string& table) const {
  std::shared_lock lock(mu_);
  std::vector<json> out;
  auto t = tables_.find(table);
  if (t == tables_.end()) return out;
  for (const auto& [key, value] : t->second) out.push_back(value);
  return out;
}

bool Metastore::DeleteDocument(const std::string& table, const std::string& key) {
  std::unique_lock lock(mu_);
  return DeleteLocked(table, key);
}

}  // namespace obs::metastore
