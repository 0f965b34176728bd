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

#include "obs/tsdb/tsdb.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>

#include <spdlog/spdlog.h>

#include "obs/core/error.hpp"
#include "obs/core/exposition.hpp"

namespace obs::tsdb {
namespace {

static_assert(std::endian::native == std::endian::little,
              "segment files are little-endian; add byte swapping for this target");

constexpr std::size_t kSegmentRecordSize = 24;
constexpr std::size_t kRollupRecordSize = 57;
constexpr std::size_t kStateRecordSize = 33;

constexpr std::uint8_t kStateDistilled = 1;
constexpr std::uint8_t kStateFloors = 2;
constexpr std::uint8_t kStateDirty = 3;

template <typename T>
void Put(std::uint8_t*& out, T value) {
  std::memcpy(out, &value, sizeof(T));
  out += sizeof(T);
}

template <typename T>
T Take(const std::uint8_t*& in) {
  T value;
  std::memcpy(&value, in, sizeof(T));
  in += sizeof(T);
  return value;
}

void WriteAll(std::FILE* f, const void* data, std::size_t n) {
  if (std::fwrite(data, 1, n, f) != n) throw Error(ErrorCode::kIoError, "short write");
}

std::FILE* OpenAppend(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return f;
}

void SyncFile(std::FILE* f) {
  if (!f) return;
  std::fflush(f);
  ::fsync(::fileno(f));
}

std::vector<std::uint8_t> ReadBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

CanonicalUnit UnitFromWire(std::string_view symbol) {
  try {
    return ConvertUnit(0, symbol).unit.canonical;
  } catch (const Error&) {
    return CanonicalUnit::kNone;
  }
}

struct Bucket {
  RollupPoint stats;
  std::vector<double> values;
  bool from_rollup = false;
};

double Finish(const Bucket& b, const AggSpec& agg) {
  switch (agg.kind) {
    case Aggregation::kMean: return b.stats.mean();
    case Aggregation::kMin: return b.stats.min;
    case Aggregation::kMax: return b.stats.max;
    case Aggregation::kSum: return b.stats.sum;
    case Aggregation::kCount: return static_cast<double>(b.stats.count);
    case Aggregation::kQuantile:
      if (b.from_rollup) {
        throw Error(ErrorCode::kQuantileNeedsRaw,
                    "quantile requested over a range that only has rollups");
      }
      return Quantile(b.values, agg.q);
    case Aggregation::kRaw: break;
  }
  return 0;
}

}  // namespace

Tsdb::Tsdb(TsdbOptions options) : options_(std::move(options)) {
  options_.retention.Validate();
  if (options_.shards < 1) options_.shards = 1;
  if (!options_.clock) options_.clock = WallClockMs;
  for (int i = 0; i < options_.shards; ++i) {
    auto shard = std::make_unique<Shard>();
    shard->index = i;
    shards_.push_back(std::move(shard));
  }
  if (!options_.data_dir.empty()) {
    std::filesystem::create_directories(options_.data_dir);
    Replay();
    dict_file_ = OpenAppend(options_.data_dir / "series.dict");
    rollup_file_ = OpenAppend(options_.data_dir / "rollups.log");
    state_file_ = OpenAppend(options_.data_dir / "state.log");
  }
}

Tsdb::~Tsdb() {
  for (auto& shard : shards_) {
    for (auto& [block, f] : shard->segments) std::fclose(f);
  }
  for (std::FILE* f : {dict_file_, rollup_file_, state_file_}) {
    if (f) std::fclose(f);
  }
}

Tsdb::Shard& Tsdb::ShardFor(const SeriesKey& key) const {
  return *shards_[SeriesKeyHash{}(key) % shards_.size()];
}

Tsdb::SeriesState* Tsdb::FindLocked(const Shard& shard, const SeriesKey& key) const {
  auto it = shard.series.find(key);
  return it == shard.series.end() ? nullptr : it->second.get();
}

Tsdb::SeriesState& Tsdb::GetOrCreateLocked(Shard& shard, const MetricSample& sample) {
  if (SeriesState* s = FindLocked(shard, sample.key)) return *s;
  std::size_t total = series_total_.load();
  do {
    if (total >= options_.max_series) {
      metrics_.Add("tsdb_series_limit_rejects_total");
      throw Error(ErrorCode::kStorageFull,
                  "series limit of " + std::to_string(options_.max_series) + " reached");
    }
  } while (!series_total_.compare_exchange_weak(total, total + 1));

  auto series = std::make_unique<SeriesState>();
  series->id = next_id_.fetch_add(1);
  series->key = sample.key;
  series->kind = sample.kind;
  series->unit = sample.unit.canonical;
  if (dict_file_) {
    std::string line = std::to_string(series->id) + "\t" + std::string(KindName(sample.kind)) +
                       "\t" + std::string(WireSymbol(sample.unit.canonical)) + "\t" +
                       sample.key.ToString() + "\n";
    std::lock_guard lock(dict_mu_);
    WriteAll(dict_file_, line.data(), line.size());
    std::fflush(dict_file_);
  }
  metrics_.Set("tsdb_series", static_cast<double>(series_total_.load()), CanonicalUnit::kCount);
  SeriesState& ref = *series;
  shard.series.emplace(sample.key, std::move(series));
  return ref;
}

std::filesystem::path Tsdb::SegmentPath(TimestampMs block, int shard_index) const {
  return options_.data_dir /
         ("raw-" + std::to_string(block) + "-" + std::to_string(shard_index) + ".seg");
}

void Tsdb::WriteSegmentRecord(Shard& shard, std::uint64_t id, TimestampMs ts, double value) {
  TimestampMs block = AlignDown(ts, options_.block_len);
  shard.block_series[block].insert(id);
  if (options_.data_dir.empty()) return;
  auto it = shard.segments.find(block);
  if (it == shard.segments.end()) {
    it = shard.segments.emplace(block, OpenAppend(SegmentPath(block, shard.index))).first;
  }
  std::array<std::uint8_t, kSegmentRecordSize> rec{};
  std::uint8_t* out = rec.data();
  Put(out, id);
  Put(out, ts);
  Put(out, value);
  WriteAll(it->second, rec.data(), rec.size());
}

void Tsdb::WriteRollup(Tier tier, std::uint64_t id, const RollupPoint& p) {
  if (!rollup_file_) return;
  std::array<std::uint8_t, kRollupRecordSize> rec{};
  std::uint8_t* out = rec.data();
  Put<std::uint8_t>(out, tier == Tier::k1m ? 1 : 2);
  Put(out, id);
  Put(out, p.window_start);
  Put(out, p.count);
  Put(out, p.sum);
  Put(out, p.min);
  Put(out, p.max);
  Put(out, p.sum_sq);
  std::lock_guard lock(log_mu_);
  WriteAll(rollup_file_, rec.data(), rec.size());
}

void Tsdb::WriteState(std::uint8_t kind, std::uint64_t id, TimestampMs a, TimestampMs b,
                      TimestampMs c) {
  if (!state_file_) return;
  std::array<std::uint8_t, kStateRecordSize> rec{};
  std::uint8_t* out = rec.data();
  Put(out, kind);
  Put(out, id);
  Put(out, a);
  Put(out, b);
  Put(out, c);
  std::lock_guard lock(log_mu_);
  WriteAll(state_file_, rec.data(), rec.size());
}

void Tsdb::Replay() {
  std::unordered_map<std::uint64_t, SeriesState*> by_id;
  std::uint64_t max_id = 0;

  std::ifstream dict(options_.data_dir / "series.dict");
  std::string line;
  while (std::getline(dict, line)) {
    std::istringstream fields(line);
    std::string id_text, kind_text, unit_text;
    if (!std::getline(fields, id_text, '\t') || !std::getline(fields, kind_text, '\t') ||
        !std::getline(fields, unit_text, '\t')) {
      continue;
    }
    std::string key_text;
    std::getline(fields, key_text);
    try {
      auto parsed = ParseExpositionLine(key_text + " gauge none 0 1");
      if (!parsed) continue;
      auto series = std::make_unique<SeriesState>();
      series->id = std::stoull(id_text);
      series->key = parsed->key;
      series->kind = ParseKind(kind_text).value_or(MetricKind::kGauge);
      series->unit = UnitFromWire(unit_text);
      max_id = std::max(max_id, series->id);
      by_id[series->id] = series.get();
      ShardFor(series->key).series.emplace(series->key, std::move(series));
      series_total_.fetch_add(1);
    } catch (const std::exception& e) {
      spdlog::warn("tsdb: skipping unreadable dictionary line: {}", e.what());
    }
  }
  next_id_ = max_id + 1;

  auto rollups = ReadBytes(options_.data_dir / "rollups.log");
  for (std::size_t off = 0; off + kRollupRecordSize <= rollups.size(); off += kRollupRecordSize) {
    const std::uint8_t* in = rollups.data() + off;
    auto tier = Take<std::uint8_t>(in);
    auto id = Take<std::uint64_t>(in);
    RollupPoint p;
    p.window_start = Take<TimestampMs>(in);
    p.count = Take<std::uint64_t>(in);
    p.sum = Take<double>(in);
    p.min = Take<double>(in);
    p.max = Take<double>(in);
    p.sum_sq = Take<double>(in);
    auto it = by_id.find(id);
    if (it == by_id.end()) continue;
    p.window_len = tier == 1 ? kMinute : kHour;
    (tier == 1 ? it->second->r1m : it->second->r1h)[p.window_start] = p;
  }

  auto state = ReadBytes(options_.data_dir / "state.log");
  for (std::size_t off = 0; off + kStateRecordSize <= state.size(); off += kStateRecordSize) {
    const std::uint8_t* in = state.data() + off;
    auto kind = Take<std::uint8_t>(in);
    auto id = Take<std::uint64_t>(in);
    auto a = Take<TimestampMs>(in);
    auto b = Take<TimestampMs>(in);
    auto c = Take<TimestampMs>(in);
    auto it = by_id.find(id);
    if (it == by_id.end()) continue;
    SeriesState& s = *it->second;
    if (kind == kStateDistilled) {
      s.distilled_1m = std::max(s.distilled_1m, a);
      s.distilled_1h = std::max(s.distilled_1h, b);
      s.dirty_minutes.clear();
    } else if (kind == kStateFloors) {
      s.raw_floor = std::max(s.raw_floor, a);
      s.r1m_floor = std::max(s.r1m_floor, b);
      s.r1h_floor = std::max(s.r1h_floor, c);
    } else if (kind == kStateDirty) {
      s.dirty_minutes.insert(a);
    }
  }
  for (auto& [id, s] : by_id) {
    std::erase_if(s->r1m, [&](const auto& kv) { return kv.first < s->r1m_floor; });
    std::erase_if(s->r1h, [&](const auto& kv) { return kv.first < s->r1h_floor; });
  }

  std::vector<std::tuple<TimestampMs, int, std::filesystem::path>> segments;
  for (const auto& entry : std::filesystem::directory_iterator(options_.data_dir)) {
    auto name = entry.path().filename().string();
    if (!name.starts_with("raw-") || !name.ends_with(".seg")) continue;
    auto body = name.substr(4, name.size() - 8);
    auto dash = body.rfind('-');
    if (dash == std::string::npos || dash == 0) continue;
    try {
      segments.emplace_back(std::stoll(body.substr(0, dash)), std::stoi(body.substr(dash + 1)),
                            entry.path());
    } catch (const std::exception&) {
      continue;
    }
  }
  std::sort(segments.begin(), segments.end());
  std::size_t points = 0;
  for (const auto& [block, shard_index, path] : segments) {
    auto bytes = ReadBytes(path);
    for (std::size_t off = 0; off + kSegmentRecordSize <= bytes.size();
         off += kSegmentRecordSize) {
      const std::uint8_t* in = bytes.data() + off;
      auto id = Take<std::uint64_t>(in);
      auto ts = Take<TimestampMs>(in);
      auto value = Take<double>(in);
      auto it = by_id.find(id);
      if (it == by_id.end()) continue;
      SeriesState& s = *it->second;
      if (shard_index >= 0 && shard_index < static_cast<int>(shards_.size())) {
        shards_[shard_index]->block_series[block].insert(id);
      }
      if (ts < s.raw_floor) continue;
      if (s.raw.emplace(ts, value).second) ++points;
    }
  }
  metrics_.Set("tsdb_series", static_cast<double>(series_total_.load()), CanonicalUnit::kCount);
  spdlog::info("tsdb: replayed {} series, {} raw points from {}", series_total_.load(), points,
               options_.data_dir.string());
}

bool Tsdb::Append(const MetricSample& sample) {
  TimestampMs now = options_.clock();
  if (sample.timestamp < now - options_.retention.raw) {
    metrics_.Add("tsdb_retention_violations_total");
    throw Error(ErrorCode::kRetentionViolation,
                "timestamp " + std::to_string(sample.timestamp) + " is older than raw retention");
  }
  Shard& shard = ShardFor(sample.key);
  std::unique_lock lock(shard.mu);
  SeriesState& s = GetOrCreateLocked(shard, sample);
  if (sample.timestamp < s.raw_floor) {
    metrics_.Add("tsdb_retention_violations_total");
    throw Error(ErrorCode::kRetentionViolation, "timestamp falls in an already cleared range");
  }
  if (!s.raw.emplace(sample.timestamp, sample.value).second) {
    metrics_.Add("tsdb_duplicates_total");
    return false;
  }
  WriteSegmentRecord(shard, s.id, sample.timestamp, sample.value);
  if (sample.timestamp < s.distilled_1m) {
    TimestampMs minute = AlignDown(sample.timestamp, kMinute);
    if (s.dirty_minutes.insert(minute).second) WriteState(kStateDirty, s.id, minute, 0, 0);
  }
  metrics_.Add("tsdb_points_appended_total");
  return true;
}

std::vector<SeriesResult> Tsdb::QueryRange(const Selector& selector, TimestampMs start,
                                           TimestampMs end, TimestampMs step,
                                           AggSpec agg) const {
  if (start >= end) throw Error(ErrorCode::kInvalidRange, "start must be before end");
  if (agg.kind != Aggregation::kRaw && step < kSecond) {
    throw Error(ErrorCode::kInvalidRange, "step must be at least 1000 ms");
  }
  std::vector<SeriesResult> out;
  for (const auto& shard : shards_) {
    std::shared_lock lock(shard->mu);
    for (const auto& [key, sp] : shard->series) {
      if (!selector.Matches(key)) continue;
      const SeriesState& s = *sp;
      SeriesResult result{key, {}};
      if (agg.kind == Aggregation::kRaw) {
        for (auto it = s.raw.lower_bound(start); it != s.raw.end() && it->first < end; ++it) {
          result.points.push_back({it->first, it->second});
        }
      } else {
        std::map<TimestampMs, Bucket> buckets;
        auto bucket_of = [&](TimestampMs t) -> Bucket& {
          return buckets[start + (t - start) / step * step];
        };
        for (auto it = s.raw.lower_bound(std::max(start, s.raw_floor));
             it != s.raw.end() && it->first < end; ++it) {
          Bucket& b = bucket_of(it->first);
          b.stats.Add(it->second);
          if (agg.kind == Aggregation::kQuantile) b.values.push_back(it->second);
        }
        TimestampMs r1m_end = std::min(end, s.raw_floor);
        for (auto it = s.r1m.lower_bound(std::max(start, s.r1m_floor));
             it != s.r1m.end() && it->first < r1m_end; ++it) {
          Bucket& b = bucket_of(it->first);
          b.stats.Merge(it->second);
          b.from_rollup = true;
        }
        TimestampMs r1h_end = std::min(end, s.r1m_floor);
        for (auto it = s.r1h.lower_bound(std::max(start, s.r1h_floor));
             it != s.r1h.end() && it->first < r1h_end; ++it) {
          Bucket& b = bucket_of(it->first);
          b.stats.Merge(it->second);
          b.from_rollup = true;
        }
        for (const auto& [bucket_start, b] : buckets) {
          if (b.stats.count == 0) continue;
          result.points.push_back({bucket_start, Finish(b, agg)});
        }
      }
      if (!result.points.empty()) out.push_back(std::move(result));
    }
  }
  std::sort(out.begin(), out.end(),
            [](const SeriesResult& a, const SeriesResult& b) { return a.key < b.key; });
  return out;
}

std::vector<RollupPoint> Tsdb::Downsample(const SeriesKey& key, TimestampMs resolution,
                                          TimestampMs start, TimestampMs end) const {
  if (resolution <= 0 || start >= end || AlignDown(start, resolution) != start ||
      AlignDown(end, resolution) != end) {
    throw Error(ErrorCode::kUnalignedWindow, "window must be aligned to the resolution");
  }
  std::vector<RollupPoint> out;
  const Shard& shard = ShardFor(key);
  std::shared_lock lock(shard.mu);
  const SeriesState* s = FindLocked(shard, key);
  if (!s) return out;
  for (auto it = s->raw.lower_bound(start); it != s->raw.end() && it->first < end; ++it) {
    TimestampMs bucket = AlignDown(it->first, resolution);
    if (out.empty() || out.back().window_start != bucket) {
      out.push_back(RollupPoint::FromValue(bucket, resolution, it->second));
    } else {
      out.back().Add(it->second);
    }
  }
  return out;
}

std::vector<QueryPoint> Tsdb::RawPoints(const SeriesKey& key, TimestampMs start,
                                        TimestampMs end) const {
  std::vector<QueryPoint> out;
  const Shard& shard = ShardFor(key);
  std::shared_lock lock(shard.mu);
  const SeriesState* s = FindLocked(shard, key);
  if (!s) return out;
  for (auto it = s->raw.lower_bound(start); it != s->raw.end() && it->first < end; ++it) {
    out.push_back({it->first, it->second});
  }
  return out;
}

std::vector<RollupPoint> Tsdb::Rollups(const SeriesKey& key, Tier tier, TimestampMs start,
                                       TimestampMs end) const {
  std::vector<RollupPoint> out;
  const Shard& shard = ShardFor(key);
  std::shared_lock lock(shard.mu);
  const SeriesState* s = FindLocked(shard, key);
  if (!s) return out;
  const auto& tier_map = tier == Tier::k1m ? s->r1m : s->r1h;
  for (auto it = tier_map.lower_bound(start); it != tier_map.end() && it->first < end; ++it) {
    out.push_back(it->second);
  }
  return out;
}

std::vector<SeriesKey> Tsdb::ListSeries(const Selector& selector) const {
  std::vector<SeriesKey> out;
  for (const auto& shard : shards_) {
    std::shared_lock lock(shard->mu);
    for (const auto& [key, s] : shard->series) {
      if (selector.Matches(key)) out.push_back(key);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SeriesKey> Tsdb::SeriesNeedingDistill(TimestampMs horizon) const {
  std::vector<SeriesKey> out;
  for (const auto& shard : shards_) {
    std::shared_lock lock(shard->mu);
    for (const auto& [key, s] : shard->series) {
      bool pending = !s->dirty_minutes.empty() && *s->dirty_minutes.begin() < horizon;
      if (!pending) {
        auto it = s->raw.lower_bound(s->distilled_1m);
        pending = it != s->raw.end() && it->first < horizon;
      }
      if (pending) out.push_back(key);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

DistillResult Tsdb::Distill(const SeriesKey& key, TimestampMs horizon) {
  if (AlignDown(horizon, kHour) != horizon) {
    throw Error(ErrorCode::kUnalignedWindow, "distill horizon must be hour aligned");
  }
  DistillResult result;
  Shard& shard = ShardFor(key);
  std::unique_lock lock(shard.mu);
  SeriesState* s = FindLocked(shard, key);
  if (!s) return result;

  std::set<TimestampMs> minutes;
  for (TimestampMs m : s->dirty_minutes) {
    if (m < horizon) minutes.insert(m);
  }
  for (auto it = s->raw.lower_bound(s->distilled_1m); it != s->raw.end() && it->first < horizon;
       ++it) {
    minutes.insert(AlignDown(it->first, kMinute));
  }

  std::set<TimestampMs> hours;
  for (TimestampMs m : minutes) {
    RollupPoint p{m, kMinute, 0, 0, 0, 0, 0};
    for (auto it = s->raw.lower_bound(m); it != s->raw.end() && it->first < m + kMinute; ++it) {
      p.Add(it->second);
    }
    if (p.count == 0) continue;
    s->r1m[m] = p;
    WriteRollup(Tier::k1m, s->id, p);
    result.summary.Merge(p);
    ++result.rollups_1m;
    hours.insert(AlignDown(m, kHour));
  }
  for (TimestampMs h : hours) {
    RollupPoint p{h, kHour, 0, 0, 0, 0, 0};
    for (auto it = s->r1m.lower_bound(h); it != s->r1m.end() && it->first < h + kHour; ++it) {
      p.Merge(it->second);
    }
    if (p.count == 0) continue;
    s->r1h[h] = p;
    WriteRollup(Tier::k1h, s->id, p);
    ++result.rollups_1h;
  }
  if (!minutes.empty()) {
    result.window_start = *minutes.begin();
    result.window_end = *minutes.rbegin() + kMinute;
    result.summary.window_start = result.window_start;
    result.summary.window_len = result.window_end - result.window_start;
  }

  std::erase_if(s->dirty_minutes, [&](TimestampMs m) { return m < horizon; });
  s->distilled_1m = std::max(s->distilled_1m, horizon);
  s->distilled_1h = std::max(s->distilled_1h, horizon);
  // Rollups must be durable before the watermark that lets retention clear raw data.
  {
    std::lock_guard log_lock(log_mu_);
    SyncFile(rollup_file_);
  }
  WriteState(kStateDistilled, s->id, s->distilled_1m, s->distilled_1h, 0);
  {
    std::lock_guard log_lock(log_mu_);
    SyncFile(state_file_);
  }
  metrics_.Add("tsdb_rollups_written_total",
               static_cast<double>(result.rollups_1m + result.rollups_1h));
  return result;
}

RetentionReport Tsdb::EnforceRetention(TimestampMs now) {
  RetentionReport report;
  const TimestampMs raw_cut = AlignDown(now - options_.retention.raw, kMinute);
  const TimestampMs r1m_cut = AlignDown(now - options_.retention.rollup_1m, kHour);
  const TimestampMs r1h_cut = AlignDown(now - options_.retention.rollup_1h, kHour);
  std::vector<MetricSample> events;

  for (auto& shard : shards_) {
    std::unique_lock lock(shard->mu);
    bool floors_changed = false;
    for (auto& [key, sp] : shard->series) {
      SeriesState& s = *sp;
      TimestampMs raw_safe = std::min(raw_cut, s.distilled_1m);
      if (!s.dirty_minutes.empty()) raw_safe = std::min(raw_safe, *s.dirty_minutes.begin());

      auto aged_end = s.raw.lower_bound(raw_cut);
      auto safe_end = s.raw.lower_bound(raw_safe);
      if (safe_end != aged_end) {
        ++report.blocked_series;
        MetricSample ev;
        ev.key = SeriesKey::Canonicalize("tsdb_retention_blocked",
                                         LabelMap{{"series", key.ToString()}});
        ev.value = static_cast<double>(std::distance(safe_end, aged_end));
        ev.timestamp = now;
        ev.unit = Unit{CanonicalUnit::kCount, "count"};
        ev.kind = MetricKind::kEvent;
        events.push_back(std::move(ev));
      }
      report.raw_deleted += static_cast<std::uint64_t>(std::distance(s.raw.begin(), safe_end));
      s.raw.erase(s.raw.begin(), safe_end);

      TimestampMs r1m_safe = std::min(r1m_cut, s.distilled_1h);
      auto r1m_end = s.r1m.lower_bound(r1m_safe);
      report.rollups_deleted += static_cast<std::uint64_t>(std::distance(s.r1m.begin(), r1m_end));
      s.r1m.erase(s.r1m.begin(), r1m_end);

      auto r1h_end = s.r1h.lower_bound(r1h_cut);
      report.rollups_deleted += static_cast<std::uint64_t>(std::distance(s.r1h.begin(), r1h_end));
      s.r1h.erase(s.r1h.begin(), r1h_end);

      TimestampMs new_raw = std::max(s.raw_floor, raw_safe);
      TimestampMs new_1m = std::max(s.r1m_floor, r1m_safe);
      TimestampMs new_1h = std::max(s.r1h_floor, r1h_cut);
      if (new_raw != s.raw_floor || new_1m != s.r1m_floor || new_1h != s.r1h_floor) {
        s.raw_floor = new_raw;
        s.r1m_floor = new_1m;
        s.r1h_floor = new_1h;
        WriteState(kStateFloors, s.id, new_raw, new_1m, new_1h);
        floors_changed = true;
      }
    }
    if (floors_changed) {
      std::lock_guard log_lock(log_mu_);
      SyncFile(state_file_);
    }

    // A block file goes once every series written to it has cleared past it.
    std::unordered_map<std::uint64_t, TimestampMs> floor_by_id;
    for (const auto& [key, sp] : shard->series) floor_by_id[sp->id] = sp->raw_floor;
    for (auto it = shard->block_series.begin(); it != shard->block_series.end();) {
      TimestampMs block_end = it->first + options_.block_len;
      bool expired = std::all_of(it->second.begin(), it->second.end(), [&](std::uint64_t id) {
        auto f = floor_by_id.find(id);
        return f == floor_by_id.end() || f->second >= block_end;
      });
      if (!expired) {
        ++it;
        continue;
      }
      if (auto seg = shard->segments.find(it->first); seg != shard->segments.end()) {
        std::fclose(seg->second);
        shard->segments.erase(seg);
      }
      if (!options_.data_dir.empty()) {
        std::error_code ec;
        std::filesystem::remove(SegmentPath(it->first, shard->index), ec);
      }
      it = shard->block_series.erase(it);
    }
  }

  if (report.blocked_series > 0) {
    metrics_.Add("tsdb_retention_blocked_total", static_cast<double>(report.blocked_series));
    spdlog::warn("tsdb: retention blocked for {} series with undistilled raw data",
                 report.blocked_series);
  }
  if (options_.event_sink) {
    for (const auto& ev : events) options_.event_sink(ev);
  }
  return report;
}

void Tsdb::Flush() {
  for (auto& shard : shards_) {
    std::unique_lock lock(shard->mu);
    for (auto& [block, f] : shard->segments) std::fflush(f);
  }
  std::lock_guard lock(log_mu_);
  for (std::FILE* f : {rollup_file_, state_file_}) {
    if (f) std::fflush(f);
  }
}

}  // namespace obs::tsdb
