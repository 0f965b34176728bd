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

#include "obs/analytics/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <spdlog/spdlog.h>

#include "obs/core/error.hpp"
#include "obs/metastore/metastore.hpp"

namespace obs::analytics {
namespace {

double Median(std::vector<double>& v) {
  std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  double hi = *mid;
  if (n % 2) return hi;
  double lo = *std::max_element(v.begin(), mid);
  return (lo + hi) / 2;
}

}  // namespace

void AnomalyParams::Validate() const {
  if (window_points < 8) throw Error(ErrorCode::kInvalidArgument, "window_points must be >= 8");
  if (!(threshold_k > 0)) throw Error(ErrorCode::kInvalidArgument, "threshold_k must be > 0");
  if (!(min_mad_epsilon > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "min_mad_epsilon must be > 0");
  }
}

double RobustZScore(std::span<const double> window, double x, double min_mad_epsilon) {
  if (window.size() < 8) {
    throw Error(ErrorCode::kWindowTooSmall, "robust z-score needs at least 8 points");
  }
  std::vector<double> v(window.begin(), window.end());
  double median = Median(v);
  for (auto& w : v) w = std::abs(w - median);
  double mad = Median(v);
  return 0.6745 * (x - median) / std::max(mad, min_mad_epsilon);
}

std::vector<AnomalySpan> DetectAnomalies(const SeriesKey& key,
                                         std::span<const tsdb::QueryPoint> points,
                                         const AnomalyParams& params) {
  params.Validate();
  auto w = static_cast<std::size_t>(params.window_points);
  if (points.size() < w + 1) {
    throw Error(ErrorCode::kInsufficientData,
                key.ToString() + ": need " + std::to_string(w + 1) + " points, have " +
                    std::to_string(points.size()));
  }
  std::vector<AnomalySpan> spans;
  std::deque<double> reference;
  for (std::size_t i = 0; i < w; ++i) reference.push_back(points[i].v);
  std::vector<double> scratch;
  bool open = false;
  for (std::size_t i = w; i < points.size(); ++i) {
    scratch.assign(reference.begin(), reference.end());
    double score = RobustZScore(scratch, points[i].v, params.min_mad_epsilon);
    if (std::abs(score) > params.threshold_k) {
      if (!open) {
        spans.push_back({key, points[i].t, points[i].t, std::abs(score), points[i].t});
        open = true;
      } else {
        spans.back().end = points[i].t;
        spans.back().peak_score = std::max(spans.back().peak_score, std::abs(score));
      }
    } else {
      open = false;
      reference.pop_front();
      reference.push_back(points[i].v);
    }
  }
  return spans;
}

double Correlate(std::span<const tsdb::QueryPoint> a, std::span<const tsdb::QueryPoint> b) {
  std::vector<double> xs, ys;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].t < b[j].t) {
      ++i;
    } else if (b[j].t < a[i].t) {
      ++j;
    } else {
      xs.push_back(a[i++].v);
      ys.push_back(b[j++].v);
    }
  }
  if (xs.size() < 3) {
    throw Error(ErrorCode::kInsufficientOverlap,
                "correlation needs 3 shared buckets, have " + std::to_string(xs.size()));
  }
  double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    double dx = xs[k] - mx, dy = ys[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw Error(ErrorCode::kZeroVariance, "series is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

AnalyticsOptions AnalyticsOptions::FromConfig(const ConfigFile& config) {
  AnalyticsOptions o;
  o.cycle_interval_seconds =
      static_cast<int>(config.GetInt("analytics.cycle_interval_seconds", o.cycle_interval_seconds));
  o.anomaly.window_points =
      static_cast<int>(config.GetInt("analytics.anomaly.window_points", o.anomaly.window_points));
  o.anomaly.threshold_k = config.GetDouble("analytics.anomaly.threshold_k", o.anomaly.threshold_k);
  if (o.cycle_interval_seconds < 1) {
    throw Error(ErrorCode::kValidationFailed, "analytics.cycle_interval_seconds must be >= 1");
  }
  try {
    o.anomaly.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kValidationFailed, std::string("analytics.anomaly: ") + e.what());
  }
  return o;
}

Analytics::Analytics(tsdb::Tsdb& tsdb, metastore::Metastore* metastore, AnalyticsOptions options)
    : tsdb_(tsdb), metastore_(metastore), options_(std::move(options)) {
  options_.anomaly.Validate();
}

std::vector<AnomalySpan> Analytics::DetectAnomalies(const SeriesKey& key, TimestampMs start,
                                                    TimestampMs end) const {
  return DetectAnomalies(key, start, end, options_.anomaly);
}

std::vector<AnomalySpan> Analytics::DetectAnomalies(const SeriesKey& key, TimestampMs start,
                                                    TimestampMs end,
                                                    const AnomalyParams& params) const {
  if (start >= end) throw Error(ErrorCode::kInvalidRange, "start must be before end");
  auto points = tsdb_.RawPoints(key, start, end);
  return analytics::DetectAnomalies(key, points, params);
}

double Analytics::Correlate(const SeriesKey& a, const SeriesKey& b, TimestampMs start,
                            TimestampMs end, TimestampMs step) const {
  auto fetch = [&](const SeriesKey& key) {
    for (auto& series : tsdb_.QueryRange(Selector::ForKey(key), start, end, step, {tsdb::Aggregation::kMean, 0})) {
      if (series.key == key) return std::move(series.points);
    }
    return std::vector<tsdb::QueryPoint>{};
  };
  auto pa = fetch(a);
  auto pb = fetch(b);
  return analytics::Correlate(pa, pb);
}

std::vector<RootCause> Analytics::RankRootCauses(const AnomalySpan& target,
                                                 const std::vector<SeriesKey>& candidates,
                                                 TimestampMs start, TimestampMs end,
                                                 TimestampMs step) const {
  std::vector<RootCause> out;
  const double window_len = static_cast<double>(end - start);
  for (const auto& key : candidates) {
    if (key == target.key) continue;
    std::vector<AnomalySpan> spans;
    try {
      spans = DetectAnomalies(key, start, end);
    } catch (const Error& e) {
      continue;
    }
    if (spans.empty()) continue;
    RootCause rc;
    rc.key = key;
    rc.onset = spans.front().onset;
    try {
      rc.correlation = Correlate(target.key, key, start, end, step);
    } catch (const Error& e) {
      rc.correlation = 0;
    }
    double lead = static_cast<double>(std::max<TimestampMs>(0, target.onset - rc.onset));
    rc.score = std::abs(rc.correlation) * (1 + lead / window_len);
    out.push_back(std::move(rc));
  }
  std::sort(out.begin(), out.end(), [](const RootCause& a, const RootCause& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.onset != b.onset) return a.onset < b.onset;
    return a.key < b.key;
  });
  return out;
}

CycleReport Analytics::DistillCycle(TimestampMs now) {
  std::lock_guard lock(cycle_mu_);
  CycleReport report;
  auto hook = [this](CyclePhase phase) {
    if (options_.phase_hook) options_.phase_hook(phase);
  };

  TimestampMs horizon =
      tsdb::AlignDown(now - tsdb_.retention().raw + options_.distill_lead, tsdb::kHour);
  auto pending = tsdb_.SeriesNeedingDistill(horizon);
  hook(CyclePhase::kGathered);

  for (const auto& key : pending) {
    try {
      auto result = tsdb_.Distill(key, horizon);
      ++report.series_distilled;
      if (metastore_ && result.summary.count > 0) {
        const auto& r = result.summary;
        metastore::SummaryRecord summary;
        summary.selector = key.ToString();
        summary.window_start = result.window_start;
        summary.window_end = result.window_end;
        summary.stats = metastore::MakeStats(r.count, r.sum, r.min, r.max, r.sum_sq);
        summary.produced_at = now;
        metastore_->StoreSummary(std::move(summary));
        ++report.summaries_written;
      }
    } catch (const std::exception& e) {
      metrics_.Add("analytics_distill_errors_total");
      spdlog::error("distill {} failed: {}", key.ToString(), e.what());
    }
  }
  hook(CyclePhase::kDistilled);

  auto retention = tsdb_.EnforceRetention(now);
  report.raw_cleared = retention.raw_deleted;
  report.rollups_cleared = retention.rollups_deleted;
  hook(CyclePhase::kCleared);

  metrics_.Add("analytics_cycles_total");
  metrics_.Add("analytics_series_distilled_total", static_cast<double>(report.series_distilled));
  return report;
}

}  // namespace obs::analytics
