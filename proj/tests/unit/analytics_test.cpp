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

#include <sys/wait.h>
#include <unistd.h>

#include <random>

#include <gtest/gtest.h>

#include "obs/analytics/analytics.hpp"
#include "obs/core/error.hpp"
#include "obs/metastore/metastore.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace obs::analytics {
namespace {

using tsdb::QueryPoint;

std::vector<double> Range(double lo, double hi) {
  std::vector<double> v;
  for (double x = lo; x <= hi; x += 1) v.push_back(x);
  return v;
}

TEST(RobustZScore, Examples) {
  std::vector<double> fives(10, 5.0);
  EXPECT_EQ(RobustZScore(fives, 5.0), 0.0);
  EXPECT_GT(RobustZScore(fives, 6.0), 1e11);
  EXPECT_LT(RobustZScore(fives, 4.0), -1e11);
  // median 5, MAD 2.
  EXPECT_DOUBLE_EQ(RobustZScore(Range(1, 9), 11), 0.6745 * 6 / 2);
  EXPECT_NEAR(RobustZScore(Range(1, 9), 11), 2.0235, 1e-12);
}

TEST(RobustZScore, WindowTooSmall) {
  try {
    RobustZScore(Range(1, 7), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kWindowTooSmall);
  }
}

TEST(RobustZScore, MatchesMedianOracle) {
  std::mt19937_64 rng(1);
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<double> w(8 + rng() % 50);
    for (auto& x : w) x = std::uniform_real_distribution<double>(-100, 100)(rng);
    double x = std::uniform_real_distribution<double>(-200, 200)(rng);
    double med = testing::MedianOracle(w);
    std::vector<double> dev;
    for (double v : w) dev.push_back(std::abs(v - med));
    double mad = testing::MedianOracle(dev);
    EXPECT_EQ(RobustZScore(w, x), 0.6745 * (x - med) / mad);
  }
}

// Property: shifting or positively scaling window and x together never
// changes whether the point is flagged.
TEST(RobustZScore, DecisionInvariantUnderShiftAndScale) {
  std::mt19937_64 rng(2);
  const double k = 3.5;
  int flagged = 0;
  for (int iter = 0; iter < 5'000; ++iter) {
    std::vector<double> w(8 + rng() % 40);
    for (auto& x : w) x = static_cast<double>(static_cast<int>(rng() % 200) - 100);
    double x = static_cast<double>(static_cast<int>(rng() % 1000) - 500);
    bool base = std::abs(RobustZScore(w, x)) > k;
    flagged += base;
    // Exact transforms: integer shift and power-of-two scale.
    double shift = static_cast<double>(static_cast<int>(rng() % 2001) - 1000);
    double scale = std::ldexp(1.0, static_cast<int>(rng() % 21) - 10);
    // A general positive scale, checked away from the threshold boundary.
    double c = std::uniform_real_distribution<double>(0.01, 100)(rng);
    std::vector<double> ws, wc;
    for (double v : w) {
      ws.push_back((v + shift) * scale);
      wc.push_back(v * c + shift);
    }
    EXPECT_EQ(std::abs(RobustZScore(ws, (x + shift) * scale)) > k, base);
    double s = RobustZScore(w, x);
    if (std::abs(std::abs(s) - k) > 1e-6) {
      EXPECT_EQ(std::abs(RobustZScore(wc, x * c + shift)) > k, base);
    }
  }
  EXPECT_GT(flagged, 100);
}

std::vector<QueryPoint> Points(const std::vector<double>& values, TimestampMs t0 = 0,
                               TimestampMs dt = 60) {
  std::vector<QueryPoint> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back({t0 + static_cast<TimestampMs>(i) * dt, values[i]});
  }
  return out;
}

const SeriesKey kKey = SeriesKey::Canonicalize("latency_seconds", LabelMap{});

TEST(DetectAnomalies, ConstantSeriesHasNoSpans) {
  std::mt19937_64 rng(4);
  for (int iter = 0; iter < 100; ++iter) {
    double c = std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
    auto pts = Points(std::vector<double>(61 + rng() % 300, c));
    EXPECT_TRUE(DetectAnomalies(kKey, pts, {}).empty());
  }
}

// 950 requests at 100 ms and 50 contiguous at 3000 ms in one minute.
std::vector<double> MaskingValues(std::size_t spike_at) {
  std::vector<double> v(1000, 100.0);
  std::fill(v.begin() + static_cast<std::ptrdiff_t>(spike_at),
            v.begin() + static_cast<std::ptrdiff_t>(spike_at + 50), 3000.0);
  return v;
}

TEST(DetectAnomalies, MaskingScenarioGivesOneSpanOverTheSpike) {
  for (std::size_t at : {60u, 475u, 950u}) {
    auto pts = Points(MaskingValues(at), 1'700'000'000'000);
    auto spans = DetectAnomalies(kKey, pts, {});
    ASSERT_EQ(spans.size(), 1u) << at;
    EXPECT_EQ(spans[0].start, pts[at].t);
    EXPECT_EQ(spans[0].onset, pts[at].t);
    EXPECT_EQ(spans[0].end, pts[at + 49].t);
    // Direct computation: the baseline is all 100s, so the MAD floor applies.
    std::vector<double> baseline(60, 100.0);
    EXPECT_EQ(spans[0].peak_score, RobustZScore(baseline, 3000.0));
    EXPECT_GE(spans[0].peak_score, 3.5);
  }
}

TEST(DetectAnomalies, InsufficientData) {
  try {
    DetectAnomalies(kKey, Points(std::vector<double>(60, 1.0)), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
  EXPECT_NO_THROW(DetectAnomalies(kKey, Points(std::vector<double>(61, 1.0)), {}));
}

TEST(DetectAnomalies, SeparateSpikesGiveSeparateSpans) {
  std::mt19937_64 rng(8);
  std::vector<double> v;
  for (int i = 0; i < 400; ++i) v.push_back(10 + std::uniform_real_distribution<double>(-1, 1)(rng));
  for (int i : {100, 101, 102, 250, 320}) v[i] = 60;
  auto spans = DetectAnomalies(kKey, Points(v), {});
  ASSERT_EQ(spans.size(), 3u);
  EXPECT_EQ(spans[0].start, 100 * 60);
  EXPECT_EQ(spans[0].end, 102 * 60);
  EXPECT_EQ(spans[1].start, spans[1].end);
  for (const auto& s : spans) {
    EXPECT_LE(s.start, s.onset);
    EXPECT_LE(s.onset, s.end);
  }
}

TEST(Correlate, Examples) {
  auto a = Points({1, 2, 3, 4});
  auto b = Points({2, 4, 7, 8});
  auto neg = Points({-1, -2, -3, -4});
  EXPECT_EQ(Correlate(a, a), 1.0);
  EXPECT_EQ(Correlate(a, neg), -1.0);
  EXPECT_NEAR(Correlate(a, b), testing::PearsonOracle({1, 2, 3, 4}, {2, 4, 7, 8}), 1e-15);
  // By hand: sxy = 10.5, sxx = 5, syy = 22.75.
  EXPECT_NEAR(Correlate(a, b), 10.5 / std::sqrt(5 * 22.75), 1e-15);
}

TEST(Correlate, DropsUnsharedBuckets) {
  std::vector<QueryPoint> a = {{0, 1}, {60, 2}, {120, 3}, {180, 4}, {240, 100}};
  std::vector<QueryPoint> b = {{0, 2}, {60, 4}, {120, 7}, {180, 8}, {300, -5}};
  EXPECT_EQ(Correlate(a, b), Correlate(Points({1, 2, 3, 4}), Points({2, 4, 7, 8})));
}

TEST(Correlate, Errors) {
  try {
    Correlate(Points({1, 2}), Points({1, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientOverlap);
  }
  try {
    Correlate(Points({1, 2, 3}), Points({5, 5, 5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroVariance);
  }
}

TEST(Correlate, SymmetricAndSelfOneMatchesOracle) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> val(-1e3, 1e3);
  for (int iter = 0; iter < 2'000; ++iter) {
    std::size_t n = 3 + rng() % 100;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = val(rng);
      y[i] = rng() % 3 ? x[i] * 0.5 + val(rng) : val(rng);
    }
    auto a = Points(x), b = Points(y);
    double r = Correlate(a, b);
    EXPECT_NEAR(r, Correlate(b, a), 1e-12);
    EXPECT_NEAR(r, testing::PearsonOracle(x, y), 1e-9);
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
    EXPECT_EQ(Correlate(a, a), 1.0);
  }
}

constexpr TimestampMs kT0 = 1'700'000'000'000 - 1'700'000'000'000 % tsdb::kHour;

class StoreTest : public ::testing::Test {
 protected:
  tsdb::TsdbOptions TsdbOpts() {
    tsdb::TsdbOptions o;
    o.clock = [this] { return now_; };
    return o;
  }
  void Put(const SeriesKey& key, TimestampMs t, double v) {
    MetricSample s;
    s.key = key;
    s.value = v;
    s.timestamp = t;
    s.unit = Unit{CanonicalUnit::kSeconds, "s"};
    db_.Append(s);
  }

  TimestampMs now_ = kT0 + tsdb::kHour;
  tsdb::Tsdb db_{TsdbOpts()};
  metastore::Metastore meta_;
};

SeriesKey Key(const std::string& name) { return SeriesKey::Canonicalize(name, LabelMap{}); }

TEST_F(StoreTest, RankRootCausesPrefersLeadingCorrelatedCandidate) {
  Analytics an(db_, &meta_);
  std::mt19937_64 rng(12);
  // Target spikes at minute 40. "db" starts 20 s earlier and tracks it;
  // "cache" starts a minute later and only half overlaps; "idle" never spikes.
  for (int i = 0; i < 60 * 6; ++i) {
    TimestampMs t = kT0 + i * 10'000;
    double noise = std::uniform_real_distribution<double>(-1, 1)(rng);
    bool target_spike = i >= 240 && i < 252;
    bool db_spike = i >= 238 && i < 252;
    bool cache_spike = i >= 246 && i < 258;
    Put(Key("api_latency"), t, (target_spike ? 50 : 10) + noise);
    Put(Key("db_latency"), t, (db_spike ? 40 : 5) + noise);
    Put(Key("cache_misses"), t, (cache_spike ? 80 : 20) + noise);
    Put(Key("idle"), t, 1);
  }
  TimestampMs start = kT0, end = kT0 + tsdb::kHour;
  auto target = an.DetectAnomalies(Key("api_latency"), start, end);
  ASSERT_EQ(target.size(), 1u);
  auto ranked = an.RankRootCauses(target[0],
                                  {Key("idle"), Key("cache_misses"), Key("db_latency"),
                                   Key("api_latency")},
                                  start, end, tsdb::kMinute);
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(ranked[0].key, Key("db_latency"));
  EXPECT_LT(ranked[0].onset, target[0].onset);
  EXPECT_GT(ranked[0].score, std::abs(ranked[0].correlation));
  EXPECT_EQ(ranked[1].key, Key("cache_misses"));
  EXPECT_EQ(ranked[1].score, std::abs(ranked[1].correlation));
}

TEST_F(StoreTest, RankRootCausesTiesGoToKeyOrder) {
  Analytics an(db_, &meta_);
  for (int i = 0; i < 200; ++i) {
    TimestampMs t = kT0 + i * 10'000;
    double v = i >= 100 && i < 110 ? 50 : 10 + (i % 3);
    Put(Key("target"), t, v);
    Put(Key("zeta"), t, v);
    Put(Key("alpha"), t, v);
  }
  auto spans = an.DetectAnomalies(Key("target"), kT0, kT0 + tsdb::kHour);
  ASSERT_FALSE(spans.empty());
  auto ranked = an.RankRootCauses(spans[0], {Key("zeta"), Key("alpha")}, kT0,
                                  kT0 + tsdb::kHour, tsdb::kMinute);
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(ranked[0].score, ranked[1].score);
  EXPECT_EQ(ranked[0].key, Key("alpha"));
}

TEST_F(StoreTest, RankRootCausesEmptyWithoutAnomalousCandidates) {
  Analytics an(db_, &meta_);
  for (int i = 0; i < 100; ++i) Put(Key("flat"), kT0 + i * 1000, 3);
  AnomalySpan target{Key("x"), kT0, kT0, 10, kT0};
  EXPECT_TRUE(an.RankRootCauses(target, {Key("flat"), Key("missing")}, kT0,
                                kT0 + tsdb::kHour, tsdb::kMinute)
                  .empty());
}

TEST_F(StoreTest, DistillCycleWalk) {
  Analytics an(db_, &meta_);
  EXPECT_EQ(an.DistillCycle(now_), CycleReport{});

  // 30 minutes of points, one every 10 s.
  double sum = 0;
  for (int i = 0; i < 180; ++i) {
    Put(Key("cpu"), kT0 + i * 10'000, i);
    sum += i;
  }
  // A day later that raw data is past retention.
  now_ = kT0 + tsdb::kDay + 40 * tsdb::kMinute;
  auto report = an.DistillCycle(now_);
  EXPECT_EQ(report.series_distilled, 1u);
  EXPECT_EQ(report.summaries_written, 1u);
  EXPECT_GT(report.raw_cleared, 0u);
  EXPECT_EQ(report.rollups_cleared, 0u);

  EXPECT_EQ(an.DistillCycle(now_), CycleReport{});

  auto summaries = meta_.QuerySummaries(Selector::Parse("cpu"), 0, now_);
  ASSERT_EQ(summaries.size(), 1u);
  EXPECT_EQ(summaries[0].stats.count, 180u);
  EXPECT_EQ(summaries[0].stats.sum, sum);
  EXPECT_EQ(summaries[0].selector, "cpu{}");
  // Conservation: the minute rollups still hold everything that was cleared.
  auto rollups = db_.Rollups(Key("cpu"), tsdb::Tier::k1m, kT0, kT0 + tsdb::kHour);
  std::uint64_t count = 0;
  double rsum = 0;
  for (const auto& r : rollups) {
    count += r.count;
    rsum += r.sum;
  }
  EXPECT_EQ(count, 180u);
  EXPECT_EQ(rsum, sum);
}

// Kill a child process between distill and clear, then rerun the cycle from
// the files it left behind.
TEST(DistillCycleCrash, KillBetweenDistillAndClear) {
  testing::TempDir dir;
  const TimestampMs t0 = kT0;
  const TimestampMs later = t0 + tsdb::kDay + 2 * tsdb::kHour;
  std::mt19937_64 rng(21);
  std::map<SeriesKey, std::vector<double>> written;
  {
    tsdb::TsdbOptions o;
    o.data_dir = dir.path() / "tsdb";
    o.clock = [t0] { return t0 + 3 * tsdb::kHour; };
    tsdb::Tsdb db(o);
    for (int s = 0; s < 5; ++s) {
      auto key = SeriesKey::Canonicalize("m", LabelMap{{"s", std::to_string(s)}});
      for (int i = 0; i < 600; ++i) {
        MetricSample m;
        m.key = key;
        m.value = static_cast<double>(rng() % 1000);
        m.timestamp = t0 + i * 17'000;
        m.unit = Unit{CanonicalUnit::kNone, ""};
        db.Append(m);
        written[key].push_back(m.value);
      }
    }
    db.Flush();
  }
  auto open = [&](Clock clock, tsdb::Tsdb*& out_db, metastore::Metastore*& out_meta) {
    tsdb::TsdbOptions o;
    o.data_dir = dir.path() / "tsdb";
    o.clock = std::move(clock);
    out_db = new tsdb::Tsdb(o);
    metastore::MetastoreOptions mo;
    mo.file = dir.path() / "meta.log";
    out_meta = new metastore::Metastore(mo);
  };

  pid_t pid = ::fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    tsdb::Tsdb* db;
    metastore::Metastore* meta;
    open([later] { return later; }, db, meta);
    AnalyticsOptions ao;
    ao.phase_hook = [](CyclePhase p) {
      if (p == CyclePhase::kDistilled) ::_exit(42);
    };
    Analytics an(*db, meta, ao);
    an.DistillCycle(later);
    ::_exit(0);
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  ASSERT_TRUE(WIFEXITED(status));
  ASSERT_EQ(WEXITSTATUS(status), 42);

  tsdb::Tsdb* db;
  metastore::Metastore* meta;
  open([later] { return later; }, db, meta);
  std::unique_ptr<tsdb::Tsdb> db_owner(db);
  std::unique_ptr<metastore::Metastore> meta_owner(meta);
  // Nothing was cleared by the dead process.
  for (const auto& [key, values] : written) {
    EXPECT_EQ(db->RawPoints(key, 0, later).size(), values.size());
  }
  Analytics an(*db, meta);
  auto report = an.DistillCycle(later);
  EXPECT_GT(report.raw_cleared, 0u);
  EXPECT_EQ(an.DistillCycle(later), CycleReport{});
  const TimestampMs cut = tsdb::AlignDown(later - tsdb::kDay, tsdb::kMinute);
  for (const auto& [key, values] : written) {
    auto raw = db->RawPoints(key, 0, later);
    ASSERT_FALSE(raw.empty());
    EXPECT_GE(raw.front().t, cut);
    double expect_sum = 0;
    for (double v : values) expect_sum += v;
    // Every point is in the minute rollups, and raw above the cut plus
    // rollups below it count each point exactly once.
    std::uint64_t rolled = 0, count = raw.size();
    double rolled_sum = 0, sum = 0;
    for (const auto& p : raw) sum += p.v;
    for (const auto& r : db->Rollups(key, tsdb::Tier::k1m, 0, later)) {
      rolled += r.count;
      rolled_sum += r.sum;
      if (r.window_start < cut) {
        count += r.count;
        sum += r.sum;
      }
    }
    EXPECT_EQ(rolled, values.size()) << key.ToString();
    EXPECT_EQ(rolled_sum, expect_sum) << key.ToString();
    EXPECT_EQ(count, values.size()) << key.ToString();
    EXPECT_EQ(sum, expect_sum) << key.ToString();
  }
}

}  // namespace
}  // namespace obs::analytics
