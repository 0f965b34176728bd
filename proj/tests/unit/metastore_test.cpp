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

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "obs/core/error.hpp"
#include "obs/metastore/metastore.hpp"
#include "temp_dir.hpp"

namespace obs::metastore {
namespace {

using obs::testing::TempDir;

struct FakeClock {
  TimestampMs now = 1'000;
  Clock fn() {
    return [this] { return now; };
  }
};

MetastoreOptions InMemory(FakeClock& clock) {
  MetastoreOptions o;
  o.clock = clock.fn();
  return o;
}

SummaryRecord Summary(const std::string& selector, TimestampMs start, TimestampMs end,
                      std::vector<double> values) {
  double sum = 0, sum_sq = 0, lo = values[0], hi = values[0];
  for (double v : values) {
    sum += v;
    sum_sq += v * v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  SummaryRecord s;
  s.selector = selector;
  s.window_start = start;
  s.window_end = end;
  s.stats = MakeStats(values.size(), sum, lo, hi, sum_sq);
  s.produced_at = end;
  return s;
}

EventRecord Event(const std::string& kind, LabelMap attrs, TimestampMs ts) {
  EventRecord e;
  e.kind = kind;
  e.attributes = std::move(attrs);
  e.value = 1;
  e.timestamp = ts;
  return e;
}

TEST(Entities, InsertSetsBothTimestamps) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  db.UpsertEntity({"n1", "host", {{"rack", "a"}}, 0, 0});
  auto got = db.GetEntity("host", "n1");
  ASSERT_TRUE(got);
  EXPECT_EQ(got->created_at, 1'000);
  EXPECT_EQ(got->created_at, got->updated_at);
}

TEST(Entities, OverwriteReplacesAttributesAndAdvancesUpdatedAt) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  db.UpsertEntity({"n1", "host", {{"rack", "a"}}, 0, 0});
  clock.now = 5'000;
  db.UpsertEntity({"n1", "host", {{"zone", "z"}}, 0, 0});
  auto got = db.GetEntity("host", "n1");
  ASSERT_TRUE(got);
  EXPECT_EQ(got->attributes, (std::map<std::string, std::string>{{"zone", "z"}}));
  EXPECT_EQ(got->created_at, 1'000);
  EXPECT_EQ(got->updated_at, 5'000);
}

TEST(Entities, IdsAreUniquePerKind) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  db.UpsertEntity({"x", "host", {}, 0, 0});
  db.UpsertEntity({"x", "user", {}, 0, 0});
  EXPECT_EQ(db.ListEntities(std::nullopt).size(), 2u);
  EXPECT_EQ(db.ListEntities(std::string("user")).size(), 1u);
  EXPECT_TRUE(db.DeleteEntity("user", "x"));
  EXPECT_FALSE(db.GetEntity("user", "x"));
  EXPECT_TRUE(db.GetEntity("host", "x"));
}

TEST(Entities, EmptyIdRejected) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  try {
    db.UpsertEntity({"", "host", {}, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST(Entities, RecordLimitGivesStorageFull) {
  FakeClock clock;
  auto opts = InMemory(clock);
  opts.max_records = 2;
  Metastore db(opts);
  db.UpsertEntity({"a", "host", {}, 0, 0});
  db.UpsertEntity({"b", "host", {}, 0, 0});
  db.UpsertEntity({"b", "host", {{"k", "v"}}, 0, 0});  // overwrite still allowed
  try {
    db.UpsertEntity({"c", "host", {}, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStorageFull);
  }
}

TEST(Summaries, ValidSummaryRoundTrips) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  auto s = Summary(R"(cpu{host="n1"})", 0, 60'000, {1, 2, 3, 4});
  s.summary_id = db.StoreSummary(s);
  auto got = db.QuerySummaries(Selector::Parse(R"(cpu{host="n1"})"), 0, 60'000);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], s);
  EXPECT_DOUBLE_EQ(got[0].stats.mean, 2.5);
  EXPECT_DOUBLE_EQ(got[0].stats.stddev, std::sqrt(1.25));
}

TEST(Summaries, NegativeVarianceRejected) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  auto s = Summary("cpu{}", 0, 60'000, {1, 2, 3});
  s.stats.sum_sq = 1.0;  // sum_sq/count - mean^2 = 1/3 - 4 < 0
  try {
    db.StoreSummary(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInconsistentStats);
  }
  s = Summary("cpu{}", 0, 60'000, {1, 2, 3});
  s.stats.mean = 2.5;
  EXPECT_THROW(db.StoreSummary(s), Error);
}

TEST(Summaries, OverlappingWindowsBothKept) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  db.StoreSummary(Summary("cpu{}", 0, 60'000, {1}));
  db.StoreSummary(Summary("cpu{}", 30'000, 90'000, {2}));
  EXPECT_EQ(db.QuerySummaries(Selector::Parse("cpu"), 0, 100'000).size(), 2u);
  // Window overlap filter is half-open.
  EXPECT_EQ(db.QuerySummaries(Selector::Parse("cpu"), 60'000, 100'000).size(), 1u);
  EXPECT_EQ(db.QuerySummaries(Selector::Parse("mem"), 0, 100'000).size(), 0u);
}

TEST(Summaries, SelectorMatchesStoredLabels) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  db.StoreSummary(Summary(R"(cpu{host="n1",user="u1"})", 0, 60'000, {1}));
  db.StoreSummary(Summary(R"(cpu{host="n2",user="u2"})", 0, 60'000, {2}));
  auto got = db.QuerySummaries(Selector::Parse(R"(cpu{user="u2"})"), 0, 60'000);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].stats.sum, 2);
  EXPECT_EQ(db.QuerySummaries(Selector::Parse(R"({host!="n1"})"), 0, 60'000).size(), 1u);
}

// Property: any stats built from real data pass the consistency check, and
// every record read back satisfies it.
TEST(Summaries, ConsistencyHoldsForGeneratedData) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> val(-1e3, 1e3);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> v(1 + rng() % 200);
    for (auto& x : v) x = val(rng);
    if (i % 5 == 0) std::fill(v.begin(), v.end(), v[0]);  // zero variance edge
    db.StoreSummary(Summary("m{}", i * 60'000, (i + 1) * 60'000, v));
  }
  for (const auto& s : db.QuerySummaries(Selector::Parse("m"), 0, 1'000 * 60'000)) {
    EXPECT_NO_THROW(ValidateStats(s.stats));
    EXPECT_GE(s.stats.stddev, 0);
  }
}

TEST(Summaries, CorruptRecordSkippedOnRead) {
  TempDir dir;
  auto path = dir.path() / "meta.log";
  {
    MetastoreOptions o;
    o.file = path;
    Metastore db(o);
    db.StoreSummary(Summary("cpu{}", 0, 60'000, {1, 2}));
  }
  {
    std::ofstream out(path, std::ios::app);
    out << R"({"op":"put","t":"summaries","k":"bad","v":{"summary_id":"bad","selector":"cpu{}",)"
        << R"("window_start":0,"window_end":60000,"produced_at":0,"stats":{"count":2,"sum":3,)"
        << R"("min":1,"max":2,"mean":1.5,"stddev":0.5,"sum_sq":1}}})" << "\n";
  }
  MetastoreOptions o;
  o.file = path;
  Metastore db(o);
  EXPECT_EQ(db.QuerySummaries(Selector::Parse("cpu"), 0, 60'000).size(), 1u);
  EXPECT_EQ(db.metrics().Get("metastore_corrupt_records_total"), 1);
}

TEST(Events, EmptyStoreGivesNothing) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  EXPECT_TRUE(db.QueryEvents(Selector::Parse("harvest_logged"), 0, 10).empty());
}

TEST(Events, FilterAndTimeSort) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  db.StoreEvent(Event("harvest_logged", {{"plot", "p1"}}, 300));
  db.StoreEvent(Event("harvest_logged", {{"plot", "p2"}}, 200));
  db.StoreEvent(Event("harvest_logged", {{"plot", "p1"}}, 100));
  db.StoreEvent(Event("irrigation", {{"plot", "p1"}}, 150));
  auto got = db.QueryEvents(Selector::Parse(R"(harvest_logged{plot="p1"})"), 0, 1'000);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].timestamp, 100);
  EXPECT_EQ(got[1].timestamp, 300);
  EXPECT_EQ(db.QueryEvents(Selector::Parse(R"({plot="p1"})"), 0, 1'000).size(), 3u);
  EXPECT_EQ(db.QueryEvents(Selector::Parse("harvest_logged"), 100, 300).size(), 2u);
}

TEST(Events, InvalidWindow) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  try {
    db.QueryEvents(Selector{}, 10, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidRange);
  }
}

TEST(Persistence, ReplayRestoresAllTables) {
  TempDir dir;
  MetastoreOptions o;
  o.file = dir.path() / "meta.log";
  std::string ev;
  {
    Metastore db(o);
    db.UpsertEntity({"n1", "host", {{"rack", "a"}}, 0, 0});
    db.UpsertEntity({"n2", "host", {}, 0, 0});
    db.DeleteEntity("host", "n2");
    ev = db.StoreEvent(Event("deploy", {}, 5));
    db.PutDocument("rules", "r1", {{"rule_id", "r1"}});
  }
  Metastore db(o);
  EXPECT_TRUE(db.GetEntity("host", "n1"));
  EXPECT_FALSE(db.GetEntity("host", "n2"));
  EXPECT_EQ(db.GetDocument("rules", "r1")->at("rule_id"), "r1");
  // Fresh ids continue after the replayed ones.
  EXPECT_NE(db.StoreEvent(Event("deploy", {}, 6)), ev);
  EXPECT_EQ(db.QueryEvents(Selector::Parse("deploy"), 0, 10).size(), 2u);
}

TEST(Persistence, TornTailIsIgnored) {
  TempDir dir;
  MetastoreOptions o;
  o.file = dir.path() / "meta.log";
  {
    Metastore db(o);
    db.PutDocument("t", "a", 1);
  }
  {
    std::ofstream out(o.file, std::ios::app);
    out << R"({"op":"put","t":"t","k":"b")";
  }
  Metastore db(o);
  EXPECT_EQ(db.ListDocuments("t").size(), 1u);
}

TEST(Persistence, CompactionKeepsLiveSetAndShrinksLog) {
  TempDir dir;
  MetastoreOptions o;
  o.file = dir.path() / "meta.log";
  o.compact_min_bytes = 1u << 30;
  {
    Metastore db(o);
    for (int i = 0; i < 200; ++i) db.PutDocument("t", "k", i);
    db.PutDocument("t", "other", "x");
    auto before = std::filesystem::file_size(o.file);
    db.Compact();
    EXPECT_LT(std::filesystem::file_size(o.file), before / 10);
    db.PutDocument("t", "after", true);
  }
  Metastore db(o);
  EXPECT_EQ(db.GetDocument("t", "k"), nlohmann::json(199));
  EXPECT_EQ(db.ListDocuments("t").size(), 3u);
}

TEST(Persistence, AutomaticCompaction) {
  TempDir dir;
  MetastoreOptions o;
  o.file = dir.path() / "meta.log";
  o.compact_min_bytes = 4096;
  Metastore db(o);
  for (int i = 0; i < 2'000; ++i) db.PutDocument("t", "k", i);
  EXPECT_GT(db.metrics().Get("metastore_compactions_total"), 0);
  EXPECT_LT(std::filesystem::file_size(o.file), 20'000u);
}

TEST(Concurrency, ParallelWritersAndReaders) {
  FakeClock clock;
  Metastore db(InMemory(clock));
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&db, t] {
      for (int i = 0; i < 250; ++i) {
        db.StoreEvent(Event("e", {{"w", std::to_string(t)}}, i));
        db.QueryEvents(Selector::Parse("e"), 0, 1'000);
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(db.QueryEvents(Selector::Parse("e"), 0, 1'000).size(), 1'000u);
}

}  // namespace
}  // namespace obs::metastore
