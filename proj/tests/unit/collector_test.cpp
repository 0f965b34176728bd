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

#include <atomic>
#include <random>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "obs/collector/collector.hpp"
#include "obs/core/error.hpp"
#include "obs/core/exposition.hpp"

namespace obs::collector {
namespace {

const PowerModel kModel{50, 150, 1};

TEST(EstimatePower, Endpoints) {
  EXPECT_EQ(EstimatePower(0.0, kModel), 50);
  EXPECT_EQ(EstimatePower(1.0, kModel), 150);
  EXPECT_EQ(EstimatePower(0.5, kModel), 100);
  EXPECT_EQ(EstimatePower(1.0, PowerModel{12.5, 97.25, 2.7}), 97.25);
}

TEST(EstimatePower, OutOfRange) {
  for (double u : {-0.01, 1.01, std::nan("")}) {
    try {
      EstimatePower(u, kModel);
      FAIL() << u;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kOutOfRange);
    }
  }
}

// Property: bounded by [p_idle, p_max] and non-decreasing in utilization.
TEST(EstimatePower, BoundedAndMonotone) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int m = 0; m < 200; ++m) {
    PowerModel model;
    model.p_idle = unit(rng) * 100;
    model.p_max = model.p_idle + unit(rng) * 300;
    model.exponent = 0.1 + unit(rng) * 4;
    std::vector<double> us(100);
    for (auto& u : us) u = unit(rng);
    us.push_back(0);
    us.push_back(1);
    std::sort(us.begin(), us.end());
    double prev = -1;
    for (double u : us) {
      double p = EstimatePower(u, model);
      EXPECT_GE(p, model.p_idle);
      EXPECT_LE(p, model.p_max);
      EXPECT_GE(p, prev);
      prev = p;
    }
  }
}

TEST(PowerModel, Validation) {
  EXPECT_THROW((PowerModel{100, 50, 1}.Validate()), Error);
  EXPECT_THROW((PowerModel{-1, 50, 1}.Validate()), Error);
  EXPECT_THROW((PowerModel{0, 50, 0}.Validate()), Error);
  EXPECT_NO_THROW((PowerModel{50, 50, 1}.Validate()));
}

TEST(IntegrateEnergy, Examples) {
  std::vector<PowerPoint> constant = {{0, 100}, {60'000, 100}};
  EXPECT_EQ(IntegrateEnergy(constant), 6000);
  std::vector<PowerPoint> zero = {{0, 0}, {1000, 0}};
  EXPECT_EQ(IntegrateEnergy(zero), 0);
  std::vector<PowerPoint> ramp = {{0, 50}, {1000, 150}};
  EXPECT_EQ(IntegrateEnergy(ramp), 100);
}

TEST(IntegrateEnergy, Errors) {
  std::vector<PowerPoint> one = {{0, 1}};
  try {
    IntegrateEnergy(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientPoints);
  }
  std::vector<PowerPoint> back = {{0, 1}, {10, 1}, {10, 1}};
  try {
    IntegrateEnergy(back);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonMonotonicTime);
  }
}

double RelErr(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Closed forms: constant P over T gives P*T, linear a + b*t gives
// a*T + b*T^2/2 (trapezoids are exact on straight lines).
TEST(IntegrateEnergy, MatchesClosedForm) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int iter = 0; iter < 500; ++iter) {
    double a = unit(rng) * 300, b = (unit(rng) - 0.5) * 0.01;
    int n = 2 + static_cast<int>(rng() % 500);
    std::vector<PowerPoint> constant, linear;
    TimestampMs t = 0;
    for (int i = 0; i < n; ++i) {
      constant.push_back({t, a});
      linear.push_back({t, a + b * static_cast<double>(t)});
      t += 1 + static_cast<TimestampMs>(rng() % 10'000);
    }
    double seconds = static_cast<double>(constant.back().t) / 1000.0;
    double end_ms = static_cast<double>(linear.back().t);
    EXPECT_LE(RelErr(IntegrateEnergy(constant), a * seconds), 1e-9);
    double closed = (a * end_ms + b * end_ms * end_ms / 2) / 1000.0;
    EXPECT_LE(RelErr(IntegrateEnergy(linear), closed), 1e-9);
  }
}

TEST(IntegrateEnergy, Additive) {
  std::mt19937_64 rng(10);
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<PowerPoint> pts;
    TimestampMs t = static_cast<TimestampMs>(rng() % 1000);
    int n = 3 + static_cast<int>(rng() % 100);
    for (int i = 0; i < n; ++i) {
      pts.push_back({t, std::uniform_real_distribution<double>(0, 500)(rng)});
      t += 1 + static_cast<TimestampMs>(rng() % 5000);
    }
    std::size_t mid = 1 + rng() % (pts.size() - 2);
    std::span<const PowerPoint> all(pts);
    double left = IntegrateEnergy(all.subspan(0, mid + 1));
    double right = IntegrateEnergy(all.subspan(mid));
    EXPECT_LE(RelErr(left + right, IntegrateEnergy(all)), 1e-9);
  }
}

const char* kReplay =
    "# ts cpu mem_used mem_total proc_cpu cores\n"
    "1700000000000 0.42 1e9 4e9 10.0\n"
    "error\n"
    "1700000005000 0.84 1e9 4e9 9.0 2\n";

CollectorOptions Opts() {
  CollectorOptions o;
  o.host = "n1";
  o.power = kModel;
  return o;
}

const MetricSample* Find(const std::vector<MetricSample>& batch, const std::string& name) {
  for (const auto& s : batch) {
    if (s.key.name() == name) return &s;
  }
  return nullptr;
}

TEST(Collector, SnapshotMapsToSamplesSharingOneTimestamp) {
  auto provider = ReplayProvider::FromText(kReplay);
  Collector c(provider, Opts());
  auto batch = c.SampleResources();
  ASSERT_TRUE(Find(batch, "cpu_utilization"));
  EXPECT_EQ(Find(batch, "cpu_utilization")->value, 0.42);
  EXPECT_EQ(Find(batch, "memory_used_bytes")->value, 1e9);
  EXPECT_EQ(Find(batch, "process_cpu_seconds")->kind, MetricKind::kCounter);
  ASSERT_TRUE(Find(batch, "collector_cpu_seconds"));
  ASSERT_TRUE(Find(batch, "collector_samples_total"));
  for (const auto& s : batch) {
    EXPECT_EQ(s.timestamp, 1'700'000'000'000);
    EXPECT_EQ(s.key.label("host"), "n1");
    EXPECT_EQ(s.key.label("collector"), "self");
  }
}

TEST(Collector, ProviderErrorSkipsTickOnly) {
  auto provider = ReplayProvider::FromText(kReplay);
  Collector c(provider, Opts());
  EXPECT_FALSE(c.Tick().empty());
  auto published = c.LatestExposition();
  EXPECT_TRUE(c.Tick().empty());
  EXPECT_EQ(c.metrics().Get("collector_source_errors_total"), 1);
  EXPECT_EQ(c.LatestExposition(), published);
  auto third = c.Tick();
  ASSERT_FALSE(third.empty());
  // Counter decrease is passed through untouched.
  EXPECT_EQ(Find(third, "process_cpu_seconds")->value, 9.0);
}

TEST(Collector, EnergyAccumulatesAcrossTicksWithCoreNormalization) {
  auto provider = ReplayProvider::FromText(kReplay);
  Collector c(provider, Opts());
  auto first = c.Tick();
  EXPECT_EQ(Find(first, "estimated_power_watts")->value, 50 + 100 * 0.42);
  EXPECT_EQ(Find(first, "estimated_energy_joules")->value, 0);
  c.Tick();
  auto third = c.Tick();
  // 0.84 over 2 cores is 0.42 again, so the 5 s between them run at 92 W.
  EXPECT_DOUBLE_EQ(Find(third, "estimated_power_watts")->value, 92);
  EXPECT_DOUBLE_EQ(Find(third, "estimated_energy_joules")->value, 92 * 5.0);
}

TEST(Collector, EverySuccessfulBatchCarriesSelfMetering) {
  std::string text;
  for (int i = 0; i < 50; ++i) {
    text += std::to_string(1'700'000'000'000 + i * 1000) + " " + (i % 7 == 0 ? "3.5" : "0.3") +
            " 1 2 " + std::to_string(i) + "\n";
  }
  auto provider = ReplayProvider::FromText(text);
  Collector c(provider, Opts());
  double prev_total = 0;
  while (!provider.exhausted()) {
    auto batch = c.Tick();
    ASSERT_TRUE(Find(batch, "collector_cpu_seconds"));
    auto total = Find(batch, "collector_samples_total");
    ASSERT_TRUE(total);
    EXPECT_GT(total->value, prev_total);
    prev_total = total->value;
  }
  // cpu 3.5 on one core cannot be turned into a power estimate.
  EXPECT_EQ(c.metrics().Get("collector_power_errors_total"), 8);
}

TEST(Collector, PushBacksOffThenDrops) {
  auto provider = ReplayProvider::FromText(kReplay);
  Collector c(provider, Opts());
  auto batch = c.Tick();
  std::vector<std::chrono::milliseconds> slept;
  int calls = 0;
  bool ok = c.Push(
      batch, [&](const std::string&) { return ++calls > 10; },
      [&](std::chrono::milliseconds d) { slept.push_back(d); });
  EXPECT_FALSE(ok);
  EXPECT_EQ(calls, 4);
  EXPECT_EQ(slept, (std::vector<std::chrono::milliseconds>{std::chrono::seconds(1),
                                                            std::chrono::seconds(2),
                                                            std::chrono::seconds(4)}));
  EXPECT_EQ(c.metrics().Get("collector_dropped_total"), static_cast<double>(batch.size()));

  calls = 0;
  slept.clear();
  EXPECT_TRUE(c.Push(
      batch, [&](const std::string&) { return ++calls == 2; },
      [&](std::chrono::milliseconds d) { slept.push_back(d); }));
  EXPECT_EQ(slept.size(), 1u);
}

TEST(Collector, PushBodyIsExposition) {
  auto provider = ReplayProvider::FromText(kReplay);
  Collector c(provider, Opts());
  auto batch = c.Tick();
  std::string body;
  c.Push(batch, [&](const std::string& b) {
    body = b;
    return true;
  });
  EXPECT_EQ(body, *c.LatestExposition());
  EXPECT_EQ(*ParseExpositionLine(body.substr(0, body.find('\n'))), batch[0]);
}

TEST(PullServer, ServesOnlyCompleteBatchesUnderConcurrentPublish) {
  std::string text;
  for (int i = 0; i < 400; ++i) {
    text += std::to_string(1'700'000'000'000 + i * 1000) + " 0.5 1 2 " + std::to_string(i) + "\n";
  }
  auto provider = ReplayProvider::FromText(text);
  Collector c(provider, Opts());
  c.Tick();
  PullServer server(c);
  int port = server.Start("127.0.0.1", 0);
  std::atomic<bool> done{false};
  std::thread publisher([&] {
    while (!provider.exhausted()) c.Tick();
    done = true;
  });
  httplib::Client client("127.0.0.1", port);
  int reads = 0;
  while (!done || reads < 5) {
    auto res = client.Get("/metrics");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);
    std::size_t lines = 0;
    TimestampMs ts = -1;
    std::size_t pos = 0;
    while (pos < res->body.size()) {
      auto nl = res->body.find('\n', pos);
      ASSERT_NE(nl, std::string::npos);
      auto s = ParseExpositionLine(std::string_view(res->body).substr(pos, nl - pos));
      if (ts < 0) ts = s->timestamp;
      EXPECT_EQ(s->timestamp, ts);
      pos = nl + 1;
      ++lines;
    }
    EXPECT_EQ(lines, 7u);
    ++reads;
  }
  publisher.join();
  server.Stop();
}

TEST(ProcProvider, ReadsThisMachine) {
  ProcProvider p;
  auto s = p.Read();
  EXPECT_GE(s.cpu_utilization, 0);
  EXPECT_LE(s.cpu_utilization, s.cores + 1e-9);
  EXPECT_GT(s.memory_total, 0);
  EXPECT_LE(s.memory_used, s.memory_total);
  EXPECT_GE(s.process_cpu_seconds, 0);
}

TEST(CollectorOptions, FromConfig) {
  auto cfg = ConfigFile::ParseText(
      "[collector]\ninterval_seconds = 10\npower_model.p_idle_watts = 20\n"
      "power_model.p_max_watts = 80\npower_model.exponent = 2\npush_url = http://gw/api/v1/ingest\n");
  auto o = CollectorOptions::FromConfig(cfg);
  EXPECT_EQ(o.interval_seconds, 10);
  EXPECT_EQ(o.power.p_idle, 20);
  EXPECT_EQ(o.power.exponent, 2);
  cfg.Set("collector.interval_seconds", "301");
  EXPECT_THROW(CollectorOptions::FromConfig(cfg), Error);
  cfg.Set("collector.interval_seconds", "5");
  cfg.Set("collector.power_model.p_max_watts", "10");
  EXPECT_THROW(CollectorOptions::FromConfig(cfg), Error);
}

}  // namespace
}  // namespace obs::collector
