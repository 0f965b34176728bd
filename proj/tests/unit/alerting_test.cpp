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

#include <random>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "obs/alerting/alerting.hpp"
#include "obs/analytics/analytics.hpp"
#include "obs/core/error.hpp"
#include "obs/metastore/metastore.hpp"
#include "obs/tsdb/tsdb.hpp"

namespace obs::alerting {
namespace {

constexpr TimestampMs kT0 = 1'700'000'000'000 - 1'700'000'000'000 % tsdb::kHour;

TEST(Fingerprint, FnvReferenceVectors) {
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(Fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Fingerprint, ByteLayout) {
  auto key = SeriesKey::Canonicalize("m", LabelMap{{"zone", "b"}, {"host", "n1"}});
  std::string bytes("r1\0host=n1\0zone=b\0", 18);
  EXPECT_EQ(Fingerprint("r1", key.labels()), Fnv1a64(bytes));
  EXPECT_EQ(FingerprintHex(0xabcULL), "0000000000000abc");
  EXPECT_EQ(Fingerprint("r1", {}), Fnv1a64(std::string("r1\0", 3)));
}

TEST(Fingerprint, OrderIndependentAndDeterministic) {
  std::vector<Label> forward = {{"a", "1"}, {"b", "2"}, {"c", "3"}};
  std::vector<Label> backward(forward.rbegin(), forward.rend());
  auto k1 = SeriesKey::Canonicalize("m", forward);
  auto k2 = SeriesKey::Canonicalize("m", backward);
  EXPECT_EQ(Fingerprint("r", k1.labels()), Fingerprint("r", k2.labels()));
  EXPECT_EQ(Fingerprint("r", k1.labels()), Fingerprint("r", k1.labels()));
}

TEST(Fingerprint, NoCollisionsOverRandomRules) {
  std::mt19937_64 rng(17);
  std::set<std::uint64_t> seen;
  std::set<std::string> ids;
  auto key = SeriesKey::Canonicalize("m", LabelMap{{"host", "n1"}});
  while (ids.size() < 100'000) {
    std::string id = "rule_" + std::to_string(rng());
    if (ids.insert(id).second) seen.insert(Fingerprint(id, key.labels()));
  }
  EXPECT_EQ(seen.size(), 100'000u);
}

TEST(Notification, BodyKeysAndTypes) {
  Notification n{0x1234ULL, "cpu_high", AlertState::kFiring, 0.93,
                 {{"host", "n1"}, {"severity", "page"}}, kT0, kT0};
  EXPECT_EQ(n.Body(),
            R"({"fingerprint":"0000000000001234","rule_id":"cpu_high","state":"firing",)"
            R"("value":0.93,"labels":{"host":"n1","severity":"page"},"timestamp_ms":)" +
                std::to_string(kT0) + "}");
}

TEST(AlertRule, JsonRoundTripAndValidation) {
  AlertRule r;
  r.rule_id = "r1";
  r.selector = Selector::Parse(R"(cpu{host="n1"})");
  r.agg = tsdb::AggSpec::Parse("quantile(0.9)");
  r.comparator = Comparator::kLessEqual;
  r.threshold = 0.25;
  r.for_duration = 60'000;
  r.labels = {{"severity", "page"}};
  r.webhook_url = "http://127.0.0.1:9/hook";
  auto back = AlertRule::FromJson(r.ToJson());
  EXPECT_EQ(back.ToJson(), r.ToJson());
  auto j = r.ToJson();
  j["eval_interval_ms"] = 999;
  EXPECT_THROW(AlertRule::FromJson(j), Error);
  j = r.ToJson();
  j["for_duration_ms"] = -1;
  EXPECT_THROW(AlertRule::FromJson(j), Error);
  j = r.ToJson();
  j["comparator"] = "!=";
  EXPECT_THROW(AlertRule::FromJson(j), Error);
}

class AlertTest : public ::testing::Test {
 protected:
  AlertTest() {
    tsdb::TsdbOptions o;
    o.clock = [this] { return now_; };
    db_ = std::make_unique<tsdb::Tsdb>(o);
  }

  AlertingOptions Sync() {
    AlertingOptions o;
    o.synchronous_delivery = true;
    o.post = [this](const std::string& url, const std::string& body) {
      posts_.push_back({url, body});
      return receiver_up_;
    };
    o.sleep = [this](std::chrono::milliseconds d) { slept_.push_back(d); };
    return o;
  }

  void Put(TimestampMs t, double v, const std::string& host = "n1") {
    MetricSample s;
    s.key = SeriesKey::Canonicalize("cpu", LabelMap{{"host", host}});
    s.value = v;
    s.timestamp = t;
    s.unit = Unit{CanonicalUnit::kRatio, "ratio"};
    db_->Append(s);
  }

  AlertRule Rule(TimestampMs for_duration) {
    AlertRule r;
    r.rule_id = "cpu_high";
    r.selector = Selector::Parse("cpu");
    r.agg = tsdb::AggSpec::Parse("max");
    r.comparator = Comparator::kGreater;
    r.threshold = 0.9;
    r.for_duration = for_duration;
    r.webhook_url = "http://hook/alerts";
    return r;
  }

  std::vector<std::pair<AlertState, AlertState>> Path(const std::vector<Transition>& ts) {
    std::vector<std::pair<AlertState, AlertState>> out;
    for (const auto& t : ts) out.emplace_back(t.from, t.to);
    return out;
  }

  TimestampMs now_ = kT0 + tsdb::kHour;
  std::unique_ptr<tsdb::Tsdb> db_;
  std::vector<std::pair<std::string, std::string>> posts_;
  std::vector<std::chrono::milliseconds> slept_;
  bool receiver_up_ = true;
};

using S = AlertState;

TEST_F(AlertTest, PendingThenFiringThenResolved) {
  AlertManager am(*db_, nullptr, nullptr, Sync());
  am.PutRule(Rule(60'000));
  TimestampMs t = now_;
  Put(t - 1000, 0.95);
  EXPECT_EQ(Path(am.EvaluateRule("cpu_high", t)),
            (std::vector<std::pair<S, S>>{{S::kInactive, S::kPending}}));
  for (int i = 1; i < 4; ++i) {
    Put(t + i * 15'000 - 1000, 0.95);
    EXPECT_TRUE(am.EvaluateRule("cpu_high", t + i * 15'000).empty());
  }
  Put(t + 60'000 - 1000, 0.97);
  auto fired = am.EvaluateRule("cpu_high", t + 60'000);
  EXPECT_EQ(Path(fired), (std::vector<std::pair<S, S>>{{S::kPending, S::kFiring}}));
  EXPECT_EQ(fired[0].value, 0.97);
  Put(t + 75'000 - 1000, 0.2);
  EXPECT_EQ(Path(am.EvaluateRule("cpu_high", t + 75'000)),
            (std::vector<std::pair<S, S>>{{S::kFiring, S::kResolved}}));
  Put(t + 90'000 - 1000, 0.95);
  EXPECT_EQ(Path(am.EvaluateRule("cpu_high", t + 90'000)),
            (std::vector<std::pair<S, S>>{{S::kResolved, S::kInactive}}));
  ASSERT_EQ(posts_.size(), 2u);
  EXPECT_NE(posts_[0].second.find(R"("state":"firing")"), std::string::npos);
  EXPECT_NE(posts_[1].second.find(R"("state":"resolved")"), std::string::npos);
}

TEST_F(AlertTest, PendingClearsBeforeForDuration) {
  AlertManager am(*db_, nullptr, nullptr, Sync());
  am.PutRule(Rule(60'000));
  Put(now_ - 1000, 0.95);
  am.EvaluateRule("cpu_high", now_);
  Put(now_ + 14'000, 0.1);
  EXPECT_EQ(Path(am.EvaluateRule("cpu_high", now_ + 15'000)),
            (std::vector<std::pair<S, S>>{{S::kPending, S::kInactive}}));
  EXPECT_TRUE(posts_.empty());
}

TEST_F(AlertTest, ZeroForDurationFiresOnFirstTrueEvaluation) {
  AlertManager am(*db_, nullptr, nullptr, Sync());
  am.PutRule(Rule(0));
  Put(now_ - 1000, 0.95);
  EXPECT_EQ(Path(am.EvaluateRule("cpu_high", now_)),
            (std::vector<std::pair<S, S>>{{S::kInactive, S::kPending}, {S::kPending, S::kFiring}}));
  EXPECT_EQ(posts_.size(), 1u);
}

TEST_F(AlertTest, SeriesWithoutDataEvaluatesFalse) {
  AlertManager am(*db_, nullptr, nullptr, Sync());
  am.PutRule(Rule(0));
  Put(now_ - 1000, 0.95);
  am.EvaluateRule("cpu_high", now_);
  EXPECT_EQ(Path(am.EvaluateRule("cpu_high", now_ + 15'000)),
            (std::vector<std::pair<S, S>>{{S::kFiring, S::kResolved}}));
}

TEST_F(AlertTest, InstancesPerSeriesAndRuleLabelsInNotification) {
  AlertManager am(*db_, nullptr, nullptr, Sync());
  auto rule = Rule(0);
  rule.labels = {{"severity", "page"}, {"host", "ignored"}};
  am.PutRule(rule);
  Put(now_ - 1000, 0.95, "n1");
  Put(now_ - 1000, 0.5, "n2");
  Put(now_ - 1000, 0.99, "n3");
  am.EvaluateRule("cpu_high", now_);
  auto instances = am.Instances();
  ASSERT_EQ(instances.size(), 2u);
  ASSERT_EQ(posts_.size(), 2u);
  auto body = nlohmann::json::parse(posts_[0].second);
  EXPECT_EQ(body["labels"]["severity"], "page");
  EXPECT_NE(body["labels"]["host"], "ignored");
}

TEST_F(AlertTest, QueryFailureFreezesState) {
  // Raw data that has been distilled and cleared leaves only rollups, which
  // cannot answer a quantile.
  for (int i = 0; i < 60; ++i) Put(kT0 + i * 10'000, 0.95);
  db_->Distill(SeriesKey::Canonicalize("cpu", LabelMap{{"host", "n1"}}), kT0 + tsdb::kHour);
  AlertManager am(*db_, nullptr, nullptr, Sync());
  auto rule = Rule(0);
  rule.agg = tsdb::AggSpec::Parse("quantile(0.5)");
  am.PutRule(rule);
  TimestampMs eval_at = kT0 + 5 * 60'000;
  am.EvaluateRule("cpu_high", eval_at);
  ASSERT_EQ(am.Instances().size(), 1u);
  EXPECT_EQ(am.Instances()[0].state, S::kFiring);

  now_ = kT0 + tsdb::kDay + 2 * tsdb::kHour;
  db_->EnforceRetention(now_);
  try {
    am.EvaluateRule("cpu_high", eval_at + 15'000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kQueryFailed);
  }
  EXPECT_EQ(am.metrics().Get("alert_eval_errors_total"), 1);
  EXPECT_EQ(am.Instances()[0].state, S::kFiring);
}

TEST_F(AlertTest, DeliveryDedupAndRetry) {
  AlertManager am(*db_, nullptr, nullptr, Sync());
  Notification n{42, "r", S::kFiring, 1, {}, now_, now_};
  EXPECT_EQ(am.Deliver(n, "http://hook"), DeliveryResult::kDelivered);
  EXPECT_EQ(am.Deliver(n, "http://hook"), DeliveryResult::kSuppressed);
  EXPECT_EQ(posts_.size(), 1u);
  // Same fingerprint, other state or episode: separate entries.
  n.state = S::kResolved;
  EXPECT_EQ(am.Deliver(n, "http://hook"), DeliveryResult::kDelivered);
  n.state = S::kFiring;
  n.episode_start += 1;
  EXPECT_EQ(am.Deliver(n, "http://hook"), DeliveryResult::kDelivered);

  receiver_up_ = false;
  posts_.clear();
  n.episode_start += 1;
  EXPECT_EQ(am.Deliver(n, "http://hook"), DeliveryResult::kDropped);
  EXPECT_EQ(posts_.size(), 3u);
  EXPECT_EQ(slept_, (std::vector<std::chrono::milliseconds>{std::chrono::seconds(1),
                                                             std::chrono::seconds(2)}));
  EXPECT_EQ(am.metrics().Get("alert_notifications_dropped_total"), 1);
  n.state = S::kPending;
  EXPECT_THROW(am.Deliver(n, "http://hook"), Error);
}

TEST_F(AlertTest, ConcurrentDuplicateDeliveriesSendOnce) {
  AlertingOptions o = Sync();
  std::atomic<int> sent{0};
  o.post = [&sent](const std::string&, const std::string&) {
    ++sent;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    return true;
  };
  AlertManager am(*db_, nullptr, nullptr, o);
  Notification n{7, "r", S::kFiring, 1, {}, now_, now_};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { am.Deliver(n, "http://hook"); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(sent.load(), 1);
}

// Reference model of the lifecycle, written out independently of the
// manager: returns the state after one evaluation and the transitions taken.
std::vector<std::pair<S, S>> ModelStep(S& state, TimestampMs& since, bool holds, TimestampMs now,
                                       TimestampMs for_duration) {
  std::vector<std::pair<S, S>> out;
  auto go = [&](S to) {
    out.emplace_back(state, to);
    state = to;
    since = now;
  };
  if (state == S::kInactive && holds) {
    go(S::kPending);
    if (for_duration == 0) go(S::kFiring);
  } else if (state == S::kPending && !holds) {
    go(S::kInactive);
  } else if (state == S::kPending && now - since >= for_duration) {
    go(S::kFiring);
  } else if (state == S::kFiring && !holds) {
    go(S::kResolved);
  } else if (state == S::kResolved) {
    go(S::kInactive);
  }
  return out;
}

TEST_F(AlertTest, RandomConditionSequencesOnlyTakeLegalTransitions) {
  const std::set<std::pair<S, S>> legal = {{S::kInactive, S::kPending},
                                           {S::kPending, S::kFiring},
                                           {S::kFiring, S::kResolved},
                                           {S::kResolved, S::kInactive},
                                           {S::kPending, S::kInactive}};
  std::mt19937_64 rng(23);
  for (int iter = 0; iter < 300; ++iter) {
    tsdb::TsdbOptions o;
    TimestampMs t = kT0 + tsdb::kHour;
    o.clock = [&t] { return t; };
    tsdb::Tsdb db(o);
    std::vector<std::pair<std::string, std::string>> posts;
    AlertingOptions ao;
    ao.synchronous_delivery = true;
    ao.post = [&posts](const std::string& u, const std::string& b) {
      posts.emplace_back(u, b);
      return true;
    };
    AlertManager am(db, nullptr, nullptr, ao);
    AlertRule rule = Rule(15'000 * static_cast<TimestampMs>(rng() % 5));
    am.PutRule(rule);
    S model = S::kInactive;
    TimestampMs model_since = 0;
    int firing = 0, resolved = 0;
    double p_true = std::uniform_real_distribution<double>(0.2, 0.9)(rng);
    for (int step = 0; step < 60; ++step) {
      t += 15'000;
      bool holds = std::bernoulli_distribution(p_true)(rng);
      MetricSample s;
      s.key = SeriesKey::Canonicalize("cpu", LabelMap{{"host", "n1"}});
      s.value = holds ? 0.95 : 0.1;
      s.timestamp = t - 500;
      s.unit = Unit{CanonicalUnit::kRatio, "ratio"};
      db.Append(s);
      auto got = Path(am.EvaluateRule("cpu_high", t));
      auto expected = ModelStep(model, model_since, holds, t, rule.for_duration);
      ASSERT_EQ(got, expected) << "iter " << iter << " step " << step;
      for (const auto& tr : got) {
        ASSERT_TRUE(legal.contains(tr));
        firing += tr.second == S::kFiring;
        resolved += tr.second == S::kResolved;
      }
      ASSERT_GE(firing - resolved, 0);
      ASSERT_LE(firing - resolved, 1);
    }
    EXPECT_EQ(static_cast<int>(posts.size()), firing + resolved);
  }
}

TEST_F(AlertTest, AnomalyModeFiresWhileLatestPointIsAnomalous) {
  analytics::Analytics an(*db_, nullptr);
  AlertManager am(*db_, &an, nullptr, Sync());
  auto rule = Rule(0);
  rule.mode = RuleMode::kAnomaly;
  am.PutRule(rule);
  TimestampMs t = now_ - 100 * 10'000;
  for (int i = 0; i < 100; ++i) Put(t + i * 10'000, 0.3 + 0.01 * (i % 3));
  EXPECT_TRUE(am.EvaluateRule("cpu_high", now_).empty());
  Put(now_ + 5'000, 0.99);
  auto fired = am.EvaluateRule("cpu_high", now_ + 10'000);
  EXPECT_EQ(Path(fired),
            (std::vector<std::pair<S, S>>{{S::kInactive, S::kPending}, {S::kPending, S::kFiring}}));
  Put(now_ + 15'000, 0.31);
  EXPECT_EQ(Path(am.EvaluateRule("cpu_high", now_ + 20'000)),
            (std::vector<std::pair<S, S>>{{S::kFiring, S::kResolved}}));
}

TEST_F(AlertTest, RulesPersistInMetastore) {
  metastore::Metastore meta;
  {
    AlertManager am(*db_, nullptr, &meta, Sync());
    am.PutRule(Rule(30'000));
    auto other = Rule(0);
    other.rule_id = "other";
    am.PutRule(other);
    EXPECT_TRUE(am.DeleteRule("other"));
    EXPECT_FALSE(am.DeleteRule("other"));
  }
  AlertManager am(*db_, nullptr, &meta, Sync());
  auto rules = am.ListRules();
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_EQ(rules[0].for_duration, 30'000);
  Put(now_ - 1000, 0.95);
  am.EvaluateRule("cpu_high", now_);
  EXPECT_EQ(meta.ListDocuments("alert_history").size(), 1u);
}

TEST_F(AlertTest, DefaultWebhookAndConfig) {
  auto opts = Sync();
  opts.default_webhook_url = "http://default/hook";
  AlertManager am(*db_, nullptr, nullptr, opts);
  auto rule = Rule(0);
  rule.webhook_url.clear();
  am.PutRule(rule);
  Put(now_ - 1000, 0.95);
  am.EvaluateRule("cpu_high", now_);
  ASSERT_EQ(posts_.size(), 1u);
  EXPECT_EQ(posts_[0].first, "http://default/hook");

  auto cfg = ConfigFile::ParseText(
      "[alerting]\ndefault_eval_interval_seconds = 30\nwebhook_url = http://h/x\n");
  auto parsed = AlertingOptions::FromConfig(cfg);
  EXPECT_EQ(parsed.default_eval_interval, 30'000);
  EXPECT_EQ(parsed.default_webhook_url, "http://h/x");
  EXPECT_THROW(AlertingOptions::FromConfig(
                   ConfigFile::ParseText("alerting.default_eval_interval_seconds = 0\n")),
               Error);
}

TEST_F(AlertTest, TickHonoursEvalInterval) {
  AlertManager am(*db_, nullptr, nullptr, Sync());
  am.PutRule(Rule(0));
  Put(now_ - 1000, 0.95);
  EXPECT_EQ(am.Tick(now_).size(), 2u);
  EXPECT_TRUE(am.Tick(now_ + 5'000).empty());
  EXPECT_EQ(am.Tick(now_ + 15'000).size(), 1u);  // no data in the window: resolved
}

// End to end against a real HTTP receiver: exactly one firing and one
// resolved POST per episode, whatever else happens in between.
TEST_F(AlertTest, WebhookReceiverSeesOnePairPerEpisode) {
  httplib::Server server;
  std::mutex mu;
  std::vector<std::string> bodies;
  server.Post("/hook", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    bodies.push_back(req.body);
    res.status = 200;
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  AlertManager am(*db_, nullptr, nullptr, AlertingOptions{});
  auto rule = Rule(15'000);
  rule.webhook_url = "http://127.0.0.1:" + std::to_string(port) + "/hook";
  am.PutRule(rule);
  std::mt19937_64 rng(31);
  TimestampMs t = now_;
  std::vector<TimestampMs> episode_starts;
  for (int episode = 0; episode < 100; ++episode) {
    int on = 2 + static_cast<int>(rng() % 4), off = 2 + static_cast<int>(rng() % 3);
    for (int i = 0; i < on + off; ++i) {
      t += 15'000;
      now_ = t;
      Put(t - 500, i < on ? 0.95 : 0.1);
      for (const auto& tr : am.EvaluateRule("cpu_high", t)) {
        if (tr.to == S::kFiring) {
          episode_starts.push_back(tr.timestamp);
          // A duplicate attempt for the same episode must be suppressed.
          Notification dup{tr.fingerprint, tr.rule_id, S::kFiring, tr.value,
                           tr.labels,      tr.timestamp, tr.episode_start};
          am.Drain();
          EXPECT_EQ(am.Deliver(dup, rule.webhook_url), DeliveryResult::kSuppressed);
        }
      }
    }
  }
  am.Drain();
  server.stop();
  th.join();
  ASSERT_EQ(episode_starts.size(), 100u);
  std::map<std::string, std::pair<int, int>> per_fp_time;
  int firing = 0, resolved = 0;
  for (const auto& b : bodies) {
    auto j = nlohmann::ordered_json::parse(b);
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    EXPECT_EQ(keys, (std::vector<std::string>{"fingerprint", "rule_id", "state", "value",
                                              "labels", "timestamp_ms"}));
    EXPECT_EQ(j["fingerprint"].get<std::string>().size(), 16u);
    EXPECT_TRUE(j["value"].is_number());
    EXPECT_TRUE(j["timestamp_ms"].is_number_integer());
    EXPECT_TRUE(j["labels"].is_object());
    firing += j["state"] == "firing";
    resolved += j["state"] == "resolved";
  }
  EXPECT_EQ(firing, 100);
  EXPECT_EQ(resolved, 100);
}

}  // namespace
}  // namespace obs::alerting
