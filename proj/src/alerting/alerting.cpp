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

#include "obs/alerting/alerting.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>

#include <spdlog/spdlog.h>

#include "obs/analytics/analytics.hpp"
#include "obs/core/error.hpp"
#include "obs/metastore/metastore.hpp"
#include "obs/net/http.hpp"
#include "obs/tsdb/tsdb.hpp"

namespace obs::alerting {
namespace {

constexpr const char* kRulesTable = "rules";
constexpr const char* kHistoryTable = "alert_history";

bool Compare(Comparator c, double value, double threshold) {
  switch (c) {
    case Comparator::kGreater: return value > threshold;
    case Comparator::kLess: return value < threshold;
    case Comparator::kGreaterEqual: return value >= threshold;
    case Comparator::kLessEqual: return value <= threshold;
  }
  return false;
}

}  // namespace

std::string_view ComparatorSymbol(Comparator c) {
  switch (c) {
    case Comparator::kGreater: return ">";
    case Comparator::kLess: return "<";
    case Comparator::kGreaterEqual: return ">=";
    case Comparator::kLessEqual: return "<=";
  }
  return "?";
}

Comparator ParseComparator(std::string_view text) {
  if (text == ">") return Comparator::kGreater;
  if (text == "<") return Comparator::kLess;
  if (text == ">=") return Comparator::kGreaterEqual;
  if (text == "<=") return Comparator::kLessEqual;
  throw Error(ErrorCode::kInvalidArgument, "unknown comparator '" + std::string(text) + "'");
}

std::string_view StateName(AlertState s) {
  switch (s) {
    case AlertState::kInactive: return "inactive";
    case AlertState::kPending: return "pending";
    case AlertState::kFiring: return "firing";
    case AlertState::kResolved: return "resolved";
  }
  return "?";
}

void AlertRule::Validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kInvalidArgument, why); };
  if (rule_id.empty()) fail("rule_id must not be empty");
  if (for_duration < 0) fail("for_duration must be >= 0");
  if (eval_interval < 1000) fail("eval_interval must be >= 1000 ms");
  if (!std::isfinite(threshold)) fail("threshold must be finite");
}

nlohmann::json AlertRule::ToJson() const {
  return {{"rule_id", rule_id},
          {"selector", selector.ToString()},
          {"agg", agg.ToString()},
          {"comparator", ComparatorSymbol(comparator)},
          {"threshold", threshold},
          {"for_duration_ms", for_duration},
          {"eval_interval_ms", eval_interval},
          {"mode", mode == RuleMode::kThreshold ? "threshold" : "anomaly"},
          {"labels", labels},
          {"webhook_url", webhook_url}};
}

AlertRule AlertRule::FromJson(const nlohmann::json& j, TimestampMs default_eval_interval) {
  AlertRule r;
  try {
    r.rule_id = j.at("rule_id").get<std::string>();
    r.selector = Selector::Parse(j.at("selector").get<std::string>());
    r.agg = tsdb::AggSpec::Parse(j.value("agg", std::string("mean")));
    r.comparator = ParseComparator(j.value("comparator", std::string(">")));
    r.threshold = j.value("threshold", 0.0);
    r.for_duration = j.value("for_duration_ms", TimestampMs{0});
    r.eval_interval = j.value("eval_interval_ms", default_eval_interval);
    std::string mode = j.value("mode", std::string("threshold"));
    if (mode == "threshold") {
      r.mode = RuleMode::kThreshold;
    } else if (mode == "anomaly") {
      r.mode = RuleMode::kAnomaly;
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + mode + "'");
    }
    r.labels = j.value("labels", LabelMap{});
    r.webhook_url = j.value("webhook_url", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad rule: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad rule: ") + e.what());
  }
  r.Validate();
  return r;
}

AlertingOptions AlertingOptions::FromConfig(const ConfigFile& config) {
  AlertingOptions o;
  std::int64_t seconds = config.GetInt("alerting.default_eval_interval_seconds", 15);
  if (seconds < 1) {
    throw Error(ErrorCode::kValidationFailed,
                "alerting.default_eval_interval_seconds must be at least 1");
  }
  o.default_eval_interval = seconds * 1000;
  o.default_webhook_url = config.GetOr("alerting.webhook_url", "");
  return o;
}

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t Fingerprint(std::string_view rule_id, const LabelList& sorted_labels) {
  std::string bytes(rule_id);
  bytes += '\0';
  for (const auto& [k, v] : sorted_labels) {
    bytes += k;
    bytes += '=';
    bytes += v;
    bytes += '\0';
  }
  return Fnv1a64(bytes);
}

std::string FingerprintHex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fp);
  return buf;
}

std::string Notification::Body() const {
  nlohmann::ordered_json body;
  body["fingerprint"] = FingerprintHex(fingerprint);
  body["rule_id"] = rule_id;
  body["state"] = StateName(state);
  body["value"] = value;
  nlohmann::ordered_json l = nlohmann::ordered_json::object();
  for (const auto& [k, v] : labels) l[k] = v;
  body["labels"] = std::move(l);
  body["timestamp_ms"] = timestamp;
  return body.dump();
}

AlertManager::AlertManager(tsdb::Tsdb& tsdb, analytics::Analytics* analytics,
                           metastore::Metastore* metastore, AlertingOptions options)
    : tsdb_(tsdb), analytics_(analytics), metastore_(metastore), options_(std::move(options)) {
  if (!options_.post) {
    options_.post = [](const std::string& url, const std::string& body) {
      auto res = net::HttpPost(url, body, "application/json");
      if (!res.ok()) {
        spdlog::warn("webhook {}: {}", url, res.status ? std::to_string(res.status) : res.error);
      }
      return res.ok();
    };
  }
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  if (metastore_) {
    for (const auto& doc : metastore_->ListDocuments(kRulesTable)) {
      try {
        auto rule = AlertRule::FromJson(doc, options_.default_eval_interval);
        rules_[rule.rule_id] = std::move(rule);
      } catch (const Error& e) {
        spdlog::warn("skipping stored rule: {}", e.what());
      }
    }
  }
  if (!options_.synchronous_delivery) worker_ = std::thread([this] { DeliveryLoop(); });
}

AlertManager::~AlertManager() {
  {
    std::lock_guard lock(queue_mu_);
    stop_ = true;
  }
  queue_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

void AlertManager::PutRule(AlertRule rule) {
  rule.Validate();
  if (metastore_) metastore_->PutDocument(kRulesTable, rule.rule_id, rule.ToJson());
  std::lock_guard lock(mu_);
  rules_[rule.rule_id] = std::move(rule);
}

bool AlertManager::DeleteRule(const std::string& rule_id) {
  if (metastore_) metastore_->DeleteDocument(kRulesTable, rule_id);
  std::lock_guard lock(mu_);
  for (auto it = instances_.begin(); it != instances_.end();) {
    it = it->second.rule_id == rule_id ? instances_.erase(it) : std::next(it);
  }
  last_eval_.erase(rule_id);
  return rules_.erase(rule_id) > 0;
}

std::optional<AlertRule> AlertManager::GetRule(const std::string& rule_id) const {
  std::lock_guard lock(mu_);
  auto it = rules_.find(rule_id);
  if (it == rules_.end()) return std::nullopt;
  return it->second;
}

std::vector<AlertRule> AlertManager::ListRules() const {
  std::lock_guard lock(mu_);
  std::vector<AlertRule> out;
  for (const auto& [id, rule] : rules_) out.push_back(rule);
  return out;
}

std::vector<AlertInstance> AlertManager::Instances() const {
  std::lock_guard lock(mu_);
  std::vector<AlertInstance> out;
  for (const auto& [fp, inst] : instances_) out.push_back(inst);
  return out;
}

std::vector<Transition> AlertManager::EvaluateRule(const std::string& rule_id, TimestampMs now) {
  std::lock_guard eval_lock(eval_mu_);
  auto rule = GetRule(rule_id);
  if (!rule) throw Error(ErrorCode::kNotFound, "no rule '" + rule_id + "'");
  return EvaluateLocked(*rule, now);
}

std::vector<Transition> AlertManager::Tick(TimestampMs now) {
  std::lock_guard eval_lock(eval_mu_);
  std::vector<AlertRule> due;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, rule] : rules_) {
      auto it = last_eval_.find(id);
      if (it == last_eval_.end() || now - it->second >= rule.eval_interval) due.push_back(rule);
    }
  }
  std::vector<Transition> out;
  for (const auto& rule : due) {
    try {
      auto t = EvaluateLocked(rule, now);
      out.insert(out.end(), t.begin(), t.end());
    } catch (const Error& e) {
      spdlog::warn("rule {}: {}", rule.rule_id, e.what());
    }
  }
  return out;
}

std::vector<Transition> AlertManager::EvaluateLocked(const AlertRule& rule, TimestampMs now) {
  // Condition per matched series: (holds, value).
  std::map<SeriesKey, std::pair<bool, double>> observed;
  try {
    if (rule.mode == RuleMode::kThreshold) {
      auto results = tsdb_.QueryRange(rule.selector, now - rule.eval_interval, now + 1,
                                      rule.eval_interval + 1, rule.agg);
      for (const auto& series : results) {
        if (series.points.empty()) continue;
        double v = series.points.back().v;
        observed[series.key] = {Compare(rule.comparator, v, rule.threshold), v};
      }
    } else {
      analytics::AnomalyParams params = analytics_ ? analytics_->options().anomaly
                                                   : analytics::AnomalyParams{};
      for (const auto& key : tsdb_.ListSeries(rule.selector)) {
        auto points = tsdb_.RawPoints(key, now - options_.anomaly_lookback, now + 1);
        if (points.size() < static_cast<std::size_t>(params.window_points) + 1) {
          observed[key] = {false, 0};
          continue;
        }
        auto spans = analytics::DetectAnomalies(key, points, params);
        bool covering = !spans.empty() && spans.back().end == points.back().t;
        observed[key] = {covering, covering ? spans.back().peak_score : 0};
      }
    }
  } catch (const Error& e) {
    metrics_.Add("alert_eval_errors_total");
    throw Error(ErrorCode::kQueryFailed, rule.rule_id + ": " + e.what());
  }

  std::vector<Transition> transitions;
  std::lock_guard lock(mu_);
  last_eval_[rule.rule_id] = now;
  // Series seen earlier but absent now evaluate as false.
  for (const auto& [fp, inst] : instances_) {
    if (inst.rule_id == rule.rule_id && !observed.contains(inst.key)) {
      observed[inst.key] = {false, inst.last_value};
    }
  }
  for (const auto& [key, cond] : observed) {
    auto [holds, value] = cond;
    std::uint64_t fp = Fingerprint(rule.rule_id, key.labels());
    auto it = instances_.find(fp);
    if (it == instances_.end()) {
      if (!holds) continue;
      AlertInstance inst;
      inst.fingerprint = fp;
      inst.rule_id = rule.rule_id;
      inst.key = key;
      it = instances_.emplace(fp, std::move(inst)).first;
    }
    AlertInstance& inst = it->second;
    inst.last_value = value;
    LabelMap labels = key.label_map();
    for (const auto& [k, v] : rule.labels) labels.try_emplace(k, v);
    auto move_to = [&](AlertState to) {
      Transition t{fp, rule.rule_id, inst.state, to, value, labels, now, inst.episode_start};
      if (to == AlertState::kFiring) t.episode_start = inst.episode_start = now;
      inst.state = to;
      inst.since = now;
      transitions.push_back(std::move(t));
    };
    switch (inst.state) {
      case AlertState::kInactive:
        if (holds) {
          move_to(AlertState::kPending);
          if (rule.for_duration == 0) move_to(AlertState::kFiring);
        }
        break;
      case AlertState::kPending:
        if (!holds) {
          move_to(AlertState::kInactive);
        } else if (now - inst.since >= rule.for_duration) {
          move_to(AlertState::kFiring);
        }
        break;
      case AlertState::kFiring:
        if (!holds) move_to(AlertState::kResolved);
        break;
      case AlertState::kResolved:
        move_to(AlertState::kInactive);
        inst.episode_start = 0;
        break;
    }
  }
  for (const auto& t : transitions) {
    metrics_.Add("alert_transitions_total");
    if (metastore_) {
      char key[64];
      std::snprintf(key, sizeof(key), "%013" PRId64 "-%s-%s", t.timestamp,
                    FingerprintHex(t.fingerprint).c_str(), std::string(StateName(t.to)).c_str());
      metastore_->PutDocument(kHistoryTable, key,
                              {{"fingerprint", FingerprintHex(t.fingerprint)},
                               {"rule_id", t.rule_id},
                               {"from", StateName(t.from)},
                               {"to", StateName(t.to)},
                               {"value", t.value},
                               {"labels", t.labels},
                               {"timestamp_ms", t.timestamp}});
    }
    if (t.to == AlertState::kFiring || t.to == AlertState::kResolved) Notify(t, rule);
  }
  return transitions;
}

void AlertManager::Notify(const Transition& t, const AlertRule& rule) {
  const std::string& url =
      rule.webhook_url.empty() ? options_.default_webhook_url : rule.webhook_url;
  if (url.empty()) return;
  Notification n{t.fingerprint, t.rule_id, t.to, t.value, t.labels, t.timestamp, t.episode_start};
  if (options_.synchronous_delivery) {
    Deliver(n, url);
    return;
  }
  {
    std::lock_guard lock(queue_mu_);
    queue_.push_back({std::move(n), url});
  }
  queue_cv_.notify_one();
}

DeliveryResult AlertManager::Deliver(const Notification& n, const std::string& url) {
  if (n.state != AlertState::kFiring && n.state != AlertState::kResolved) {
    throw Error(ErrorCode::kInvalidArgument, "only firing and resolved notify");
  }
  LedgerKey key{n.fingerprint, n.episode_start, n.state};
  {
    std::lock_guard lock(ledger_mu_);
    if (!ledger_.emplace(key, false).second) {
      metrics_.Add("alert_notifications_suppressed_total");
      return DeliveryResult::kSuppressed;
    }
  }
  static constexpr std::chrono::milliseconds kBackoff[] = {std::chrono::seconds(1),
                                                           std::chrono::seconds(2)};
  const std::string body = n.Body();
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (attempt > 0) options_.sleep(kBackoff[attempt - 1]);
    bool ok = false;
    try {
      ok = options_.post(url, body);
    } catch (const std::exception& e) {
      spdlog::warn("webhook {}: {}", url, e.what());
    }
    if (ok) {
      std::lock_guard lock(ledger_mu_);
      ledger_[key] = true;
      metrics_.Add("alert_notifications_sent_total");
      return DeliveryResult::kDelivered;
    }
  }
  {
    std::lock_guard lock(ledger_mu_);
    ledger_.erase(key);
  }
  metrics_.Add("alert_notifications_dropped_total");
  spdlog::error("webhook {}: dropped {} notification for {}", url, StateName(n.state),
                FingerprintHex(n.fingerprint));
  return DeliveryResult::kDropped;
}

void AlertManager::DeliveryLoop() {
  std::unique_lock lock(queue_mu_);
  while (true) {
    queue_cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
    if (queue_.empty()) return;
    Pending p = std::move(queue_.front());
    queue_.pop_front();
    ++in_flight_;
    lock.unlock();
    Deliver(p.notification, p.url);
    lock.lock();
    --in_flight_;
    if (queue_.empty() && in_flight_ == 0) drained_cv_.notify_all();
  }
}

void AlertManager::Drain() {
  std::unique_lock lock(queue_mu_);
  drained_cv_.wait(lock, [this] { return queue_.empty() && in_flight_ == 0; });
}

}  // namespace obs::alerting
