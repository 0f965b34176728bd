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

#include "obs/api/service.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "obs/alerting/alerting.hpp"
#include "obs/analytics/analytics.hpp"
#include "obs/api/templates.hpp"
#include "obs/core/error.hpp"
#include "obs/core/exposition.hpp"
#include "obs/gateway/gateway.hpp"
#include "obs/metastore/metastore.hpp"
#include "obs/tsdb/tsdb.hpp"

namespace obs::api {
namespace {

using nlohmann::json;

constexpr TimestampMs kDefaultRange = 3'600'000;
constexpr TimestampMs kDefaultStep = 60'000;

int StatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnauthenticated: return 401;
    case ErrorCode::kForbidden:
    case ErrorCode::kScopeConflict: return 403;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kSourceUnavailable: return 503;
    case ErrorCode::kQueryFailed:
    case ErrorCode::kIoError:
    case ErrorCode::kStorageFull: return 500;
    default: return 400;
  }
}

ApiResponse Json(int status, const json& body) {
  return ApiResponse{status, "application/json", body.dump()};
}

ApiResponse ErrorResponse(ErrorCode code, const std::string& message) {
  return Json(StatusFor(code), {{"error", ErrorCodeName(code)}, {"message", message}});
}

std::vector<std::string_view> Segments(std::string_view path) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < path.size()) {
    auto next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    if (next > pos) out.push_back(path.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

std::optional<std::string> Param(const ApiRequest& r, const std::string& name) {
  auto it = r.query.find(name);
  if (it == r.query.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

std::int64_t ParseInt(std::string_view name, std::string_view text) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw Error(ErrorCode::kParseError, std::string(name) + " must be an integer");
  }
  return v;
}

std::int64_t IntParam(const ApiRequest& r, const std::string& name, std::int64_t fallback) {
  auto v = Param(r, name);
  return v ? ParseInt(name, *v) : fallback;
}

double DoubleParam(const ApiRequest& r, const std::string& name, double fallback) {
  auto v = Param(r, name);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used == v->size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kParseError, name + " must be a number");
}

Selector SelectorParam(const ApiRequest& r, bool required) {
  auto text = Param(r, "selector");
  if (!text) {
    if (required) throw Error(ErrorCode::kInvalidArgument, "selector is required");
    return Selector{};
  }
  return Selector::Parse(*text);
}

struct Range {
  TimestampMs start;
  TimestampMs end;
};

Range RangeParams(const ApiRequest& r, TimestampMs now) {
  TimestampMs end = IntParam(r, "end", now);
  TimestampMs start = IntParam(r, "start", end - kDefaultRange);
  if (start >= end) throw Error(ErrorCode::kInvalidRange, "start must be before end");
  return {start, end};
}

json LabelsJson(const LabelList& labels) {
  json out = json::object();
  for (const auto& [k, v] : labels) out[k] = v;
  return out;
}

json LabelsJson(const LabelMap& labels) {
  json out = json::object();
  for (const auto& [k, v] : labels) out[k] = v;
  return out;
}

json SeriesJson(const SeriesKey& key) {
  return {{"metric", key.name()}, {"labels", LabelsJson(key.labels())}};
}

json EntityJson(const metastore::EntityRecord& e) {
  return {{"entity_id", e.entity_id},
          {"kind", e.kind},
          {"attributes", LabelsJson(e.attributes)},
          {"created_at", e.created_at},
          {"updated_at", e.updated_at}};
}

metastore::EntityRecord EntityFromJson(const json& j) {
  metastore::EntityRecord e;
  e.entity_id = j.at("entity_id").get<std::string>();
  e.kind = j.at("kind").get<std::string>();
  if (e.entity_id.empty() || e.kind.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "entity_id and kind must be non-empty");
  }
  if (j.contains("attributes")) {
    for (const auto& [k, v] : j.at("attributes").items()) e.attributes[k] = v.get<std::string>();
  }
  return e;
}

json ParseBody(const ApiRequest& r) {
  try {
    return json::parse(r.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("body: ") + e.what());
  }
}

void RequireAdmin(const Principal& p) {
  if (!p.is_admin()) throw Error(ErrorCode::kForbidden, "admin token required");
}

template <typename T>
T& Need(T* backend, const char* what) {
  if (!backend) throw Error(ErrorCode::kSourceUnavailable, std::string(what) + " is not enabled");
  return *backend;
}

const DashboardTemplate* FindBuiltin(std::string_view id) {
  for (const auto& t : BuiltinTemplates()) {
    if (t.template_id == id) return &t;
  }
  return nullptr;
}

// A rule is visible to a user when its selector can be scoped for them.
bool RuleVisible(const Principal& p, const alerting::AlertRule& rule) {
  try {
    ScopeSelector(p, rule.selector);
    return true;
  } catch (const Error&) {
    return false;
  }
}

ApiResponse MethodNotAllowed() {
  return Json(405, {{"error", "MethodNotAllowed"}, {"message", "method not allowed"}});
}

}  // namespace

ApiService::ApiService(ApiBackends backends, ApiOptions options)
    : backends_(backends), options_(std::move(options)) {}

ApiResponse ApiService::Handle(const ApiRequest& request) {
  metrics_.Add("api_requests_total");
  ApiResponse response;
  try {
    response = Route(request);
  } catch (const Error& e) {
    response = ErrorResponse(e.code(), e.what());
    if (e.code() == ErrorCode::kUnauthenticated) metrics_.Add("api_unauthenticated_total");
    if (e.code() == ErrorCode::kScopeConflict) metrics_.Add("api_scope_conflicts_total");
  } catch (const json::exception& e) {
    response = ErrorResponse(ErrorCode::kInvalidArgument, e.what());
  }
  if (response.status >= 400) metrics_.Add("api_errors_total");
  return response;
}

ApiResponse ApiService::Route(const ApiRequest& r) {
  auto seg = Segments(r.path);
  const bool get = r.method == "GET";

  if (r.path == "/metrics") {
    if (!get) return MethodNotAllowed();
    TimestampMs now = options_.clock();
    std::string text;
    auto emit = [&](SelfMetrics* m, const char* component) {
      if (!m) return;
      for (const auto& s : m->Snapshot(now, {{"component", component}})) {
        text += FormatExpositionLine(s);
      }
    };
    emit(&metrics_, "api");
    emit(backends_.tsdb ? &backends_.tsdb->metrics() : nullptr, "tsdb");
    emit(backends_.metastore ? &backends_.metastore->metrics() : nullptr, "metastore");
    emit(backends_.gateway ? &backends_.gateway->metrics() : nullptr, "gateway");
    emit(backends_.analytics ? &backends_.analytics->metrics() : nullptr, "analytics");
    emit(backends_.alerting ? &backends_.alerting->metrics() : nullptr, "alerting");
    return ApiResponse{200, "text/plain; version=0.0.4", std::move(text)};
  }
  if (seg.size() < 3 || seg[0] != "api" || seg[1] != "v1") {
    return ErrorResponse(ErrorCode::kNotFound, "no such endpoint");
  }
  const std::string_view endpoint = seg[2];
  const std::vector<std::string_view> rest(seg.begin() + 3, seg.end());
  if (endpoint == "healthz") return Json(200, {{"status", "ok"}});

  auto auth = r.headers.find("authorization");
  Principal who = options_.credentials.Authorize(auth == r.headers.end() ? "" : auth->second);

  TimestampMs now = options_.clock();
  std::optional<TimestampMs> virtual_now;
  if (auto it = r.headers.find("x-virtual-now-ms"); options_.test_mode && it != r.headers.end()) {
    virtual_now = ParseInt("X-Virtual-Now-Ms", it->second);
    now = *virtual_now;
  }

  if (endpoint == "ingest") {
    if (r.method != "POST") return MethodNotAllowed();
    auto& gw = Need(backends_.gateway, "gateway");
    auto result = gw.Ingest(r.body, {}, who.ForcedLabels(), virtual_now);
    return Json(200, result.ToJson());
  }

  if (endpoint == "query_range" && rest.empty()) {
    if (!get) return MethodNotAllowed();
    auto& db = Need(backends_.tsdb, "tsdb");
    Selector sel = ScopeSelector(who, SelectorParam(r, true));
    Range range = RangeParams(r, now);
    TimestampMs step = IntParam(r, "step", kDefaultStep);
    auto agg = tsdb::AggSpec::Parse(Param(r, "agg").value_or("mean"));
    json series = json::array();
    for (const auto& s : db.QueryRange(sel, range.start, range.end, step, agg)) {
      json points = json::array();
      for (const auto& p : s.points) points.push_back({p.t, p.v});
      json item = SeriesJson(s.key);
      item["points"] = std::move(points);
      series.push_back(std::move(item));
    }
    return Json(200, {{"selector", sel.ToString()}, {"agg", agg.ToString()}, {"series", series}});
  }

  if (endpoint == "series" && rest.empty()) {
    if (!get) return MethodNotAllowed();
    auto& db = Need(backends_.tsdb, "tsdb");
    Selector sel = ScopeSelector(who, SelectorParam(r, false));
    json series = json::array();
    for (const auto& key : db.ListSeries(sel)) series.push_back(SeriesJson(key));
    return Json(200, {{"selector", sel.ToString()}, {"series", series}});
  }

  if (endpoint == "anomalies" && rest.empty()) {
    if (!get) return MethodNotAllowed();
    auto& db = Need(backends_.tsdb, "tsdb");
    auto& an = Need(backends_.analytics, "analytics");
    Selector sel = ScopeSelector(who, SelectorParam(r, true));
    Range range = RangeParams(r, now);
    analytics::AnomalyParams params = an.options().anomaly;
    params.window_points = static_cast<int>(IntParam(r, "window", params.window_points));
    params.threshold_k = DoubleParam(r, "threshold", params.threshold_k);
    params.Validate();
    json spans = json::array();
    json skipped = json::array();
    for (const auto& key : db.ListSeries(sel)) {
      try {
        for (const auto& span : an.DetectAnomalies(key, range.start, range.end, params)) {
          json item = SeriesJson(key);
          item["start"] = span.start;
          item["end"] = span.end;
          item["onset"] = span.onset;
          item["peak_score"] = span.peak_score;
          spans.push_back(std::move(item));
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kInsufficientData) throw;
        skipped.push_back(SeriesJson(key));
      }
    }
    return Json(200, {{"selector", sel.ToString()}, {"spans", spans}, {"skipped", skipped}});
  }

  if (endpoint == "events" && rest.empty()) {
    if (!get) return MethodNotAllowed();
    auto& meta = Need(backends_.metastore, "metastore");
    Selector sel = ScopeSelector(who, SelectorParam(r, false));
    Range range = RangeParams(r, now);
    json events = json::array();
    for (const auto& e : meta.QueryEvents(sel, range.start, range.end)) {
      events.push_back({{"event_id", e.event_id},
                        {"kind", e.kind},
                        {"attributes", LabelsJson(e.attributes)},
                        {"value", e.value},
                        {"timestamp_ms", e.timestamp}});
    }
    return Json(200, {{"selector", sel.ToString()}, {"events", events}});
  }

  if (endpoint == "summaries" && rest.empty()) {
    if (!get) return MethodNotAllowed();
    auto& meta = Need(backends_.metastore, "metastore");
    Selector sel = ScopeSelector(who, SelectorParam(r, false));
    Range range = RangeParams(r, now);
    json out = json::array();
    for (const auto& s : meta.QuerySummaries(sel, range.start, range.end)) {
      out.push_back({{"summary_id", s.summary_id},
                     {"selector", s.selector},
                     {"window_start", s.window_start},
                     {"window_end", s.window_end},
                     {"count", s.stats.count},
                     {"sum", s.stats.sum},
                     {"min", s.stats.min},
                     {"max", s.stats.max},
                     {"mean", s.stats.mean},
                     {"stddev", s.stats.stddev},
                     {"produced_at", s.produced_at}});
    }
    return Json(200, {{"selector", sel.ToString()}, {"summaries", out}});
  }

  if (endpoint == "alerts" && rest.empty()) {
    if (!get) return MethodNotAllowed();
    auto& am = Need(backends_.alerting, "alerting");
    json out = json::array();
    for (const auto& inst : am.Instances()) {
      if (!who.Permits(inst.key)) continue;
      json item = SeriesJson(inst.key);
      item["fingerprint"] = alerting::FingerprintHex(inst.fingerprint);
      item["rule_id"] = inst.rule_id;
      item["state"] = alerting::StateName(inst.state);
      item["since"] = inst.since;
      item["value"] = inst.last_value;
      item["episode_start"] = inst.episode_start;
      out.push_back(std::move(item));
    }
    return Json(200, {{"alerts", out}});
  }

  if (endpoint == "rules") {
    auto& am = Need(backends_.alerting, "alerting");
    if (rest.empty()) {
      if (get) {
        json out = json::array();
        for (const auto& rule : am.ListRules()) {
          if (RuleVisible(who, rule)) out.push_back(rule.ToJson());
        }
        return Json(200, {{"rules", out}});
      }
      if (r.method != "POST") return MethodNotAllowed();
      RequireAdmin(who);
      auto rule = alerting::AlertRule::FromJson(ParseBody(r), am.default_eval_interval());
      if (am.GetRule(rule.rule_id)) {
        throw Error(ErrorCode::kInvalidArgument, "rule '" + rule.rule_id + "' exists");
      }
      am.PutRule(rule);
      return Json(201, rule.ToJson());
    }
    if (rest.size() != 1) return ErrorResponse(ErrorCode::kNotFound, "no such endpoint");
    std::string id(rest[0]);
    if (get) {
      auto rule = am.GetRule(id);
      if (!rule || !RuleVisible(who, *rule)) throw Error(ErrorCode::kNotFound, "no rule " + id);
      return Json(200, rule->ToJson());
    }
    RequireAdmin(who);
    if (r.method == "PUT") {
      json body = ParseBody(r);
      body["rule_id"] = id;
      auto rule = alerting::AlertRule::FromJson(body, am.default_eval_interval());
      am.PutRule(rule);
      return Json(200, rule.ToJson());
    }
    if (r.method == "DELETE") {
      if (!am.DeleteRule(id)) throw Error(ErrorCode::kNotFound, "no rule " + id);
      return Json(200, {{"deleted", id}});
    }
    return MethodNotAllowed();
  }

  if (endpoint == "dashboards") {
    auto& meta = Need(backends_.metastore, "metastore");
    if (rest.empty()) {
      if (get) {
        json out = json::array();
        for (const auto& t : BuiltinTemplates()) {
          json item = t.ToJson();
          item["builtin"] = true;
          out.push_back(std::move(item));
        }
        for (auto doc : meta.ListDocuments("dashboards")) {
          doc["builtin"] = false;
          out.push_back(std::move(doc));
        }
        return Json(200, {{"dashboards", out}});
      }
      if (r.method != "POST") return MethodNotAllowed();
      RequireAdmin(who);
      auto t = DashboardTemplate::FromJson(ParseBody(r));
      if (FindBuiltin(t.template_id) || meta.GetDocument("dashboards", t.template_id)) {
        throw Error(ErrorCode::kInvalidArgument, "dashboard '" + t.template_id + "' exists");
      }
      meta.PutDocument("dashboards", t.template_id, t.ToJson());
      return Json(201, t.ToJson());
    }
    if (rest.size() != 1) return ErrorResponse(ErrorCode::kNotFound, "no such endpoint");
    std::string id(rest[0]);
    if (get) {
      if (const auto* t = FindBuiltin(id)) {
        json item = t->ToJson();
        item["builtin"] = true;
        return Json(200, item);
      }
      auto doc = meta.GetDocument("dashboards", id);
      if (!doc) throw Error(ErrorCode::kNotFound, "no dashboard " + id);
      (*doc)["builtin"] = false;
      return Json(200, *doc);
    }
    RequireAdmin(who);
    if (FindBuiltin(id)) throw Error(ErrorCode::kForbidden, "built-in templates are read-only");
    if (r.method == "PUT") {
      json body = ParseBody(r);
      body["template_id"] = id;
      auto t = DashboardTemplate::FromJson(body);
      meta.PutDocument("dashboards", id, t.ToJson());
      return Json(200, t.ToJson());
    }
    if (r.method == "DELETE") {
      if (!meta.DeleteDocument("dashboards", id)) {
        throw Error(ErrorCode::kNotFound, "no dashboard " + id);
      }
      return Json(200, {{"deleted", id}});
    }
    return MethodNotAllowed();
  }

  if (endpoint == "entities") {
    auto& meta = Need(backends_.metastore, "metastore");
    if (rest.empty()) {
      if (get) {
        json out = json::array();
        for (const auto& e : meta.ListEntities(Param(r, "kind"))) {
          if (who.Permits(e.attributes)) out.push_back(EntityJson(e));
        }
        return Json(200, {{"entities", out}});
      }
      if (r.method != "POST") return MethodNotAllowed();
      RequireAdmin(who);
      auto e = EntityFromJson(ParseBody(r));
      meta.UpsertEntity(e);
      return Json(201, EntityJson(*meta.GetEntity(e.kind, e.entity_id)));
    }
    if (rest.size() != 2) return ErrorResponse(ErrorCode::kNotFound, "no such endpoint");
    std::string kind(rest[0]), id(rest[1]);
    if (get) {
      auto e = meta.GetEntity(kind, id);
      // Out-of-scope entities look absent rather than forbidden.
      if (!e || !who.Permits(e->attributes)) throw Error(ErrorCode::kNotFound, "no entity " + id);
      return Json(200, EntityJson(*e));
    }
    RequireAdmin(who);
    if (r.method == "PUT") {
      json body = ParseBody(r);
      body["kind"] = kind;
      body["entity_id"] = id;
      auto e = EntityFromJson(body);
      meta.UpsertEntity(e);
      return Json(200, EntityJson(*meta.GetEntity(kind, id)));
    }
    if (r.method == "DELETE") {
      if (!meta.DeleteEntity(kind, id)) throw Error(ErrorCode::kNotFound, "no entity " + id);
      return Json(200, {{"deleted", id}});
    }
    return MethodNotAllowed();
  }

  return ErrorResponse(ErrorCode::kNotFound, "no such endpoint");
}

ApiServer::ApiServer(ApiService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    for (const auto& [k, v] : req.headers) {
      std::string name = k;
      std::transform(name.begin(), name.end(), name.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      r.headers.emplace(std::move(name), v);
    }
    r.body = req.body;
    ApiResponse out = service_.Handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server_->Get(".*", handler);
  server_->Post(".*", handler);
  server_->Put(".*", handler);
  server_->Delete(".*", handler);
}

ApiServer::~ApiServer() { Stop(); }

int ApiServer::Start(const std::string& host, int port) {
  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  spdlog::info("api listening on {}:{}", host, bound);
  return bound;
}

void ApiServer::Stop() {
  if (thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

std::pair<std::string, int> ParseListenAddr(std::string_view addr) {
  auto colon = addr.rfind(':');
  std::string host = colon == std::string_view::npos ? "0.0.0.0" : std::string(addr.substr(0, colon));
  auto port_text = colon == std::string_view::npos ? addr : addr.substr(colon + 1);
  int port = 0;
  auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || p != port_text.data() + port_text.size() || port < 0 || port > 65535 ||
      host.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "listen address must be host:port");
  }
  return {host, port};
}

}  // namespace obs::api
