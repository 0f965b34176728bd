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

#include "obs/scenario/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "obs/api/service.hpp"
#include "obs/core/error.hpp"
#include "obs/core/exposition.hpp"
#include "obs/net/http.hpp"
#include "obs/tsdb/rollup.hpp"

namespace obs::scenario {
namespace {

using nlohmann::json;

std::string_view OpSymbol(CompareOp op) {
  switch (op) {
    case CompareOp::kEqual: return "==";
    case CompareOp::kApprox: return "~=";
    case CompareOp::kLess: return "<";
    case CompareOp::kLessEqual: return "<=";
    case CompareOp::kGreater: return ">";
    case CompareOp::kGreaterEqual: return ">=";
  }
  return "==";
}

CompareOp ParseOp(const std::string& s) {
  for (auto op : {CompareOp::kEqual, CompareOp::kApprox, CompareOp::kLess, CompareOp::kLessEqual,
                  CompareOp::kGreater, CompareOp::kGreaterEqual}) {
    if (OpSymbol(op) == s) return op;
  }
  throw Error(ErrorCode::kValidationFailed, "unknown comparator '" + s + "'");
}

ExpectKind ParseKindName(const std::string& s) {
  if (s == "value") return ExpectKind::kValue;
  if (s == "series_count") return ExpectKind::kSeriesCount;
  if (s == "anomaly_spans") return ExpectKind::kAnomalySpans;
  throw Error(ErrorCode::kValidationFailed, "unknown expectation kind '" + s + "'");
}

bool Compare(const Expectation& e, double actual) {
  switch (e.op) {
    case CompareOp::kEqual: return e.tolerance > 0 ? std::abs(actual - e.value) <= e.tolerance
                                                   : actual == e.value;
    case CompareOp::kApprox: return std::abs(actual - e.value) <= e.tolerance;
    case CompareOp::kLess: return actual < e.value;
    case CompareOp::kLessEqual: return actual <= e.value;
    case CompareOp::kGreater: return actual > e.value;
    case CompareOp::kGreaterEqual: return actual >= e.value;
  }
  return false;
}

LabelMap LabelsFrom(const json& j) {
  LabelMap out;
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) out[k] = v.get<std::string>();
  }
  return out;
}

MetricKind KindFrom(const json& j) {
  auto kind = ParseKind(j.value("kind", "gauge"));
  if (!kind) throw Error(ErrorCode::kValidationFailed, "unknown sample kind");
  return *kind;
}

}  // namespace

void Scenario::Validate() const {
  if (expectations.empty()) {
    throw Error(ErrorCode::kValidationFailed, "scenario '" + name + "' has no expectations");
  }
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].offset < samples[i - 1].offset) {
      throw Error(ErrorCode::kValidationFailed,
                  "sample offsets decrease at index " + std::to_string(i));
    }
  }
  for (const auto& e : expectations) {
    if (e.start_offset >= e.end_offset) {
      throw Error(ErrorCode::kValidationFailed, "expectation '" + e.name + "' has an empty window");
    }
  }
}

Scenario Scenario::FromJson(const json& j) {
  Scenario s;
  try {
    s.name = j.at("name").get<std::string>();
    if (j.contains("base_time_ms")) s.base_time = j.at("base_time_ms").get<TimestampMs>();
    for (const auto& item : j.value("samples", json::array())) {
      ScriptedSample base;
      base.metric = item.at("metric").get<std::string>();
      base.labels = LabelsFrom(item.value("labels", json::object()));
      base.kind = KindFrom(item);
      base.unit = item.value("unit", "none");
      if (item.contains("runs")) {
        TimestampMs offset = item.value("start_offset_ms", TimestampMs{0});
        TimestampMs interval = item.at("interval_ms").get<TimestampMs>();
        for (const auto& run : item.at("runs")) {
          int count = run.at(0).get<int>();
          double value = run.at(1).get<double>();
          for (int i = 0; i < count; ++i) {
            ScriptedSample sample = base;
            sample.offset = offset;
            sample.value = value;
            s.samples.push_back(std::move(sample));
            offset += interval;
          }
        }
      } else {
        base.offset = item.at("offset_ms").get<TimestampMs>();
        base.value = item.at("value").get<double>();
        s.samples.push_back(std::move(base));
      }
    }
    for (const auto& item : j.at("expectations")) {
      Expectation e;
      e.name = item.at("name").get<std::string>();
      e.kind = ParseKindName(item.value("kind", "value"));
      e.selector = item.value("selector", "");
      e.agg = item.value("agg", "mean");
      e.start_offset = item.value("start_offset_ms", TimestampMs{0});
      e.end_offset = item.value("end_offset_ms", TimestampMs{60'000});
      e.op = ParseOp(item.value("op", "=="));
      e.value = item.at("value").get<double>();
      e.tolerance = item.value("tolerance", 0.0);
      if (item.contains("cover_start_offset_ms")) {
        e.cover_start = item.at("cover_start_offset_ms").get<TimestampMs>();
        e.cover_end = item.at("cover_end_offset_ms").get<TimestampMs>();
      }
      e.anomaly_window = item.value("anomaly_window", 60);
      s.expectations.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("scenario: ") + e.what());
  }
  std::stable_sort(s.samples.begin(), s.samples.end(),
                   [](const ScriptedSample& a, const ScriptedSample& b) { return a.offset < b.offset; });
  s.Validate();
  return s;
}

Scenario Scenario::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  return FromJson(j);
}

json ScenarioReport::ToJson() const {
  json details_json = json::array();
  for (const auto& d : details) {
    details_json.push_back({{"name", d.name},
                            {"passed", d.passed},
                            {"actual", d.actual ? json(*d.actual) : json(nullptr)},
                            {"detail", d.detail}});
  }
  return {{"scenario", scenario}, {"passed", passed}, {"failed", failed}, {"details", details_json}};
}

std::string ScenarioReport::Render() const {
  std::ostringstream out;
  for (const auto& d : details) {
    out << (d.passed ? "PASS " : "FAIL ") << d.name << ": ";
    if (d.actual) out << "actual " << FormatDouble(*d.actual);
    if (d.actual && !d.detail.empty()) out << ", ";
    out << d.detail << "\n";
  }
  out << scenario << ": " << passed << " passed, " << failed << " failed\n";
  return out.str();
}

Transport HttpTransport(const std::string& base_url) {
  return [base_url](const std::string& method, const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers) {
    net::Headers h(headers.begin(), headers.end());
    auto res = net::HttpSend(method, base_url + path, body, "text/plain", h,
                             std::chrono::seconds(30));
    return TransportResponse{res.status, res.body};
  };
}

Transport InProcessTransport(api::ApiService& service) {
  return [&service](const std::string& method, const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers) {
    api::ApiRequest r;
    r.method = method;
    auto q = path.find('?');
    r.path = path.substr(0, q);
    if (q != std::string::npos) {
      httplib::Params params;
      httplib::detail::parse_query_text(path.substr(q + 1), params);
      for (const auto& [k, v] : params) r.query.emplace(k, v);
    }
    for (const auto& [k, v] : headers) {
      std::string name = k;
      for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      r.headers[name] = v;
    }
    r.body = body;
    auto out = service.Handle(r);
    return TransportResponse{out.status, out.body};
  };
}

ScenarioReport RunScenario(const Scenario& scenario, const Transport& transport,
                           const RunnerOptions& options) {
  scenario.Validate();
  std::map<std::string, std::string> headers;
  if (!options.token.empty()) headers["Authorization"] = "Bearer " + options.token;

  auto health = transport("GET", "/api/v1/healthz", "", headers);
  if (health.status != 200) {
    throw Error(ErrorCode::kStackUnreachable,
                "api healthz answered " + std::to_string(health.status));
  }

  TimestampMs base = options.realtime ? options.clock()
                                      : scenario.base_time.value_or(
                                            tsdb::AlignDown(options.clock(), tsdb::kHour) - tsdb::kHour);
  ScenarioReport report;
  report.scenario = scenario.name;

  std::size_t rejected = 0;
  std::string first_reject;
  auto send = [&](const std::string& body, TimestampMs virtual_now) {
    auto h = headers;
    if (!options.realtime) h["X-Virtual-Now-Ms"] = std::to_string(virtual_now);
    auto res = transport("POST", "/api/v1/ingest", body, h);
    if (res.status != 200) {
      throw Error(ErrorCode::kStackUnreachable,
                  "ingest answered " + std::to_string(res.status) + ": " + res.body);
    }
    auto j = json::parse(res.body);
    rejected += j.at("rejected").size();
    if (first_reject.empty() && !j.at("rejected").empty()) {
      first_reject = j.at("rejected")[0].value("message", "");
    }
  };

  const auto start_wall = std::chrono::steady_clock::now();
  std::string batch;
  std::size_t in_batch = 0;
  TimestampMs last = base;
  for (const auto& s : scenario.samples) {
    if (options.realtime) {
      std::this_thread::sleep_until(start_wall + std::chrono::milliseconds(s.offset));
    }
    // Written by hand so the sample keeps its source unit; the gateway
    // converts it.
    last = base + s.offset;
    batch += SeriesKey::Canonicalize(s.metric, s.labels).ToString() + " " +
             std::string(KindName(s.kind)) + " " + s.unit + " " + FormatDouble(s.value) + " " +
             std::to_string(last) + "\n";
    if (++in_batch >= options.batch_size || options.realtime) {
      send(batch, last);
      batch.clear();
      in_batch = 0;
    }
  }
  if (!batch.empty()) send(batch, last);
  if (rejected > 0) {
    report.details.push_back({"ingest", false, static_cast<double>(rejected),
                              "samples rejected: " + first_reject});
  }

  const TimestampMs query_now = std::max(last, base) + 1;
  for (const auto& e : scenario.expectations) {
    ExpectationResult r;
    r.name = e.name;
    auto h = headers;
    if (!options.realtime) h["X-Virtual-Now-Ms"] = std::to_string(query_now);
    std::string range = "&start=" + std::to_string(base + e.start_offset) +
                        "&end=" + std::to_string(base + e.end_offset);
    std::string sel = httplib::detail::encode_query_param(e.selector);
    TransportResponse res;
    switch (e.kind) {
      case ExpectKind::kValue:
        res = transport("GET",
                        "/api/v1/query_range?selector=" + sel + range +
                            "&step=" + std::to_string(e.end_offset - e.start_offset) +
                            "&agg=" + httplib::detail::encode_query_param(e.agg),
                        "", h);
        break;
      case ExpectKind::kSeriesCount:
        res = transport("GET", "/api/v1/series?selector=" + sel, "", h);
        break;
      case ExpectKind::kAnomalySpans:
        res = transport("GET",
                        "/api/v1/anomalies?selector=" + sel + range +
                            "&window=" + std::to_string(e.anomaly_window),
                        "", h);
        break;
    }
    if (res.status == 0) {
      throw Error(ErrorCode::kStackUnreachable, "api stopped answering");
    }
    if (res.status != 200) {
      std::string message = res.body;
      try {
        message = json::parse(res.body).value("message", res.body);
      } catch (const json::exception&) {
      }
      r.detail = "query failed (" + std::to_string(res.status) + "): " + message;
    } else {
      auto body = json::parse(res.body);
      switch (e.kind) {
        case ExpectKind::kValue: {
          const auto& series = body.at("series");
          std::size_t with_points = 0;
          for (const auto& s : series) with_points += !s.at("points").empty();
          if (with_points == 0) {
            r.detail = "no data";
          } else if (series.size() > 1) {
            r.detail = "ambiguous: " + std::to_string(series.size()) + " series match";
          } else {
            r.actual = series[0].at("points")[0][1].get<double>();
          }
          break;
        }
        case ExpectKind::kSeriesCount:
          r.actual = static_cast<double>(body.at("series").size());
          break;
        case ExpectKind::kAnomalySpans: {
          const auto& spans = body.at("spans");
          r.actual = static_cast<double>(spans.size());
          if (e.cover_start) {
            bool covered = false;
            for (const auto& span : spans) {
              covered |= span.at("start").get<TimestampMs>() <= base + *e.cover_start &&
                         span.at("end").get<TimestampMs>() >= base + *e.cover_end;
            }
            r.detail = covered ? "covers scripted window" : "no span covers the scripted window";
            if (!covered) {
              report.details.push_back(r);
              continue;
            }
          }
          break;
        }
      }
    }
    if (r.actual) {
      r.passed = Compare(e, *r.actual);
      std::string expected = "expected " + std::string(OpSymbol(e.op)) + " " + FormatDouble(e.value);
      if (e.tolerance > 0) expected += " +/- " + FormatDouble(e.tolerance);
      r.detail = r.detail.empty() ? expected : expected + "; " + r.detail;
    }
    report.details.push_back(std::move(r));
  }
  for (const auto& d : report.details) (d.passed ? report.passed : report.failed)++;
  return report;
}

Scenario MaskingScenario() {
  Scenario s;
  s.name = "masking";
  // 1000 requests, one every 60 ms: 475 fast, 50 slow, 475 fast.
  const LabelMap labels = {{"service", "checkout"}};
  int i = 0;
  auto run = [&](int count, double ms) {
    for (int k = 0; k < count; ++k, ++i) {
      s.samples.push_back({i * 60LL, "request_latency", labels, MetricKind::kGauge, "ms", ms});
    }
  };
  run(475, 100);
  run(50, 3000);
  run(475, 100);
  const std::string sel = R"(request_latency{service="checkout"})";
  auto expect = [&](std::string name, ExpectKind kind, std::string agg, CompareOp op, double value,
                    double tolerance) {
    Expectation e;
    e.name = std::move(name);
    e.kind = kind;
    e.selector = sel;
    e.agg = std::move(agg);
    e.op = op;
    e.value = value;
    e.tolerance = tolerance;
    return e;
  };
  Expectation mean = expect("mean latency", ExpectKind::kValue, "mean", CompareOp::kApprox, 0.245, 0.0005);
  Expectation p99 = expect("p99 latency", ExpectKind::kValue, "quantile(0.99)", CompareOp::kEqual, 3.0, 0);
  Expectation spans = expect("anomaly spans", ExpectKind::kAnomalySpans, "", CompareOp::kEqual, 1, 0);
  spans.cover_start = 475 * 60;
  spans.cover_end = 524 * 60;
  s.expectations = {mean, p99, spans};
  return s;
}

}  // namespace obs::scenario
