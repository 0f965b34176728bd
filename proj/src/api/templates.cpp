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

#include "obs/api/templates.hpp"

#include "obs/core/error.hpp"
#include "obs/core/selector.hpp"
#include "obs/tsdb/rollup.hpp"

namespace obs::api {
namespace {

std::string_view VizName(VizKind k) {
  switch (k) {
    case VizKind::kLine: return "line";
    case VizKind::kStat: return "stat";
    case VizKind::kTable: return "table";
  }
  return "line";
}

VizKind ParseViz(const std::string& s) {
  if (s == "line") return VizKind::kLine;
  if (s == "stat") return VizKind::kStat;
  if (s == "table") return VizKind::kTable;
  throw Error(ErrorCode::kValidationFailed, "unknown viz_kind '" + s + "'");
}

}  // namespace

void DashboardTemplate::Validate() const {
  if (template_id.empty()) throw Error(ErrorCode::kValidationFailed, "template_id is empty");
  if (panels.empty()) throw Error(ErrorCode::kValidationFailed, "dashboard has no panels");
  for (const auto& p : panels) {
    try {
      Selector::Parse(p.selector);
      tsdb::AggSpec::Parse(p.agg);
    } catch (const Error& e) {
      throw Error(ErrorCode::kValidationFailed, "panel '" + p.title + "': " + e.what());
    }
    if (p.step <= 0) throw Error(ErrorCode::kValidationFailed, "panel step must be positive");
  }
}

nlohmann::json DashboardTemplate::ToJson() const {
  nlohmann::json panels_json = nlohmann::json::array();
  for (const auto& p : panels) {
    panels_json.push_back({{"title", p.title},
                           {"selector", p.selector},
                           {"agg", p.agg},
                           {"step_ms", p.step},
                           {"viz_kind", VizName(p.viz_kind)}});
  }
  return {{"template_id", template_id}, {"title", title}, {"panels", panels_json}};
}

DashboardTemplate DashboardTemplate::FromJson(const nlohmann::json& j) {
  DashboardTemplate t;
  try {
    t.template_id = j.at("template_id").get<std::string>();
    t.title = j.value("title", t.template_id);
    for (const auto& p : j.at("panels")) {
      Panel panel;
      panel.title = p.value("title", "");
      panel.selector = p.at("selector").get<std::string>();
      panel.agg = p.value("agg", "mean");
      panel.step = p.value("step_ms", TimestampMs{60'000});
      panel.viz_kind = ParseViz(p.value("viz_kind", "line"));
      t.panels.push_back(std::move(panel));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kValidationFailed, std::string("dashboard: ") + e.what());
  }
  t.Validate();
  return t;
}

const std::vector<DashboardTemplate>& BuiltinTemplates() {
  static const std::vector<DashboardTemplate> kTemplates = {
      {"system-overview",
       "System overview",
       {{"CPU utilization", "cpu_utilization", "mean", 60'000, VizKind::kLine},
        {"Memory used", "memory_used_bytes", "max", 60'000, VizKind::kLine},
        {"Samples accepted", "gateway_samples_accepted_total", "max", 60'000, VizKind::kStat},
        {"Collector overhead", "collector_cpu_seconds", "max", 300'000, VizKind::kTable}}},
      {"my-data",
       "My data",
       {{"CPU utilization", "cpu_utilization", "mean", 60'000, VizKind::kLine},
        {"Process CPU", "process_cpu_seconds", "max", 60'000, VizKind::kLine},
        {"Latest power", "estimated_power_watts", "mean", 60'000, VizKind::kStat}}},
      {"sustainability",
       "Sustainability",
       {{"Estimated power", "estimated_power_watts", "mean", 60'000, VizKind::kLine},
        {"Energy used", "estimated_energy_joules", "max", 3'600'000, VizKind::kStat},
        {"Energy by host", "estimated_energy_joules", "max", 3'600'000, VizKind::kTable}}},
  };
  return kTemplates;
}

}  // namespace obs::api
