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

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "obs/core/metric.hpp"

namespace obs::api {

enum class VizKind { kLine, kStat, kTable };

struct Panel {
  std::string title;
  std::string selector;
  std::string agg = "mean";
  TimestampMs step = 60'000;
  VizKind viz_kind = VizKind::kLine;
};

struct DashboardTemplate {
  std::string template_id;
  std::string title;
  std::vector<Panel> panels;

  /// Throws kValidationFailed: empty id, no panels, bad selector or agg.
  void Validate() const;
  nlohmann::json ToJson() const;
  static DashboardTemplate FromJson(const nlohmann::json& j);
};

/// system-overview, my-data and sustainability.
const std::vector<DashboardTemplate>& BuiltinTemplates();

}  // namespace obs::api
