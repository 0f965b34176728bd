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

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "obs/core/config.hpp"

namespace obs::stack {

/// Every component a stack may enable, alphabetically.
const std::vector<std::string>& KnownComponents();

/// `component` needs at least one of `any_of` enabled.
struct Requirement {
  std::string component;
  std::vector<std::string> any_of;
};
const std::vector<Requirement>& Requirements();

/// `before` starts ahead of `after` when both are enabled. Includes every
/// requirement edge plus ordering-only edges.
struct StartupEdge {
  std::string before;
  std::string after;
};
const std::vector<StartupEdge>& StartupEdges();

struct StackConfig {
  std::set<std::string> components;
  ConfigFile config;
  std::filesystem::path env_file;  // resolved against the config directory
  std::filesystem::path source;

  /// Reads `components = ...` and `env_file = ...` from the top level.
  /// Throws kFileNotFound or kParseError.
  static StackConfig Load(const std::filesystem::path& path);
  static StackConfig Parse(std::string_view text, const std::filesystem::path& base_dir = ".");
};

struct Finding {
  std::string path;  // config key the finding is about, e.g. `components`
  int line = 0;      // 0 when not tied to a line
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> errors;
  std::vector<Finding> warnings;

  bool ok() const { return errors.empty(); }
  /// One `error: path (line n): message` line per finding.
  std::string Render() const;
};

/// Checks mandatory layers, dependency closure and per-component settings.
/// `env` is the loaded env file, used to spot inlined secrets.
ValidationReport ValidateConfig(const StackConfig& config, const EnvMap& env);

/// Kahn's algorithm over the enabled components, ties broken
/// alphabetically.
std::vector<std::string> StartupOrder(const std::set<std::string>& components);

/// True for env names that hold credentials (TOKEN, SECRET, PASSWORD, KEY).
bool IsSecretName(std::string_view name);

struct PlanEntry {
  std::string component;
  int step = 0;
  std::vector<std::string> depends_on;
  std::map<std::string, std::string> config;  // keys without the component prefix
  std::vector<std::string> env;                // variable names, referenced as ${NAME}
};

struct DeploymentPlan {
  std::string env_file;
  std::vector<PlanEntry> entries;

  /// Deterministic text form in the same sectioned format as the config.
  std::string Render() const;
};

/// Throws kValidationFailed (with the rendered report) if validation fails.
DeploymentPlan MergeComponents(const StackConfig& config, const EnvMap& env);

}  // namespace obs::stack
