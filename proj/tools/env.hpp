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

#include <cstdlib>
#include <filesystem>
#include <initializer_list>

#include "obs/core/config.hpp"

namespace obs::tools {

// The env file (when it exists) with the process environment layered on
// top for the names a tool reads.
inline EnvMap LoadEnv(const std::filesystem::path& env_file,
                      std::initializer_list<const char*> names) {
  EnvMap env;
  if (!env_file.empty() && std::filesystem::exists(env_file)) env = LoadEnvFile(env_file);
  for (const char* name : names) {
    if (const char* v = std::getenv(name)) env[name] = v;
  }
  return env;
}

inline std::filesystem::path ResolveNear(const std::filesystem::path& config,
                                         const std::string& value) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  return p.is_absolute() ? p : config.parent_path() / p;
}

}  // namespace obs::tools
