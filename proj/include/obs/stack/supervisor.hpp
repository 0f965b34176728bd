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

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <sys/types.h>
#include <vector>

#include "obs/stack/stack.hpp"

namespace obs::stack {

struct ProcessSpec {
  std::string name;
  std::vector<std::string> argv;
};

/// The processes `stack run` starts for a plan: one `obs-server` hosting
/// every enabled store, processor and the api, one `obs-collector`. The
/// dashboard is served by the api and has no process of its own.
std::vector<ProcessSpec> ProcessesForPlan(const DeploymentPlan& plan,
                                          const std::filesystem::path& config_path,
                                          const std::filesystem::path& bin_dir);

struct SupervisorOptions {
  int max_restarts = 5;
  std::chrono::milliseconds restart_window{60'000};
  std::chrono::milliseconds poll_interval{100};
  std::chrono::milliseconds stop_grace{5'000};
};

/// Runs processes, restarting any that exit. A process exiting more than
/// `max_restarts` times within `restart_window` stops the whole stack.
class Supervisor {
 public:
  Supervisor(std::vector<ProcessSpec> specs, SupervisorOptions options = {});
  ~Supervisor();

  /// Blocks until `stop` becomes true (returns 0) or a process exhausts its
  /// restart budget or cannot be started (returns 2).
  int Run(const std::atomic<bool>& stop);

  int restarts(const std::string& name) const;

 private:
  struct Child {
    ProcessSpec spec;
    pid_t pid = -1;
    std::vector<std::chrono::steady_clock::time_point> exits;
    int restarts = 0;
  };

  bool Spawn(Child& child);
  void StopAll();

  std::vector<Child> children_;
  SupervisorOptions options_;
};

}  // namespace obs::stack
