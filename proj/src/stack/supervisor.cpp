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

#include "obs/stack/supervisor.hpp"

#include <csignal>
#include <cstring>
#include <spawn.h>
#include <sys/wait.h>
#include <thread>

#include <spdlog/spdlog.h>

extern char** environ;

namespace obs::stack {

std::vector<ProcessSpec> ProcessesForPlan(const DeploymentPlan& plan,
                                          const std::filesystem::path& config_path,
                                          const std::filesystem::path& bin_dir) {
  static const std::set<std::string> kServer = {"alerting", "analytics", "api",
                                                "gateway",  "metastore", "tsdb"};
  std::vector<ProcessSpec> out;
  std::string server_components;
  bool server_added = false;
  for (const auto& e : plan.entries) {
    if (kServer.contains(e.component)) {
      if (!server_components.empty()) server_components += ',';
      server_components += e.component;
    }
  }
  for (const auto& e : plan.entries) {
    if (kServer.contains(e.component) && !server_added) {
      out.push_back({"server",
                     {(bin_dir / "obs-server").string(), "--config", config_path.string(),
                      "--components", server_components}});
      server_added = true;
    } else if (e.component == "collector") {
      out.push_back(
          {"collector", {(bin_dir / "obs-collector").string(), "--config", config_path.string()}});
    }
  }
  return out;
}

Supervisor::Supervisor(std::vector<ProcessSpec> specs, SupervisorOptions options)
    : options_(options) {
  for (auto& s : specs) {
    Child c;
    c.spec = std::move(s);
    children_.push_back(std::move(c));
  }
}

Supervisor::~Supervisor() { StopAll(); }

bool Supervisor::Spawn(Child& child) {
  std::vector<char*> argv;
  for (auto& a : child.spec.argv) argv.push_back(a.data());
  argv.push_back(nullptr);
  pid_t pid = -1;
  int rc = ::posix_spawn(&pid, argv[0], nullptr, nullptr, argv.data(), environ);
  if (rc != 0) {
    spdlog::error("supervisor: cannot start {} ({}): {}", child.spec.name, child.spec.argv[0],
                  std::strerror(rc));
    return false;
  }
  child.pid = pid;
  spdlog::info("supervisor: started {} as pid {}", child.spec.name, pid);
  return true;
}

int Supervisor::Run(const std::atomic<bool>& stop) {
  for (auto& c : children_) {
    if (!Spawn(c)) {
      StopAll();
      return 2;
    }
  }
  while (!stop.load()) {
    int status = 0;
    pid_t pid = ::waitpid(-1, &status, WNOHANG);
    if (pid <= 0) {
      std::this_thread::sleep_for(options_.poll_interval);
      continue;
    }
    for (auto& c : children_) {
      if (c.pid != pid) continue;
      c.pid = -1;
      auto now = std::chrono::steady_clock::now();
      std::erase_if(c.exits, [&](auto t) { return now - t > options_.restart_window; });
      c.exits.push_back(now);
      spdlog::warn("supervisor: {} exited with status {}", c.spec.name,
                   WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status));
      if (static_cast<int>(c.exits.size()) > options_.max_restarts) {
        spdlog::error("supervisor: {} crashed {} times within {} s, giving up", c.spec.name,
                      c.exits.size(), options_.restart_window.count() / 1000);
        StopAll();
        return 2;
      }
      ++c.restarts;
      if (!Spawn(c)) {
        StopAll();
        return 2;
      }
    }
  }
  StopAll();
  return 0;
}

void Supervisor::StopAll() {
  for (auto& c : children_) {
    if (c.pid > 0) ::kill(c.pid, SIGTERM);
  }
  auto deadline = std::chrono::steady_clock::now() + options_.stop_grace;
  for (auto& c : children_) {
    if (c.pid <= 0) continue;
    int status = 0;
    while (::waitpid(c.pid, &status, WNOHANG) == 0) {
      if (std::chrono::steady_clock::now() > deadline) {
        ::kill(c.pid, SIGKILL);
        ::waitpid(c.pid, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    c.pid = -1;
  }
}

int Supervisor::restarts(const std::string& name) const {
  for (const auto& c : children_) {
    if (c.spec.name == name) return c.restarts;
  }
  return 0;
}

}  // namespace obs::stack
