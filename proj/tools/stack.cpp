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

// Blueprint tool: validate a stack config, print its deployment plan, run it.

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "env.hpp"
#include "obs/core/error.hpp"
#include "obs/stack/stack.hpp"
#include "obs/stack/supervisor.hpp"
#include "signals.hpp"

using namespace obs;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

EnvMap EnvFor(const stack::StackConfig& config, const std::string& override_path) {
  std::filesystem::path path = override_path.empty() ? std::filesystem::path(config.env_file)
                                                     : std::filesystem::path(override_path);
  if (path.empty() || !std::filesystem::exists(path)) return {};
  return LoadEnvFile(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stack"};
  app.require_subcommand(1);
  std::string config_path, env_file, out_path, bin_dir;

  auto* validate = app.add_subcommand("validate", "check a stack config");
  validate->add_option("--config", config_path)->required();
  validate->add_option("--env-file", env_file);

  auto* plan = app.add_subcommand("plan", "print the merged deployment plan");
  plan->add_option("--config", config_path)->required();
  plan->add_option("--env-file", env_file);
  plan->add_option("-o,--output", out_path);

  auto* run = app.add_subcommand("run", "start and supervise the enabled components");
  run->add_option("--config", config_path)->required();
  run->add_option("--env-file", env_file);
  run->add_option("--bin-dir", bin_dir, "where obs-server and obs-collector live");

  auto* components = app.add_subcommand("components", "component catalogue");
  components->require_subcommand(1);
  auto* list = components->add_subcommand("list", "list known components");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& name : stack::KnownComponents()) {
      std::string needs;
      for (const auto& r : stack::Requirements()) {
        if (r.component != name) continue;
        for (std::size_t i = 0; i < r.any_of.size(); ++i) needs += (i ? " or " : "") + r.any_of[i];
      }
      std::cout << name;
      if (name == "collector" || name == "dashboard") std::cout << " (mandatory)";
      if (!needs.empty()) std::cout << " requires " << needs;
      std::cout << "\n";
    }
    return kOk;
  }

  try {
    auto config = stack::StackConfig::Load(config_path);
    auto env = EnvFor(config, env_file);
    auto report = stack::ValidateConfig(config, env);
    if (validate->parsed()) {
      std::cout << report.Render();
      std::cout << (report.ok() ? "valid" : "invalid") << ": " << report.errors.size()
                << " error(s), " << report.warnings.size() << " warning(s)\n";
      return report.ok() ? kOk : kInvalid;
    }
    if (!report.ok()) {
      std::cerr << report.Render();
      return kInvalid;
    }
    auto deployment = stack::MergeComponents(config, env);
    if (plan->parsed()) {
      std::string text = deployment.Render();
      if (out_path.empty()) {
        std::cout << text;
      } else {
        std::ofstream(out_path, std::ios::binary) << text;
      }
      return kOk;
    }

    // run
    for (const auto& [k, v] : env) ::setenv(k.c_str(), v.c_str(), 0);
    std::filesystem::path bins = bin_dir.empty()
                                     ? std::filesystem::read_symlink("/proc/self/exe").parent_path()
                                     : std::filesystem::path(bin_dir);
    auto specs = stack::ProcessesForPlan(deployment, std::filesystem::absolute(config_path), bins);
    for (const auto& e : deployment.entries) {
      if (e.component == "dashboard") spdlog::info("dashboard: no process of its own, it reads the api");
    }
    auto signals = tools::BlockStopSignals();
    std::atomic<bool> stop{false};
    std::thread waiter([&] {
      tools::WaitForStopSignal(signals);
      stop = true;
    });
    stack::Supervisor supervisor(std::move(specs));
    int rc = supervisor.Run(stop);
    if (!stop) ::kill(::getpid(), SIGTERM);
    waiter.join();
    return rc;
  } catch (const Error& e) {
    std::cerr << ErrorCodeName(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::kValidationFailed ? kInvalid : kRuntime;
  }
}
