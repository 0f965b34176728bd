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

// Collection-layer agent: samples this host, serves /metrics and/or pushes
// to the gateway.

#include <chrono>
#include <iostream>
#include <memory>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "env.hpp"
#include "obs/collector/collector.hpp"
#include "obs/core/error.hpp"
#include "obs/core/exposition.hpp"
#include "obs/net/http.hpp"
#include "signals.hpp"

using namespace obs;

int main(int argc, char** argv) {
  CLI::App app{"obs-collector"};
  std::string config_path, replay, env_file;
  bool once = false;
  app.add_option("--config", config_path, "stack config file")->required();
  app.add_option("--replay", replay, "replay snapshots from a file instead of /proc");
  app.add_option("--env-file", env_file, "env file holding COLLECTOR_TOKEN");
  app.add_flag("--once", once, "take one sample, print it and exit");
  CLI11_PARSE(app, argc, argv);

  auto stop_signals = tools::BlockStopSignals();
  try {
    auto config = ConfigFile::Load(config_path);
    auto opts = collector::CollectorOptions::FromConfig(config);
    if (env_file.empty()) env_file = tools::ResolveNear(config_path, config.GetOr("env_file", ""));
    opts.token = tools::LoadEnv(env_file, {"COLLECTOR_TOKEN"})["COLLECTOR_TOKEN"];

    std::unique_ptr<collector::SnapshotProvider> provider;
    collector::ReplayProvider* replay_provider = nullptr;
    if (!replay.empty()) {
      auto p = std::make_unique<collector::ReplayProvider>(collector::ReplayProvider::FromFile(replay));
      replay_provider = p.get();
      provider = std::move(p);
    } else {
      provider = std::make_unique<collector::ProcProvider>();
    }
    collector::Collector agent(*provider, opts);

    if (once) {
      for (const auto& s : agent.Tick()) std::cout << FormatExpositionLine(s);
      return 0;
    }

    std::unique_ptr<collector::PullServer> pull;
    if (!opts.listen_addr.empty()) {
      auto colon = opts.listen_addr.rfind(':');
      pull = std::make_unique<collector::PullServer>(agent);
      pull->Start(opts.listen_addr.substr(0, colon), std::stoi(opts.listen_addr.substr(colon + 1)));
    }
    net::Headers headers;
    if (!opts.token.empty()) headers.emplace("Authorization", "Bearer " + opts.token);
    collector::PostFn post = [&](const std::string& body) {
      return net::HttpPost(opts.push_url, body, "text/plain", headers).ok();
    };

    std::atomic<bool> stop{false};
    std::thread waiter([&] {
      tools::WaitForStopSignal(stop_signals);
      stop = true;
    });
    while (!stop) {
      auto batch = agent.Tick();
      if (!opts.push_url.empty() && !batch.empty()) agent.Push(batch, post);
      if (replay_provider && replay_provider->exhausted()) break;
      auto until = std::chrono::steady_clock::now() + std::chrono::seconds(opts.interval_seconds);
      while (!stop && std::chrono::steady_clock::now() < until) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
    }
    if (pull) pull->Stop();
    if (!stop) ::kill(::getpid(), SIGTERM);
    waiter.join();
    return 0;
  } catch (const Error& e) {
    spdlog::error("obs-collector: {}: {}", ErrorCodeName(e.code()), e.what());
    return 2;
  }
}
