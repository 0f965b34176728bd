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

// Hosts the stores, the gateway, analytics, alerting and the HTTP api of
// one stack in a single process.

#include <memory>
#include <set>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "env.hpp"
#include "obs/alerting/alerting.hpp"
#include "obs/analytics/analytics.hpp"
#include "obs/api/service.hpp"
#include "obs/core/error.hpp"
#include "obs/core/periodic.hpp"
#include "obs/gateway/gateway.hpp"
#include "obs/metastore/metastore.hpp"
#include "obs/tsdb/tsdb.hpp"
#include "signals.hpp"

using namespace obs;

int main(int argc, char** argv) {
  CLI::App app{"obs-server"};
  std::string config_path, components_arg, env_file;
  app.add_option("--config", config_path, "stack config file")->required();
  app.add_option("--components", components_arg, "comma list; default: from the config");
  app.add_option("--env-file", env_file, "env file; default: env_file from the config");
  CLI11_PARSE(app, argc, argv);

  auto stop_signals = tools::BlockStopSignals();
  try {
    auto config = ConfigFile::Load(config_path);
    std::set<std::string> enabled;
    for (const auto& c : SplitList(components_arg.empty() ? config.GetOr("components", "")
                                                          : components_arg)) {
      enabled.insert(c);
    }
    if (env_file.empty()) env_file = tools::ResolveNear(config_path, config.GetOr("env_file", ""));
    auto env = tools::LoadEnv(env_file, {"API_ADMIN_TOKEN", "API_USER_TOKENS", "API_LISTEN_ADDR",
                                         "API_TEST_MODE"});

    std::unique_ptr<tsdb::Tsdb> db;
    if (enabled.contains("tsdb")) {
      tsdb::TsdbOptions o;
      o.data_dir = tools::ResolveNear(config_path, config.GetOr("tsdb.data_dir", ""));
      o.retention.raw = config.GetInt("tsdb.retention.raw_hours", 24) * tsdb::kHour;
      o.retention.rollup_1m = config.GetInt("tsdb.retention.rollup_1m_days", 7) * tsdb::kDay;
      o.retention.rollup_1h = config.GetInt("tsdb.retention.rollup_1h_days", 90) * tsdb::kDay;
      db = std::make_unique<tsdb::Tsdb>(o);
    }
    std::unique_ptr<metastore::Metastore> meta;
    if (enabled.contains("metastore")) {
      metastore::MetastoreOptions o;
      o.file = tools::ResolveNear(config_path, config.GetOr("metastore.file", ""));
      meta = std::make_unique<metastore::Metastore>(o);
    }
    std::unique_ptr<gateway::Gateway> gw;
    std::unique_ptr<gateway::Scraper> scraper;
    if (enabled.contains("gateway")) {
      gw = std::make_unique<gateway::Gateway>(db.get(), meta.get());
      auto targets = gateway::ParseScrapeTargets(config);
      if (!targets.empty()) {
        scraper = std::make_unique<gateway::Scraper>(*gw, std::move(targets));
        scraper->Start();
      }
    }
    std::unique_ptr<analytics::Analytics> an;
    std::unique_ptr<PeriodicTask> cycle;
    if (enabled.contains("analytics") && db) {
      auto opts = analytics::AnalyticsOptions::FromConfig(config);
      an = std::make_unique<analytics::Analytics>(*db, meta.get(), opts);
      cycle = std::make_unique<PeriodicTask>(
          "distill", std::chrono::seconds(opts.cycle_interval_seconds),
          [&an] { an->DistillCycle(WallClockMs()); });
      cycle->Start();
    }
    std::unique_ptr<alerting::AlertManager> alerts;
    std::unique_ptr<PeriodicTask> evaluator;
    if (enabled.contains("alerting") && db) {
      alerts = std::make_unique<alerting::AlertManager>(*db, an.get(), meta.get(),
                                                        alerting::AlertingOptions::FromConfig(config));
      evaluator = std::make_unique<PeriodicTask>("alerting", std::chrono::seconds(1),
                                                 [&alerts] { alerts->Tick(WallClockMs()); });
      evaluator->Start();
    }

    // The HTTP front end also carries ingest, so it runs whenever the
    // gateway does, with query endpoints limited to enabled components.
    std::unique_ptr<api::ApiService> service;
    std::unique_ptr<api::ApiServer> server;
    if (enabled.contains("api") || gw) {
      api::ApiOptions o;
      o.credentials = api::Credentials::FromEnv(env);
      o.test_mode = env["API_TEST_MODE"] == "1";
      api::ApiBackends b{db.get(), meta.get(), gw.get(), an.get(), alerts.get()};
      if (!enabled.contains("api")) b = api::ApiBackends{nullptr, nullptr, gw.get(), nullptr, nullptr};
      service = std::make_unique<api::ApiService>(b, std::move(o));
      std::string addr = env["API_LISTEN_ADDR"];
      if (addr.empty()) addr = config.GetOr("api.listen_addr", "127.0.0.1:8080");
      if (addr.find("${") != std::string::npos) addr = "127.0.0.1:8080";
      auto [host, port] = api::ParseListenAddr(addr);
      server = std::make_unique<api::ApiServer>(*service);
      server->Start(host, port);
    }

    int sig = tools::WaitForStopSignal(stop_signals);
    spdlog::info("obs-server: signal {}, shutting down", sig);
    if (server) server->Stop();
    if (evaluator) evaluator->Stop();
    if (cycle) cycle->Stop();
    if (scraper) scraper->Stop();
    if (alerts) alerts->Drain();
    if (db) db->Flush();
    return 0;
  } catch (const Error& e) {
    spdlog::error("obs-server: {}: {}", ErrorCodeName(e.code()), e.what());
    return 2;
  }
}
