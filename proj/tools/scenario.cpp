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

// Drives a scenario through a running stack and reports each expectation.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "obs/core/error.hpp"
#include "obs/scenario/scenario.hpp"

using namespace obs;

int main(int argc, char** argv) {
  CLI::App app{"scenario"};
  app.require_subcommand(1);
  std::string file, builtin, api_url, token;
  bool realtime = false, as_json = false;

  auto* run = app.add_subcommand("run", "run a scenario against a stack");
  auto* source = run->add_option("--file", file, "scenario JSON file");
  run->add_option("--builtin", builtin, "built-in scenario name")->excludes(source);
  run->add_option("--api", api_url, "api base URL, e.g. http://127.0.0.1:8080")->required();
  run->add_option("--token", token, "bearer token; default $API_ADMIN_TOKEN");
  run->add_flag("--realtime", realtime, "send samples on the wall clock");
  run->add_flag("--json", as_json, "print the report as JSON");
  auto* list = app.add_subcommand("list", "list built-in scenarios");
  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    std::cout << "masking\n";
    return 0;
  }
  try {
    scenario::Scenario s;
    if (!file.empty()) {
      s = scenario::Scenario::Load(file);
    } else if (builtin == "masking") {
      s = scenario::MaskingScenario();
    } else {
      std::cerr << "give --file or --builtin masking\n";
      return 2;
    }
    scenario::RunnerOptions o;
    o.token = token;
    if (o.token.empty()) {
      if (const char* t = std::getenv("API_ADMIN_TOKEN")) o.token = t;
    }
    o.realtime = realtime;
    auto report = scenario::RunScenario(s, scenario::HttpTransport(api_url), o);
    std::cout << (as_json ? report.ToJson().dump(2) + "\n" : report.Render());
    return report.ok() ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << ErrorCodeName(e.code()) << ": " << e.what() << "\n";
    return 2;
  }
}
