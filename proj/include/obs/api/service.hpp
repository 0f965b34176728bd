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

#include <map>
#include <memory>
#include <string>
#include <thread>
#include <utility>

#include "obs/api/auth.hpp"
#include "obs/core/metric.hpp"
#include "obs/core/self_metrics.hpp"

namespace httplib {
class Server;
}
namespace obs::tsdb {
class Tsdb;
}
namespace obs::metastore {
class Metastore;
}
namespace obs::gateway {
class Gateway;
}
namespace obs::analytics {
class Analytics;
}
namespace obs::alerting {
class AlertManager;
}

namespace obs::api {

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Any of these may be null; endpoints needing a missing one answer 503.
struct ApiBackends {
  tsdb::Tsdb* tsdb = nullptr;
  metastore::Metastore* metastore = nullptr;
  gateway::Gateway* gateway = nullptr;
  analytics::Analytics* analytics = nullptr;
  alerting::AlertManager* alerting = nullptr;
};

struct ApiOptions {
  Credentials credentials;
  // Honors the X-Virtual-Now-Ms header so scripted scenarios can ingest
  // and query on a virtual clock.
  bool test_mode = false;
  Clock clock = WallClockMs;
};

/// Routes /api/v1 requests. Stateless apart from metrics, so one instance
/// serves every connection.
class ApiService {
 public:
  ApiService(ApiBackends backends, ApiOptions options);

  ApiResponse Handle(const ApiRequest& request);

  SelfMetrics& metrics() { return metrics_; }

 private:
  ApiResponse Route(const ApiRequest& request);

  ApiBackends backends_;
  ApiOptions options_;
  SelfMetrics metrics_;
};

/// HTTP/1.1 front end for an ApiService.
class ApiServer {
 public:
  explicit ApiServer(ApiService& service);
  ~ApiServer();

  /// Binds and starts serving in the background. Port 0 picks a free
  /// port; returns the bound port. Throws kIoError.
  int Start(const std::string& host, int port);
  void Stop();

 private:
  ApiService& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

/// `host:port`; a bare port binds 0.0.0.0. Throws kInvalidArgument.
std::pair<std::string, int> ParseListenAddr(std::string_view addr);

}  // namespace obs::api
