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

#include <chrono>
#include <map>
#include <string>

namespace obs::net {

struct HttpResult {
  int status = 0;  // 0 when the request never got a response
  std::string body;
  std::string error;

  bool ok() const { return status >= 200 && status < 300; }
};

using Headers = std::multimap<std::string, std::string>;

HttpResult HttpGet(const std::string& url, const Headers& headers = {},
                   std::chrono::milliseconds timeout = std::chrono::seconds(5));
HttpResult HttpPost(const std::string& url, const std::string& body,
                    const std::string& content_type, const Headers& headers = {},
                    std::chrono::milliseconds timeout = std::chrono::seconds(5));
HttpResult HttpSend(const std::string& method, const std::string& url, const std::string& body,
                    const std::string& content_type, const Headers& headers = {},
                    std::chrono::milliseconds timeout = std::chrono::seconds(5));

}  // namespace obs::net
