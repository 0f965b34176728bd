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

#include "obs/net/http.hpp"

#include <httplib.h>

#include "obs/core/config.hpp"
#include "obs/core/error.hpp"

namespace obs::net {

HttpResult HttpSend(const std::string& method, const std::string& url, const std::string& body,
                    const std::string& content_type, const Headers& headers,
                    std::chrono::milliseconds timeout) {
  HttpResult out;
  HttpUrl parsed;
  try {
    parsed = HttpUrl::Parse(url);
  } catch (const Error& e) {
    out.error = e.what();
    return out;
  }
  httplib::Client client(parsed.base);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers h(headers.begin(), headers.end());
  httplib::Result res;
  if (method == "GET") {
    res = client.Get(parsed.path, h);
  } else if (method == "POST") {
    res = client.Post(parsed.path, h, body, content_type);
  } else if (method == "PUT") {
    res = client.Put(parsed.path, h, body, content_type);
  } else if (method == "DELETE") {
    res = client.Delete(parsed.path, h, body, content_type);
  } else {
    out.error = "unsupported method " + method;
    return out;
  }
  if (!res) {
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

HttpResult HttpGet(const std::string& url, const Headers& headers,
                   std::chrono::milliseconds timeout) {
  return HttpSend("GET", url, "", "", headers, timeout);
}

HttpResult HttpPost(const std::string& url, const std::string& body,
                    const std::string& content_type, const Headers& headers,
                    std::chrono::milliseconds timeout) {
  return HttpSend("POST", url, body, content_type, headers, timeout);
}

}  // namespace obs::net
