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

#include "obs/api/auth.hpp"

#include <algorithm>

#include "obs/core/error.hpp"

namespace obs::api {

bool Principal::Permits(const LabelMap& labels) const {
  return std::all_of(scope.begin(), scope.end(),
                     [&](const LabelMatcher& m) { return m.Matches(labels); });
}

bool Principal::Permits(const SeriesKey& key) const {
  return std::all_of(scope.begin(), scope.end(),
                     [&](const LabelMatcher& m) { return m.Matches(key); });
}

LabelMap Principal::ForcedLabels() const {
  LabelMap out;
  for (const auto& m : scope) {
    if (m.op == MatchOp::kEqual) out[m.key] = m.value;
  }
  return out;
}

Credentials Credentials::FromEnv(const EnvMap& env) {
  Credentials c;
  if (auto it = env.find("API_ADMIN_TOKEN"); it != env.end() && !it->second.empty()) {
    c.AddAdmin(it->second);
  }
  if (auto it = env.find("API_USER_TOKENS"); it != env.end()) {
    for (const auto& item : SplitList(it->second)) {
      auto colon = item.find(':');
      auto eq = item.find('=', colon == std::string::npos ? 0 : colon);
      if (colon == std::string::npos || colon == 0 || eq == std::string::npos ||
          eq == colon + 1) {
        throw Error(ErrorCode::kValidationFailed,
                    "API_USER_TOKENS entry must be token:label=value");
      }
      std::string label = item.substr(colon + 1, eq - colon - 1);
      if (!IsValidLabelKey(label)) {
        throw Error(ErrorCode::kValidationFailed, "bad scope label '" + label + "'");
      }
      c.AddUser(item.substr(0, colon), LabelMatcher{label, MatchOp::kEqual, item.substr(eq + 1)});
    }
  }
  return c;
}

void Credentials::AddAdmin(const std::string& token) {
  auto [it, inserted] = principals_.try_emplace(token);
  if (!inserted && !it->second.is_admin()) {
    throw Error(ErrorCode::kValidationFailed, "token used for both admin and user");
  }
  it->second.token_id = "admin";
  it->second.role = Role::kAdmin;
}

void Credentials::AddUser(const std::string& token, LabelMatcher binding) {
  auto [it, inserted] = principals_.try_emplace(token);
  Principal& p = it->second;
  if (!inserted && p.is_admin()) {
    throw Error(ErrorCode::kValidationFailed, "token used for both admin and user");
  }
  if (inserted) p.token_id = "user:" + binding.key + "=" + binding.value;
  for (const auto& m : p.scope) {
    if (m.key == binding.key && m.value != binding.value) {
      throw Error(ErrorCode::kValidationFailed,
                  "token bound to two values of '" + binding.key + "'");
    }
  }
  if (std::find(p.scope.begin(), p.scope.end(), binding) == p.scope.end()) {
    p.scope.push_back(std::move(binding));
  }
}

Principal Credentials::Authorize(std::string_view authorization) const {
  constexpr std::string_view kBearer = "Bearer ";
  if (authorization.substr(0, kBearer.size()) != kBearer) {
    throw Error(ErrorCode::kUnauthenticated, "missing bearer token");
  }
  auto token = TrimView(authorization.substr(kBearer.size()));
  auto it = principals_.find(token);
  if (token.empty() || it == principals_.end()) {
    throw Error(ErrorCode::kUnauthenticated, "unknown token");
  }
  return it->second;
}

Selector ScopeSelector(const Principal& principal, const Selector& requested) {
  if (principal.is_admin()) return requested;
  Selector out = requested;
  for (const auto& s : principal.scope) {
    for (const auto& r : requested.matchers) {
      if (r.key != s.key) continue;
      bool conflict = false;
      if (s.op == MatchOp::kEqual) {
        conflict = r.op == MatchOp::kEqual ? r.value != s.value : r.value == s.value;
      } else {
        conflict = r.op == MatchOp::kEqual && r.value == s.value;
      }
      if (conflict) {
        throw Error(ErrorCode::kScopeConflict,
                    "selector matcher on '" + r.key + "' is outside the caller's scope");
      }
    }
    if (std::find(out.matchers.begin(), out.matchers.end(), s) == out.matchers.end()) {
      out.matchers.push_back(s);
    }
  }
  return out;
}

}  // namespace obs::api
