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
#include <string>
#include <string_view>
#include <vector>

#include "obs/core/config.hpp"
#include "obs/core/selector.hpp"

namespace obs::api {

enum class Role { kAdmin, kUser };

struct Principal {
  std::string token_id;  // never the token itself
  Role role = Role::kUser;
  std::vector<LabelMatcher> scope;

  bool is_admin() const { return role == Role::kAdmin; }
  /// True when every scope matcher holds for `labels`.
  bool Permits(const LabelMap& labels) const;
  bool Permits(const SeriesKey& key) const;
  /// Equality scope matchers as labels, forced onto anything the user writes.
  LabelMap ForcedLabels() const;
};

/// Tokens loaded from the environment file.
///
///   API_ADMIN_TOKEN=...
///   API_USER_TOKENS=tok7:user_id=u7,tok9:user_id=u9,tok9:team=b
///
/// A token listed more than once collects every binding.
class Credentials {
 public:
  /// Throws kValidationFailed on malformed bindings or a token reused
  /// across roles.
  static Credentials FromEnv(const EnvMap& env);

  void AddAdmin(const std::string& token);
  void AddUser(const std::string& token, LabelMatcher binding);

  /// Resolves an `Authorization` header value (`Bearer <token>`). Throws
  /// kUnauthenticated.
  Principal Authorize(std::string_view authorization) const;

  std::size_t size() const { return principals_.size(); }

 private:
  std::map<std::string, Principal, std::less<>> principals_;
};

/// Admin: `requested` unchanged. User: `requested` with every scope matcher
/// added. Throws kScopeConflict when a requested matcher on a scoped label
/// contradicts the scope.
Selector ScopeSelector(const Principal& principal, const Selector& requested);

}  // namespace obs::api
