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

#include <string>
#include <string_view>
#include <vector>

#include "obs/core/metric.hpp"

namespace obs {

enum class MatchOp { kEqual, kNotEqual };

struct LabelMatcher {
  std::string key;
  MatchOp op = MatchOp::kEqual;
  std::string value;

  // An absent label compares as the empty string.
  bool Matches(const SeriesKey& key) const;
  bool Matches(const LabelMap& labels) const;

  friend bool operator==(const LabelMatcher&, const LabelMatcher&) = default;
};

/// `name{k="v",k2!="w"}`. An empty name matches every metric name.
struct Selector {
  std::string name;
  std::vector<LabelMatcher> matchers;

  bool Matches(const SeriesKey& key) const;
  bool MatchesLabels(const LabelMap& labels) const;

  /// Canonical text form; matchers sorted by (key, op, value).
  std::string ToString() const;

  /// Throws Error(kParseError) on malformed input.
  static Selector Parse(std::string_view text);
  /// Equality matchers on every label of `key`.
  static Selector ForKey(const SeriesKey& key);

  friend bool operator==(const Selector&, const Selector&) = default;
};

}  // namespace obs
