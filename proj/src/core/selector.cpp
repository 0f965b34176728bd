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

#include "obs/core/selector.hpp"

#include <algorithm>
#include <tuple>

#include "obs/core/error.hpp"
#include "obs/core/exposition.hpp"

namespace obs {
namespace {

[[noreturn]] void Fail(std::string_view text, std::string_view why) {
  throw Error(ErrorCode::kParseError,
              "bad selector '" + std::string(text) + "': " + std::string(why));
}

std::string Lower(std::string_view in) {
  std::string out(in);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool Compare(const LabelMatcher& m, std::string_view actual) {
  return m.op == MatchOp::kEqual ? actual == m.value : actual != m.value;
}

}  // namespace

bool LabelMatcher::Matches(const SeriesKey& series) const {
  auto actual = series.label(key);
  return Compare(*this, actual.value_or(std::string_view()));
}

bool LabelMatcher::Matches(const LabelMap& labels) const {
  auto it = labels.find(key);
  return Compare(*this, it == labels.end() ? std::string_view() : std::string_view(it->second));
}

bool Selector::Matches(const SeriesKey& key) const {
  if (!name.empty() && key.name() != name) return false;
  return std::all_of(matchers.begin(), matchers.end(),
                     [&](const LabelMatcher& m) { return m.Matches(key); });
}

bool Selector::MatchesLabels(const LabelMap& labels) const {
  return std::all_of(matchers.begin(), matchers.end(),
                     [&](const LabelMatcher& m) { return m.Matches(labels); });
}

std::string Selector::ToString() const {
  auto sorted = matchers;
  std::sort(sorted.begin(), sorted.end(), [](const LabelMatcher& a, const LabelMatcher& b) {
    return std::tie(a.key, a.op, a.value) < std::tie(b.key, b.op, b.value);
  });
  std::string out = name + "{";
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i) out += ',';
    out += sorted[i].key;
    out += sorted[i].op == MatchOp::kEqual ? "=\"" : "!=\"";
    out += EscapeLabelValue(sorted[i].value);
    out += '"';
  }
  out += '}';
  return out;
}

Selector Selector::Parse(std::string_view text) {
  Selector sel;
  std::size_t pos = 0;
  while (pos < text.size() && text[pos] == ' ') ++pos;
  std::size_t name_start = pos;
  while (pos < text.size() && text[pos] != '{' && text[pos] != ' ') ++pos;
  sel.name = Lower(text.substr(name_start, pos - name_start));
  if (!sel.name.empty() && !IsValidMetricName(sel.name)) Fail(text, "invalid metric name");
  while (pos < text.size() && text[pos] == ' ') ++pos;
  if (pos == text.size()) return sel;
  if (text[pos] != '{') Fail(text, "expected '{'");
  ++pos;
  while (true) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) Fail(text, "unterminated matcher list");
    if (text[pos] == '}') {
      ++pos;
      break;
    }
    if (!sel.matchers.empty()) {
      if (text[pos] != ',') Fail(text, "expected ','");
      ++pos;
      while (pos < text.size() && text[pos] == ' ') ++pos;
    }
    std::size_t key_start = pos;
    while (pos < text.size() && text[pos] != '=' && text[pos] != '!' && text[pos] != ' ') ++pos;
    LabelMatcher m;
    m.key = Lower(text.substr(key_start, pos - key_start));
    if (!IsValidLabelKey(m.key)) Fail(text, "invalid label key");
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (text.substr(pos, 2) == "!=") {
      m.op = MatchOp::kNotEqual;
      pos += 2;
    } else if (pos < text.size() && text[pos] == '=') {
      m.op = MatchOp::kEqual;
      pos += 1;
    } else {
      Fail(text, "expected '=' or '!='");
    }
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size() || text[pos] != '"') Fail(text, "matcher value must be quoted");
    ++pos;
    bool closed = false;
    while (pos < text.size()) {
      char c = text[pos++];
      if (c == '"') {
        closed = true;
        break;
      }
      if (c == '\\' && pos < text.size()) {
        char e = text[pos++];
        m.value += e == 'n' ? '\n' : e;
        continue;
      }
      m.value += c;
    }
    if (!closed) Fail(text, "unterminated matcher value");
    sel.matchers.push_back(std::move(m));
  }
  while (pos < text.size() && text[pos] == ' ') ++pos;
  if (pos != text.size()) Fail(text, "trailing characters");
  return sel;
}

Selector Selector::ForKey(const SeriesKey& key) {
  Selector sel;
  sel.name = key.name();
  for (const auto& [k, v] : key.labels()) sel.matchers.push_back({k, MatchOp::kEqual, v});
  return sel;
}

}  // namespace obs
