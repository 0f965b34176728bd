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

// Brute-force reference computations used only by tests. None of these call
// into the library code they are used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace obs::testing {

/// Nearest-rank quantile with q = numer / denom, using integer arithmetic for
/// the rank: the smallest k with k * denom >= numer * n.
inline double QuantileOracle(std::vector<double> values, std::int64_t numer, std::int64_t denom) {
  std::sort(values.begin(), values.end());
  auto n = static_cast<std::int64_t>(values.size());
  std::int64_t k = 1;
  while (k * denom < numer * n) ++k;
  return values[static_cast<std::size_t>(k - 1)];
}

/// Replays the counter-reset rule one sample at a time. nullopt marks a
/// rejected (negative) sample, which leaves the state untouched.
inline std::vector<std::optional<double>> CounterReplayOracle(const std::vector<double>& raw) {
  std::vector<std::optional<double>> out;
  bool seen = false;
  double last = 0, adjusted = 0;
  for (double v : raw) {
    if (v < 0) {
      out.push_back(std::nullopt);
      continue;
    }
    if (!seen) {
      adjusted = v;
      seen = true;
    } else if (v >= last) {
      adjusted += v - last;
    } else {
      adjusted += v;
    }
    last = v;
    out.push_back(adjusted);
  }
  return out;
}

/// Pearson correlation computed from the textbook two-pass formula.
inline double PearsonOracle(const std::vector<double>& a, const std::vector<double>& b) {
  double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// Median by full sort.
inline double MedianOracle(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

/// Lexicographically smallest ordering of `nodes` in which every node comes
/// after all of its dependencies, found by enumerating every permutation.
inline std::vector<std::string> SmallestTopologicalOrderOracle(
    std::vector<std::string> nodes, const std::multimap<std::string, std::string>& depends_on) {
  std::sort(nodes.begin(), nodes.end());
  do {
    bool ok = true;
    for (std::size_t i = 0; i < nodes.size() && ok; ++i) {
      auto [lo, hi] = depends_on.equal_range(nodes[i]);
      for (auto it = lo; it != hi && ok; ++it) {
        auto pos = std::find(nodes.begin(), nodes.end(), it->second);
        if (pos != nodes.end() && static_cast<std::size_t>(pos - nodes.begin()) > i) ok = false;
      }
    }
    if (ok) return nodes;  // permutations are visited in lexicographic order
  } while (std::next_permutation(nodes.begin(), nodes.end()));
  return {};
}

}  // namespace obs::testing
