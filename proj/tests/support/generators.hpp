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

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "obs/core/metric.hpp"

namespace obs::testing {

inline std::string RandomIdent(std::mt19937_64& rng, bool allow_colon) {
  static constexpr char kFirst[] = "abcdefghijklmnopqrstuvwxyz_";
  static constexpr char kRest[] = "abcdefghijklmnopqrstuvwxyz0123456789_:";
  std::uniform_int_distribution<int> len(1, 12);
  std::string out(1, kFirst[rng() % (sizeof(kFirst) - 1)]);
  int n = len(rng);
  std::size_t rest = sizeof(kRest) - (allow_colon ? 1 : 2);
  for (int i = 1; i < n; ++i) out += kRest[rng() % rest];
  return out;
}

inline std::string RandomLabelValue(std::mt19937_64& rng) {
  static constexpr char kChars[] = "abcXYZ019 _-./\"\\\n,{}=#\t";
  std::uniform_int_distribution<int> len(0, 10);
  std::string out;
  int n = len(rng);
  for (int i = 0; i < n; ++i) {
    if (rng() % 16 == 0) {
      out += "\xc3\xa9";  // é
    } else {
      out += kChars[rng() % (sizeof(kChars) - 1)];
    }
  }
  return out;
}

inline double RandomFiniteDouble(std::mt19937_64& rng) {
  switch (rng() % 4) {
    case 0: return static_cast<double>(static_cast<std::int64_t>(rng() % 2000001) - 1000000);
    case 1: return std::uniform_real_distribution<double>(-1e3, 1e3)(rng);
    case 2: {
      double d;
      do {
        d = std::bit_cast<double>(rng());
      } while (!std::isfinite(d));
      return d;
    }
    default: return std::uniform_real_distribution<double>(0, 1)(rng);
  }
}

inline MetricSample RandomSample(std::mt19937_64& rng) {
  static constexpr CanonicalUnit kUnits[] = {
      CanonicalUnit::kSeconds, CanonicalUnit::kBytes, CanonicalUnit::kJoules,
      CanonicalUnit::kWatts,   CanonicalUnit::kCelsius, CanonicalUnit::kRatio,
      CanonicalUnit::kCount,   CanonicalUnit::kNone};
  static constexpr MetricKind kKinds[] = {MetricKind::kGauge, MetricKind::kCounter,
                                          MetricKind::kEvent};
  LabelMap labels;
  int n = static_cast<int>(rng() % 6);
  for (int i = 0; i < n; ++i) labels[RandomIdent(rng, false)] = RandomLabelValue(rng);
  MetricSample s;
  s.key = SeriesKey::Canonicalize(RandomIdent(rng, true), labels);
  s.value = RandomFiniteDouble(rng);
  s.timestamp = 1 + static_cast<TimestampMs>(rng() % 4'000'000'000'000ULL);
  CanonicalUnit unit = kUnits[rng() % 8];
  s.unit = Unit{unit, std::string(CanonicalSymbol(unit))};
  s.kind = kKinds[rng() % 3];
  return s;
}

}  // namespace obs::testing
