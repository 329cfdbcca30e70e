/* Copyright 2026 The evsparse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "evsparse/events.hpp"
#include "evsparse/sparse_map.hpp"

namespace evsparse::testing {

/// Edge-like random stream: a cursor drifts over the sensor and emits events
/// in a small neighbourhood, with occasional jumps and polarity flips.
inline EventStream random_stream(uint64_t seed, int width, int height, int count) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<uint64_t>(n)); };
  EventStream s{width, height, {}};
  int cx = pick(width), cy = pick(height);
  int64_t t = 0;
  for (int i = 0; i < count; ++i) {
    if (pick(50) == 0) {
      cx = pick(width);
      cy = pick(height);
    }
    cx = std::clamp(cx + pick(3) - 1, 0, width - 1);
    cy = std::clamp(cy + pick(3) - 1, 0, height - 1);
    const int x = std::clamp(cx + pick(5) - 2, 0, width - 1);
    const int y = std::clamp(cy + pick(5) - 2, 0, height - 1);
    t += pick(4);
    s.events.push_back({x, y, t, static_cast<int8_t>(pick(3) == 0 ? -1 : 1)});
  }
  return s;
}

/// |a - b| / max(|b|, floor), the largest over both vectors.
template <typename A, typename B>
double max_deviation(const std::vector<A>& a, const std::vector<B>& b, double floor = 0.1) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double ref = static_cast<double>(b[i]);
    const double d = std::abs(static_cast<double>(a[i]) - ref) / std::max(std::abs(ref), floor);
    worst = std::max(worst, d);
  }
  return worst;
}

/// Same metric over two sparse maps; INFINITY when the active sets differ.
template <typename T>
double map_deviation(const SparseFeatureMap<T>& a, const SparseFeatureMap<T>& b,
                     double floor = 0.1) {
  if (a.size() != b.size() || a.channels() != b.channels()) return INFINITY;
  double worst = 0.0;
  for (size_t r = 0; r < b.size(); ++r) {
    const Site s = b.sites()[r];
    const int ra = a.find(s);
    if (ra < 0) return INFINITY;
    auto x = a.act(ra);
    auto y = b.act(static_cast<int>(r));
    for (int c = 0; c < b.channels(); ++c) {
      const double ref = static_cast<double>(y[c]);
      worst = std::max(worst, std::abs(static_cast<double>(x[c]) - ref) /
                                  std::max(std::abs(ref), floor));
    }
  }
  return worst;
}

}  // namespace evsparse::testing
