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

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace evsparse {

/// Integer pixel coordinate at some layer resolution.
struct Site {
  int32_t x = 0;
  int32_t y = 0;

  friend bool operator==(const Site&, const Site&) = default;
  friend bool operator<(const Site& a, const Site& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  }
  Site operator+(const Site& o) const { return {x + o.x, y + o.y}; }
  Site operator-(const Site& o) const { return {x - o.x, y - o.y}; }
};

inline uint64_t site_key(Site s) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(s.y)) << 32) |
         static_cast<uint32_t>(s.x);
}

inline Site site_from_key(uint64_t key) {
  return {static_cast<int32_t>(static_cast<uint32_t>(key & 0xffffffffu)),
          static_cast<int32_t>(static_cast<uint32_t>(key >> 32))};
}

struct Resolution {
  int width = 0;
  int height = 0;

  friend bool operator==(const Resolution&, const Resolution&) = default;
  bool contains(Site s) const {
    return s.x >= 0 && s.y >= 0 && s.x < width && s.y < height;
  }
  int64_t area() const { return static_cast<int64_t>(width) * height; }
};

/// Unordered set of sites keyed by packed coordinate.
class SiteSet {
 public:
  SiteSet() = default;
  explicit SiteSet(const std::vector<Site>& sites) {
    for (Site s : sites) insert(s);
  }

  bool insert(Site s) { return keys_.insert(site_key(s)).second; }
  bool erase(Site s) { return keys_.erase(site_key(s)) > 0; }
  bool contains(Site s) const { return keys_.count(site_key(s)) > 0; }
  size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }
  void clear() { keys_.clear(); }

  /// Sites in (y, x) order.
  std::vector<Site> sorted() const;

  friend bool operator==(const SiteSet& a, const SiteSet& b) {
    return a.keys_ == b.keys_;
  }

 private:
  std::unordered_set<uint64_t> keys_;
};

}  // namespace evsparse
