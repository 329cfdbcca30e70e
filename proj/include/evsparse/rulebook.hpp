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

#include <span>
#include <unordered_set>
#include <vector>

#include "evsparse/site.hpp"

namespace evsparse {

/// Centered offsets of an odd k x k kernel. Offset index o = ky * k + kx maps
/// to (kx - k/2, ky - k/2), which is also the weight-tensor order.
std::vector<Site> kernel_offsets(int kernel);

/// A rule (in, out) at offset k satisfies in - out = k.
struct Rule {
  Site in;
  Site out;
  friend bool operator==(const Rule&, const Rule&) = default;
};

/// Per kernel offset list of input/output site correspondences.
class Rulebook {
 public:
  Rulebook() = default;
  explicit Rulebook(int kernel);

  int kernel() const { return kernel_; }
  size_t num_offsets() const { return per_offset_.size(); }
  const std::vector<Rule>& rules(size_t offset) const { return per_offset_[offset]; }
  void add(size_t offset, Rule r) { per_offset_[offset].push_back(r); }

  /// Total rule count N_r.
  size_t size() const;

  /// Rules sorted inside each offset list, for set comparisons.
  Rulebook canonical() const;

  friend bool operator==(const Rulebook& a, const Rulebook& b) {
    return a.kernel_ == b.kernel_ && a.per_offset_ == b.per_offset_;
  }

 private:
  int kernel_ = 0;
  std::vector<std::vector<Rule>> per_offset_;
};

/// Every in-bounds pair (i, j) of active sites with i - j in the kernel.
/// Rules appear in the order of `active`.
Rulebook build_rulebook(std::span<const Site> active, int kernel, Resolution res);

/// Rulebook maintained under site activation and deactivation. A rule at
/// offset k is identified by its output site since the input is out + k.
class DynamicRulebook {
 public:
  DynamicRulebook() = default;
  DynamicRulebook(int kernel, Resolution res);
  DynamicRulebook(const Rulebook& rules, Resolution res);

  int kernel() const { return kernel_; }
  size_t size() const { return size_; }

  /// Adds every rule between `s` and the sites already in `active` (which
  /// must already contain `s`).
  void activate(Site s, const SiteSet& active);
  /// Drops every rule that has `s` as input or output.
  void deactivate(Site s);

  bool contains(size_t offset, Rule r) const;
  Rulebook to_rulebook() const;

 private:
  int kernel_ = 0;
  Resolution res_;
  std::vector<Site> offsets_;
  std::vector<std::unordered_set<uint64_t>> outputs_;
  size_t size_ = 0;
};

}  // namespace evsparse
