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
#include "evsparse/rulebook.hpp"

#include <algorithm>
#include <stdexcept>

#include "evsparse/sparse_map.hpp"

namespace evsparse {

std::vector<Site> SiteSet::sorted() const {
  std::vector<Site> out;
  out.reserve(keys_.size());
  for (uint64_t k : keys_) out.push_back(site_from_key(k));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Site> compute_active_sites(const Representation& rep) {
  std::vector<Site> out;
  for (int y = 0; y < rep.height; ++y) {
    for (int x = 0; x < rep.width; ++x) {
      if (rep.is_active({x, y})) out.push_back({x, y});
    }
  }
  return out;
}

std::vector<Site> kernel_offsets(int kernel) {
  if (kernel <= 0 || kernel % 2 == 0) throw std::invalid_argument("kernel size must be odd");
  const int r = kernel / 2;
  std::vector<Site> out;
  out.reserve(static_cast<size_t>(kernel) * kernel);
  for (int ky = 0; ky < kernel; ++ky) {
    for (int kx = 0; kx < kernel; ++kx) out.push_back({kx - r, ky - r});
  }
  return out;
}

Rulebook::Rulebook(int kernel)
    : kernel_(kernel), per_offset_(static_cast<size_t>(kernel) * kernel) {}

size_t Rulebook::size() const {
  size_t n = 0;
  for (const auto& list : per_offset_) n += list.size();
  return n;
}

Rulebook Rulebook::canonical() const {
  Rulebook out = *this;
  for (auto& list : out.per_offset_) {
    std::sort(list.begin(), list.end(), [](const Rule& a, const Rule& b) {
      return a.out < b.out || (a.out == b.out && a.in < b.in);
    });
  }
  return out;
}

Rulebook build_rulebook(std::span<const Site> active, int kernel, Resolution res) {
  const auto offsets = kernel_offsets(kernel);
  SiteSet lookup;
  for (Site s : active) lookup.insert(s);
  Rulebook rb(kernel);
  for (Site j : active) {
    for (size_t o = 0; o < offsets.size(); ++o) {
      const Site i = j + offsets[o];
      if (res.contains(i) && lookup.contains(i)) rb.add(o, {i, j});
    }
  }
  return rb;
}

DynamicRulebook::DynamicRulebook(int kernel, Resolution res)
    : kernel_(kernel),
      res_(res),
      offsets_(kernel_offsets(kernel)),
      outputs_(offsets_.size()) {}

DynamicRulebook::DynamicRulebook(const Rulebook& rules, Resolution res)
    : DynamicRulebook(rules.kernel(), res) {
  for (size_t o = 0; o < rules.num_offsets(); ++o) {
    for (const Rule& r : rules.rules(o)) size_ += outputs_[o].insert(site_key(r.out)).second;
  }
}

void DynamicRulebook::activate(Site s, const SiteSet& active) {
  for (size_t o = 0; o < offsets_.size(); ++o) {
    // s as output: input s + k.
    const Site in = s + offsets_[o];
    if (res_.contains(in) && active.contains(in)) {
      size_ += outputs_[o].insert(site_key(s)).second;
    }
    // s as input: output s - k.
    const Site out = s - offsets_[o];
    if (res_.contains(out) && active.contains(out)) {
      size_ += outputs_[o].insert(site_key(out)).second;
    }
  }
}

void DynamicRulebook::deactivate(Site s) {
  for (size_t o = 0; o < offsets_.size(); ++o) {
    size_ -= outputs_[o].erase(site_key(s));
    const Site out = s - offsets_[o];
    if (res_.contains(out)) size_ -= outputs_[o].erase(site_key(out));
  }
}

bool DynamicRulebook::contains(size_t offset, Rule r) const {
  return r.in - r.out == offsets_[offset] && outputs_[offset].count(site_key(r.out)) > 0;
}

Rulebook DynamicRulebook::to_rulebook() const {
  Rulebook rb(kernel_);
  for (size_t o = 0; o < offsets_.size(); ++o) {
    for (uint64_t key : outputs_[o]) {
      const Site out = site_from_key(key);
      rb.add(o, {out + offsets_[o], out});
    }
  }
  return rb.canonical();
}

}  // namespace evsparse
