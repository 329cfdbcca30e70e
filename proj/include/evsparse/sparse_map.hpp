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
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "evsparse/representation.hpp"
#include "evsparse/site.hpp"

namespace evsparse {

/// Feature map stored only at active sites. Each active site owns one row of
/// `channels` pre-activation values, one row of activations and one row of
/// summation carries (the lost low-order part of incrementally updated
/// pre-activations); inactive sites read as zero.
template <typename T>
class SparseFeatureMap {
 public:
  SparseFeatureMap() = default;
  SparseFeatureMap(Resolution res, int channels)
      : res_(res), channels_(channels), zeros_(static_cast<size_t>(channels), T(0)) {}

  Resolution resolution() const { return res_; }
  int width() const { return res_.width; }
  int height() const { return res_.height; }
  int channels() const { return channels_; }
  size_t size() const { return sites_.size(); }
  const std::vector<Site>& sites() const { return sites_; }

  int find(Site s) const {
    auto it = index_.find(site_key(s));
    return it == index_.end() ? -1 : it->second;
  }
  bool contains(Site s) const { return index_.count(site_key(s)) > 0; }

  /// Appends a zeroed row for `s`.
  int insert(Site s) {
    if (!res_.contains(s)) throw std::out_of_range("site outside feature map");
    auto [it, fresh] = index_.emplace(site_key(s), static_cast<int>(sites_.size()));
    if (!fresh) throw std::logic_error("site already active");
    sites_.push_back(s);
    pre_.resize(pre_.size() + channels_, T(0));
    act_.resize(act_.size() + channels_, T(0));
    carry_.resize(carry_.size() + channels_, T(0));
    return it->second;
  }

  /// Swap-removes the row of `s`.
  void erase(Site s) {
    auto it = index_.find(site_key(s));
    if (it == index_.end()) throw std::logic_error("site not active");
    const int row = it->second;
    const int last = static_cast<int>(sites_.size()) - 1;
    index_.erase(it);
    if (row != last) {
      sites_[row] = sites_[last];
      index_[site_key(sites_[row])] = row;
      std::copy_n(pre_.begin() + static_cast<long>(last) * channels_, channels_,
                  pre_.begin() + static_cast<long>(row) * channels_);
      std::copy_n(act_.begin() + static_cast<long>(last) * channels_, channels_,
                  act_.begin() + static_cast<long>(row) * channels_);
      std::copy_n(carry_.begin() + static_cast<long>(last) * channels_, channels_,
                  carry_.begin() + static_cast<long>(row) * channels_);
    }
    sites_.pop_back();
    pre_.resize(pre_.size() - channels_);
    act_.resize(act_.size() - channels_);
    carry_.resize(carry_.size() - channels_);
  }

  std::span<T> pre(int row) { return {pre_.data() + row_offset(row), ucount()}; }
  std::span<const T> pre(int row) const { return {pre_.data() + row_offset(row), ucount()}; }
  std::span<T> act(int row) { return {act_.data() + row_offset(row), ucount()}; }
  std::span<const T> act(int row) const { return {act_.data() + row_offset(row), ucount()}; }
  std::span<T> carry(int row) { return {carry_.data() + row_offset(row), ucount()}; }

  /// Activation at any site; the zero vector when inactive.
  std::span<const T> activation_at(Site s) const {
    const int row = find(s);
    return row < 0 ? std::span<const T>(zeros_) : act(row);
  }
  std::span<const T> pre_activation_at(Site s) const {
    const int row = find(s);
    return row < 0 ? std::span<const T>(zeros_) : pre(row);
  }

  SiteSet active_set() const { return SiteSet(sites_); }

  /// Zero-filled dense activation tensor, (y, x, c).
  std::vector<T> dense_activation() const {
    std::vector<T> out(static_cast<size_t>(res_.area()) * channels_, T(0));
    for (size_t r = 0; r < sites_.size(); ++r) {
      const Site s = sites_[r];
      const size_t base = (static_cast<size_t>(s.y) * res_.width + s.x) * channels_;
      std::copy_n(act_.begin() + static_cast<long>(r) * channels_, channels_,
                  out.begin() + static_cast<long>(base));
    }
    return out;
  }

 private:
  size_t row_offset(int row) const { return static_cast<size_t>(row) * channels_; }
  size_t ucount() const { return static_cast<size_t>(channels_); }

  Resolution res_;
  int channels_ = 0;
  std::unordered_map<uint64_t, int> index_;
  std::vector<Site> sites_;
  std::vector<T> pre_;
  std::vector<T> act_;
  std::vector<T> carry_;
  std::vector<T> zeros_;
};

/// Pixels whose channel vector is not all-zero, in (y, x) order.
std::vector<Site> compute_active_sites(const Representation& rep);

/// Input layer of a network: pre-activation and activation both hold the
/// representation values at active pixels.
template <typename T>
SparseFeatureMap<T> input_map(const Representation& rep) {
  SparseFeatureMap<T> map(rep.resolution(), rep.channels);
  for (Site s : compute_active_sites(rep)) {
    const int row = map.insert(s);
    auto px = rep.pixel(s);
    for (int c = 0; c < rep.channels; ++c) {
      map.pre(row)[c] = static_cast<T>(px[c]);
      map.act(row)[c] = static_cast<T>(px[c]);
    }
  }
  return map;
}

}  // namespace evsparse
