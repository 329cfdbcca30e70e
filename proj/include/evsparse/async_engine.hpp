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

#include <memory>
#include <unordered_map>
#include <vector>

#include "evsparse/layers.hpp"
#include "evsparse/network.hpp"
#include "evsparse/representation.hpp"
#include "evsparse/rulebook.hpp"
#include "evsparse/sparse_map.hpp"
#include "evsparse/trace.hpp"

namespace evsparse {

/// Sites at one resolution that switched activity in the current update.
struct ActivityChange {
  SiteSet newly_active;
  SiteSet newly_inactive;
};

/// Receptive field F_n of an update at one layer, split into the frontier f_n
/// (sites reached for the first time at this layer) and the visited part, plus
/// the incremental rulebook R_{k,n} of rules whose input lies in F_{n-1}.
struct UpdateFront {
  Resolution res;
  int kernel = 0;  // kernel that produced this front; 0 for an initial front
  std::vector<Site> receptive;
  std::vector<Site> frontier;
  std::vector<Site> visited;
  Rulebook rules;
  SiteSet members;

  bool contains(Site s) const { return members.contains(s); }
};

/// F_0 = sites, R_0 = empty.
UpdateFront initial_front(const std::vector<Site>& sites, Resolution res);

/// F_n = { i - k | i in F_{n-1}, i - k in A } plus the newly inactive sites of
/// F_{n-1}; R_{k,n} = { (i, i - k) | i in F_{n-1}, i - k in A }, minus rules
/// whose output switched activity. When `prev` came from a conv with the same
/// kernel (or is initial) only the frontier is expanded and the previous
/// rules are reused; otherwise this falls back to the direct evaluation.
UpdateFront propagate_front(const UpdateFront& prev, int kernel, const SiteSet& active,
                            const ActivityChange& change);

/// Direct evaluation of the same sets over all of F_{n-1}.
UpdateFront propagate_front_direct(const UpdateFront& prev, int kernel, const SiteSet& active,
                                   const ActivityChange& change);

/// Retained network state updated event by event. After every call to
/// process() the per-layer maps and output equal a from-scratch
/// sparse_forward of the current input, up to floating-point rounding.
template <typename T>
class AsyncEngine {
 public:
  AsyncEngine(std::shared_ptr<const NetworkSpec> net, const Representation& rep);

  /// Applies one (possibly coalesced) representation update and returns the
  /// new network output.
  const std::vector<T>& process(const SparseUpdate& update);

  /// Recomputes every layer from the retained input, discarding drift.
  void resync();

  const NetworkSpec& network() const { return *net_; }
  const std::vector<SparseFeatureMap<T>>& maps() const { return maps_; }
  const std::vector<T>& output() const { return output_; }
  /// Persistent synchronous rulebook of conv layer `layer`.
  const DynamicRulebook& rulebook(size_t layer) const { return rulebooks_.at(layer); }

  /// Trace of the most recent process() call, one entry per layer.
  const RunTrace& last_trace() const { return trace_; }
  /// Fronts of the most recent update: fronts[n] lives at maps()[n].
  const std::vector<UpdateFront>& last_fronts() const { return fronts_; }
  /// Activity changes of the most recent update at maps()[n].
  const std::vector<ActivityChange>& last_changes() const { return changes_; }

 private:
  // Old-to-new difference y^t - y^{t-1} for every site of the current front.
  struct FrontDeltas {
    int channels = 0;
    std::unordered_map<uint64_t, int> index;
    std::vector<T> rows;

    std::span<T> add(Site s);
    std::span<const T> get(Site s) const;
  };

  void apply_input(const SparseUpdate& update, FrontDeltas& deltas, UpdateFront& front,
                   ActivityChange& change);
  void update_conv(size_t n, UpdateFront& front, const ActivityChange& change,
                   FrontDeltas& deltas, LayerTrace& trace);
  void update_relu(size_t n, const UpdateFront& front, const ActivityChange& change,
                   FrontDeltas& deltas, LayerTrace& trace);
  void update_pool(size_t n, UpdateFront& front, ActivityChange& change,
                   FrontDeltas& deltas, LayerTrace& trace);
  void update_fc(size_t n, const UpdateFront& front, const FrontDeltas& deltas,
                 LayerTrace& trace);
  void rebuild_from_input();

  std::shared_ptr<const NetworkSpec> net_;
  std::vector<SparseFeatureMap<T>> maps_;
  std::vector<SiteSet> active_;  // active set of maps_[n]
  std::vector<DynamicRulebook> rulebooks_;
  std::vector<T> output_;
  std::vector<T> output_carry_;
  RunTrace trace_;
  std::vector<UpdateFront> fronts_;
  std::vector<ActivityChange> changes_;
};

}  // namespace evsparse
