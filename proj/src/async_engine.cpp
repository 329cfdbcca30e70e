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
#include "evsparse/async_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace evsparse {

namespace {

// Adds the rules and receptive sites reachable from `inputs` to `out`.
void expand_from(const std::vector<Site>& inputs, const std::vector<Site>& offsets,
                 const SiteSet& active, const ActivityChange& change, UpdateFront& out) {
  for (Site i : inputs) {
    for (size_t o = 0; o < offsets.size(); ++o) {
      const Site u = i - offsets[o];
      if (!out.res.contains(u) || !active.contains(u)) continue;
      if (!change.newly_active.contains(u) && !change.newly_inactive.contains(u)) {
        out.rules.add(o, {i, u});
      }
      if (out.members.insert(u)) {
        out.receptive.push_back(u);
        out.frontier.push_back(u);
      }
    }
  }
}

// Kahan summation: sum += x while `carry` keeps the rounding error.
template <typename T>
inline void compensated_add(T& sum, T& carry, T x) {
  const T y = x - carry;
  const T t = sum + y;
  carry = (t - sum) - y;
  sum = t;
}

}  // namespace

UpdateFront initial_front(const std::vector<Site>& sites, Resolution res) {
  UpdateFront f;
  f.res = res;
  f.kernel = 0;
  f.rules = Rulebook(0);
  for (Site s : sites) {
    if (!res.contains(s)) throw std::out_of_range("front site outside resolution");
    if (f.members.insert(s)) {
      f.receptive.push_back(s);
      f.frontier.push_back(s);
    }
  }
  return f;
}

UpdateFront propagate_front(const UpdateFront& prev, int kernel, const SiteSet& active,
                            const ActivityChange& change) {
  if (prev.kernel != 0 && prev.kernel != kernel) {
    return propagate_front_direct(prev, kernel, active, change);
  }
  UpdateFront out;
  out.res = prev.res;
  out.kernel = kernel;
  out.rules = prev.kernel == kernel ? prev.rules : Rulebook(kernel);
  out.receptive = prev.receptive;
  out.visited = prev.receptive;
  out.members = prev.members;
  expand_from(prev.frontier, kernel_offsets(kernel), active, change, out);
  return out;
}

UpdateFront propagate_front_direct(const UpdateFront& prev, int kernel, const SiteSet& active,
                                   const ActivityChange& change) {
  UpdateFront out;
  out.res = prev.res;
  out.kernel = kernel;
  out.rules = Rulebook(kernel);
  const auto offsets = kernel_offsets(kernel);
  for (Site i : prev.receptive) {
    for (size_t o = 0; o < offsets.size(); ++o) {
      const Site u = i - offsets[o];
      if (!out.res.contains(u) || !active.contains(u)) continue;
      if (!change.newly_active.contains(u) && !change.newly_inactive.contains(u)) {
        out.rules.add(o, {i, u});
      }
      if (out.members.insert(u)) out.receptive.push_back(u);
    }
  }
  // Deactivated sites keep propagating their removal.
  for (Site i : prev.receptive) {
    if (change.newly_inactive.contains(i) && out.members.insert(i)) out.receptive.push_back(i);
  }
  for (Site u : out.receptive) {
    (prev.members.contains(u) ? out.visited : out.frontier).push_back(u);
  }
  return out;
}

template <typename T>
std::span<T> AsyncEngine<T>::FrontDeltas::add(Site s) {
  auto [it, fresh] = index.emplace(site_key(s), static_cast<int>(rows.size() / channels));
  if (!fresh) throw std::logic_error("duplicate front site");
  rows.resize(rows.size() + channels, T(0));
  return {rows.data() + static_cast<size_t>(it->second) * channels,
          static_cast<size_t>(channels)};
}

template <typename T>
std::span<const T> AsyncEngine<T>::FrontDeltas::get(Site s) const {
  auto it = index.find(site_key(s));
  if (it == index.end()) {
    throw std::logic_error("missing previous-value entry for front site (" +
                           std::to_string(s.x) + "," + std::to_string(s.y) + ")");
  }
  return {rows.data() + static_cast<size_t>(it->second) * channels,
          static_cast<size_t>(channels)};
}

template <typename T>
AsyncEngine<T>::AsyncEngine(std::shared_ptr<const NetworkSpec> net, const Representation& rep)
    : net_(std::move(net)) {
  validate_network(*net_);
  if (rep.resolution() != net_->input_resolution() || rep.channels != net_->input_channels) {
    throw std::invalid_argument("representation does not match the network input shape");
  }
  maps_.push_back(input_map<T>(rep));
  rebuild_from_input();
}

template <typename T>
void AsyncEngine<T>::rebuild_from_input() {
  auto result = sparse_forward<T>(*net_, maps_.front());
  maps_ = std::move(result.maps);
  output_ = std::move(result.output);
  output_carry_.assign(output_.size(), T(0));
  active_.clear();
  for (const auto& m : maps_) active_.push_back(m.active_set());
  rulebooks_.assign(net_->layers.size(), DynamicRulebook{});
  for (size_t n = 0; n < net_->layers.size(); ++n) {
    if (net_->layers[n].kind == LayerKind::kConv) {
      rulebooks_[n] = DynamicRulebook(result.rulebooks[n], maps_[n].resolution());
    }
  }
  trace_ = result.trace;
  for (auto& t : trace_) t.mode = ExecMode::kSparse;
  fronts_.clear();
  changes_.clear();
}

template <typename T>
void AsyncEngine<T>::resync() {
  rebuild_from_input();
}

template <typename T>
const std::vector<T>& AsyncEngine<T>::process(const SparseUpdate& update) {
  const auto& layers = net_->layers;
  trace_.assign(layers.size(), LayerTrace{});
  fronts_.assign(maps_.size(), UpdateFront{});
  changes_.assign(maps_.size(), ActivityChange{});
  for (size_t n = 0; n < layers.size(); ++n) {
    LayerTrace& t = trace_[n];
    t.kind = layers[n].kind;
    t.mode = ExecMode::kAsync;
    t.kernel = layers[n].kind == LayerKind::kConv || layers[n].kind == LayerKind::kMaxPool
                   ? layers[n].kernel
                   : 0;
    const auto& in = maps_[n];
    t.c_in = in.channels();
    if (n + 1 < maps_.size()) {
      t.h_out = maps_[n + 1].height();
      t.w_out = maps_[n + 1].width();
      t.c_out = maps_[n + 1].channels();
    } else {
      t.h_out = t.w_out = 1;
      t.c_out = layers[n].out_channels;
    }
  }

  FrontDeltas deltas;
  UpdateFront front;
  ActivityChange change;
  apply_input(update, deltas, front, change);
  for (size_t n = 0; n < layers.size(); ++n) {
    fronts_[n] = front;
    changes_[n] = change;
    switch (layers[n].kind) {
      case LayerKind::kConv: update_conv(n, front, change, deltas, trace_[n]); break;
      case LayerKind::kRelu: update_relu(n, front, change, deltas, trace_[n]); break;
      case LayerKind::kMaxPool: update_pool(n, front, change, deltas, trace_[n]); break;
      case LayerKind::kFc: update_fc(n, front, deltas, trace_[n]); break;
      case LayerKind::kBatchNorm: throw NetworkError("batch-norm must be folded before inference");
    }
  }
  return output_;
}

template <typename T>
void AsyncEngine<T>::apply_input(const SparseUpdate& update, FrontDeltas& deltas,
                                 UpdateFront& front, ActivityChange& change) {
  auto& in = maps_[0];
  const int channels = in.channels();
  deltas.channels = channels;
  const SiteSet listed_active(update.newly_active);
  const SiteSet listed_inactive(update.newly_inactive);
  SiteSet seen;
  std::vector<Site> sites;
  const auto inconsistent = [](Site s, const std::string& why) {
    return std::invalid_argument("update inconsistent with retained input at (" +
                                 std::to_string(s.x) + "," + std::to_string(s.y) + "): " + why);
  };

  // Validate everything before mutating.
  for (const SiteUpdate& su : update.sites) {
    const Site s = su.site;
    if (!in.resolution().contains(s)) throw inconsistent(s, "site out of bounds");
    if (su.delta.size() != static_cast<size_t>(channels) ||
        su.after.size() != static_cast<size_t>(channels)) {
      throw inconsistent(s, "channel count mismatch");
    }
    if (!seen.insert(s)) throw inconsistent(s, "site listed twice");
    auto before = in.activation_at(s);
    bool after_zero = true;
    for (int c = 0; c < channels; ++c) {
      const T expect = before[c] + static_cast<T>(su.delta[c]);
      const T after = static_cast<T>(su.after[c]);
      const T scale = std::max<T>(T(1), std::abs(after));
      if (std::abs(expect - after) > T(1e-4) * scale) {
        throw inconsistent(s, "increment does not match retained value");
      }
      after_zero &= su.after[c] == 0.0f;
    }
    const bool was_active = in.contains(s);
    if (!was_active && !after_zero && !listed_active.contains(s)) {
      throw inconsistent(s, "activation not listed as newly active");
    }
    if (was_active && after_zero && !listed_inactive.contains(s)) {
      throw inconsistent(s, "deactivation not listed as newly inactive");
    }
    if (listed_active.contains(s) && (was_active || after_zero)) {
      throw inconsistent(s, "listed as newly active but is not");
    }
    if (listed_inactive.contains(s) && (!was_active || !after_zero)) {
      throw inconsistent(s, "listed as newly inactive but is not");
    }
    sites.push_back(s);
  }
  for (Site s : update.newly_active) {
    if (!seen.contains(s)) throw inconsistent(s, "activity change without increment");
  }
  for (Site s : update.newly_inactive) {
    if (!seen.contains(s)) throw inconsistent(s, "activity change without increment");
  }

  for (const SiteUpdate& su : update.sites) {
    const Site s = su.site;
    auto d = deltas.add(s);
    if (listed_inactive.contains(s)) {
      auto old = in.act(in.find(s));
      for (int c = 0; c < channels; ++c) d[c] = -old[c];
      in.erase(s);
      active_[0].erase(s);
      continue;
    }
    int row = in.find(s);
    if (row < 0) {
      row = in.insert(s);
      active_[0].insert(s);
    }
    auto pre = in.pre(row);
    auto act = in.act(row);
    for (int c = 0; c < channels; ++c) {
      const T after = static_cast<T>(su.after[c]);
      d[c] = after - act[c];
      pre[c] = after;
      act[c] = after;
    }
  }
  front = initial_front(sites, in.resolution());
  change = {listed_active, listed_inactive};
}

template <typename T>
void AsyncEngine<T>::update_conv(size_t n, UpdateFront& front, const ActivityChange& change,
                                 FrontDeltas& deltas, LayerTrace& trace) {
  const LayerSpec& conv = net_->layers[n];
  const auto& in = maps_[n];
  auto& out = maps_[n + 1];
  const int c_out = conv.out_channels;
  UpdateFront next = propagate_front(front, conv.kernel, active_[n], change);

  for (Site s : change.newly_inactive.sorted()) rulebooks_[n].deactivate(s);
  for (Site s : change.newly_active.sorted()) rulebooks_[n].activate(s, active_[n]);

  // Each surviving output is either updated from the rules of the front or
  // recomputed from its active inputs, whichever needs fewer rules. Newly
  // active outputs are always recomputed.
  const auto offsets = kernel_offsets(conv.kernel);
  std::unordered_map<uint64_t, size_t> position;
  position.reserve(next.receptive.size());
  for (size_t p = 0; p < next.receptive.size(); ++p) position.emplace(site_key(next.receptive[p]), p);
  std::vector<uint32_t> incremental(next.receptive.size(), 0);
  for (size_t o = 0; o < next.rules.num_offsets(); ++o) {
    for (const Rule& r : next.rules.rules(o)) ++incremental[position.at(site_key(r.out))];
  }
  std::vector<char> recompute(next.receptive.size(), 0);
  for (size_t p = 0; p < next.receptive.size(); ++p) {
    const Site u = next.receptive[p];
    if (change.newly_inactive.contains(u)) continue;
    if (change.newly_active.contains(u)) {
      recompute[p] = 1;
      continue;
    }
    uint32_t inputs = 0;
    for (const Site& k : offsets) {
      const Site i = u + k;
      inputs += in.resolution().contains(i) && active_[n].contains(i);
    }
    recompute[p] = inputs <= incremental[p];
  }

  uint64_t rules = 0;
  std::vector<T> increments(next.receptive.size() * c_out, T(0));
  for (size_t o = 0; o < next.rules.num_offsets(); ++o) {
    for (const Rule& r : next.rules.rules(o)) {
      const size_t p = position.at(site_key(r.out));
      if (recompute[p]) continue;
      conv_accumulate<T>(conv, o, deltas.get(r.in),
                         std::span<T>(increments.data() + p * c_out, c_out));
      ++rules;
    }
  }

  FrontDeltas out_deltas;
  out_deltas.channels = c_out;
  int64_t updated = 0;
  for (size_t p = 0; p < next.receptive.size(); ++p) {
    const Site u = next.receptive[p];
    auto d = out_deltas.add(u);
    if (change.newly_inactive.contains(u)) {
      auto old = out.act(out.find(u));
      for (int c = 0; c < c_out; ++c) d[c] = -old[c];
      out.erase(u);
      active_[n + 1].erase(u);
      continue;
    }
    ++updated;
    int row = out.find(u);
    if (row < 0) {
      if (!change.newly_active.contains(u)) {
        throw std::logic_error("surviving front site missing from conv output");
      }
      row = out.insert(u);
      active_[n + 1].insert(u);
    }
    auto pre = out.pre(row);
    auto act = out.act(row);
    auto carry = out.carry(row);
    if (recompute[p]) {
      for (int c = 0; c < c_out; ++c) {
        pre[c] = static_cast<T>(conv.bias[c]);
        carry[c] = T(0);
      }
      for (size_t o = 0; o < offsets.size(); ++o) {
        const Site i = u + offsets[o];
        const int in_row = in.resolution().contains(i) ? in.find(i) : -1;
        if (in_row < 0) continue;
        conv_accumulate<T>(conv, o, in.act(in_row), pre);
        ++rules;
      }
    } else {
      const T* inc = increments.data() + p * c_out;
      for (int c = 0; c < c_out; ++c) compensated_add(pre[c], carry[c], inc[c]);
    }
    for (int c = 0; c < c_out; ++c) {
      d[c] = pre[c] - act[c];
      act[c] = pre[c];
    }
  }
  trace.rules = static_cast<int64_t>(rules);
  trace.active = updated;
  trace.flops = rules * flops_per_rule(conv.in_channels, c_out);
  front = std::move(next);
  deltas = std::move(out_deltas);
}

template <typename T>
void AsyncEngine<T>::update_relu(size_t n, const UpdateFront& front, const ActivityChange& change,
                                 FrontDeltas& deltas, LayerTrace& trace) {
  const auto& in = maps_[n];
  auto& out = maps_[n + 1];
  const int channels = in.channels();
  FrontDeltas out_deltas;
  out_deltas.channels = channels;
  size_t cleared = 0;
  for (Site u : front.receptive) {
    auto d = out_deltas.add(u);
    if (change.newly_inactive.contains(u)) {
      auto old = out.act(out.find(u));
      for (int c = 0; c < channels; ++c) d[c] = -old[c];
      out.erase(u);
      active_[n + 1].erase(u);
      ++cleared;
      continue;
    }
    int row = out.find(u);
    if (row < 0) {
      if (!change.newly_active.contains(u)) {
        throw std::logic_error("surviving front site missing from relu output");
      }
      row = out.insert(u);
      active_[n + 1].insert(u);
    }
    auto x = in.act(in.find(u));
    auto pre = out.pre(row);
    auto act = out.act(row);
    for (int c = 0; c < channels; ++c) {
      const T old = act[c];
      pre[c] = x[c];
      act[c] = std::max(x[c], T(0));
      d[c] = act[c] - old;
    }
  }
  // Cleared sites need no comparison.
  const auto updated = static_cast<uint64_t>(out_deltas.index.size() - cleared);
  trace.active = static_cast<int64_t>(updated);
  trace.flops = updated * static_cast<uint64_t>(channels);
  deltas = std::move(out_deltas);
}

template <typename T>
void AsyncEngine<T>::update_pool(size_t n, UpdateFront& front, ActivityChange& change,
                                 FrontDeltas& deltas, LayerTrace& trace) {
  const int k = net_->layers[n].kernel;
  const auto& in = maps_[n];
  auto& out = maps_[n + 1];
  const int channels = in.channels();
  const Resolution out_res = out.resolution();

  std::vector<Site> windows;
  SiteSet window_set;
  for (Site s : front.receptive) {
    const Site w{s.x / k, s.y / k};
    if (out_res.contains(w) && window_set.insert(w)) windows.push_back(w);
  }

  ActivityChange next_change;
  std::vector<Site> changed;
  FrontDeltas out_deltas;
  out_deltas.channels = channels;
  std::vector<T> best(static_cast<size_t>(channels));
  uint64_t evaluated = 0;
  for (Site w : windows) {
    bool any = false;
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx) {
        const Site s{w.x * k + dx, w.y * k + dy};
        const int row = in.resolution().contains(s) ? in.find(s) : -1;
        if (row < 0) continue;
        auto x = in.act(row);
        if (!any) {
          std::copy(x.begin(), x.end(), best.begin());
          any = true;
        } else {
          for (int c = 0; c < channels; ++c) best[c] = std::max(best[c], x[c]);
        }
      }
    }
    evaluated += any;
    const int row = out.find(w);
    if (!any && row < 0) continue;
    if (any && row < 0) {
      const int r = out.insert(w);
      active_[n + 1].insert(w);
      std::copy(best.begin(), best.end(), out.pre(r).begin());
      std::copy(best.begin(), best.end(), out.act(r).begin());
      auto d = out_deltas.add(w);
      std::copy(best.begin(), best.end(), d.begin());
      next_change.newly_active.insert(w);
      changed.push_back(w);
    } else if (!any) {
      auto old = out.act(row);
      auto d = out_deltas.add(w);
      for (int c = 0; c < channels; ++c) d[c] = -old[c];
      out.erase(w);
      active_[n + 1].erase(w);
      next_change.newly_inactive.insert(w);
      changed.push_back(w);
    } else {
      auto act = out.act(row);
      if (std::equal(best.begin(), best.end(), act.begin())) continue;
      auto d = out_deltas.add(w);
      auto pre = out.pre(row);
      for (int c = 0; c < channels; ++c) {
        d[c] = best[c] - act[c];
        pre[c] = best[c];
        act[c] = best[c];
      }
      changed.push_back(w);
    }
  }
  // Windows left without active inputs need no comparison.
  trace.active = static_cast<int64_t>(evaluated);
  trace.flops = evaluated * static_cast<uint64_t>(channels) * k * k;
  front = initial_front(changed, out_res);
  change = std::move(next_change);
  deltas = std::move(out_deltas);
}

template <typename T>
void AsyncEngine<T>::update_fc(size_t n, const UpdateFront& front, const FrontDeltas& deltas,
                               LayerTrace& trace) {
  const LayerSpec& fc = net_->layers[n];
  const auto& in = maps_[n];
  const int channels = in.channels();
  for (Site s : front.receptive) {
    auto d = deltas.get(s);
    const size_t base = (static_cast<size_t>(s.y) * in.width() + s.x) * channels;
    for (int o = 0; o < fc.out_channels; ++o) {
      const float* w = fc.weights.data() + static_cast<size_t>(o) * fc.in_channels + base;
      T acc = 0;
      for (int c = 0; c < channels; ++c) acc += static_cast<T>(w[c]) * d[c];
      compensated_add(output_[o], output_carry_[o], acc);
    }
  }
  const uint64_t slots = front.receptive.size() * static_cast<uint64_t>(channels);
  trace.c_in = static_cast<int>(slots);
  trace.active = static_cast<int64_t>(front.receptive.size());
  trace.flops = 2 * slots * fc.out_channels;
}

template class AsyncEngine<float>;
template class AsyncEngine<double>;

}  // namespace evsparse
