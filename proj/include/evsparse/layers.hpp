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
#include <vector>

#include "evsparse/network.hpp"
#include "evsparse/rulebook.hpp"
#include "evsparse/sparse_map.hpp"
#include "evsparse/trace.hpp"

namespace evsparse {

/// out[c] += Σ_c' W(offset, c', c) · x[c'] for one rule.
template <typename T>
inline void conv_accumulate(const LayerSpec& conv, size_t offset, std::span<const T> x,
                            std::span<T> out) {
  const int c_out = conv.out_channels;
  const float* w = conv.weights.data() + offset * conv.in_channels * c_out;
  for (int ci = 0; ci < conv.in_channels; ++ci) {
    const T v = x[ci];
    const float* wr = w + static_cast<size_t>(ci) * c_out;
    for (int co = 0; co < c_out; ++co) out[co] += static_cast<T>(wr[co]) * v;
  }
}

/// FLOPs charged per rule: c_in differences, c_out dot products of length
/// c_in and c_out accumulations, i.e. c_in (2 c_out + 1).
inline uint64_t flops_per_rule(int c_in, int c_out) {
  return static_cast<uint64_t>(c_in) * (2 * static_cast<uint64_t>(c_out) + 1);
}

/// Submanifold sparse convolution: outputs exist exactly at the input's
/// active sites, ỹ(u) = b + Σ_k Σ_(i,u)∈R_k W_kᵀ y(i). Conv layers are
/// linear here; the nonlinearity is a separate relu layer.
template <typename T>
SparseFeatureMap<T> ssc_forward(const SparseFeatureMap<T>& input, const LayerSpec& conv,
                                const Rulebook& rulebook, LayerTrace* trace = nullptr);

template <typename T>
SparseFeatureMap<T> sparse_relu(const SparseFeatureMap<T>& input, LayerTrace* trace = nullptr);

/// Max over the active sites of each k x k window; a window is active iff it
/// holds at least one active input. Negative values are not clamped at 0.
template <typename T>
SparseFeatureMap<T> sparse_maxpool(const SparseFeatureMap<T>& input, int kernel,
                                   bool ceil_mode = false, LayerTrace* trace = nullptr);

/// out = W · flatten(input) + b, flattening in (y, x, c) order.
template <typename T>
std::vector<T> fc_forward(const SparseFeatureMap<T>& input, const LayerSpec& fc,
                          LayerTrace* trace = nullptr);

template <typename T>
struct SparseForwardResult {
  /// maps[0] is the input; maps[n + 1] is the output of layer n (the fc layer
  /// has no map, so maps.size() == layers.size()).
  std::vector<SparseFeatureMap<T>> maps;
  /// Rulebook used by each conv layer, indexed by layer (empty otherwise).
  std::vector<Rulebook> rulebooks;
  std::vector<T> output;
  RunTrace trace;
};

template <typename T>
SparseForwardResult<T> sparse_forward(const NetworkSpec& net, const Representation& rep);

template <typename T>
SparseForwardResult<T> sparse_forward(const NetworkSpec& net, SparseFeatureMap<T> input);

}  // namespace evsparse
