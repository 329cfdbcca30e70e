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
#include "evsparse/layers.hpp"

#include <algorithm>
#include <limits>

namespace evsparse {

template <typename T>
SparseFeatureMap<T> ssc_forward(const SparseFeatureMap<T>& input, const LayerSpec& conv,
                                const Rulebook& rulebook, LayerTrace* trace) {
  if (conv.kind != LayerKind::kConv) throw std::invalid_argument("ssc_forward needs a conv layer");
  if (input.channels() != conv.in_channels) {
    throw std::invalid_argument("ssc_forward: input has " + std::to_string(input.channels()) +
                                " channels, layer expects " + std::to_string(conv.in_channels));
  }
  if (rulebook.kernel() != conv.kernel) throw std::invalid_argument("rulebook kernel mismatch");

  SparseFeatureMap<T> out(input.resolution(), conv.out_channels);
  for (Site s : input.sites()) {
    const int row = out.insert(s);
    auto pre = out.pre(row);
    for (int c = 0; c < conv.out_channels; ++c) pre[c] = static_cast<T>(conv.bias[c]);
  }
  uint64_t rules = 0;
  for (size_t o = 0; o < rulebook.num_offsets(); ++o) {
    for (const Rule& r : rulebook.rules(o)) {
      const int in_row = input.find(r.in);
      const int out_row = out.find(r.out);
      if (in_row < 0 || out_row < 0) throw std::logic_error("rule references inactive site");
      conv_accumulate<T>(conv, o, input.act(in_row), out.pre(out_row));
      ++rules;
    }
  }
  for (size_t row = 0; row < out.size(); ++row) {
    auto pre = out.pre(static_cast<int>(row));
    std::copy(pre.begin(), pre.end(), out.act(static_cast<int>(row)).begin());
  }
  if (trace) {
    *trace = {LayerKind::kConv, ExecMode::kSparse, static_cast<int64_t>(rules),
              static_cast<int64_t>(out.size()), out.height(), out.width(),
              conv.in_channels, conv.out_channels, conv.kernel,
              rules * flops_per_rule(conv.in_channels, conv.out_channels)};
  }
  return out;
}

template <typename T>
SparseFeatureMap<T> sparse_relu(const SparseFeatureMap<T>& input, LayerTrace* trace) {
  SparseFeatureMap<T> out(input.resolution(), input.channels());
  uint64_t flops = 0;
  for (size_t r = 0; r < input.size(); ++r) {
    const int row = out.insert(input.sites()[r]);
    auto x = input.act(static_cast<int>(r));
    auto pre = out.pre(row);
    auto act = out.act(row);
    for (int c = 0; c < input.channels(); ++c) {
      pre[c] = x[c];
      act[c] = std::max(x[c], T(0));
    }
    flops += static_cast<uint64_t>(input.channels());
  }
  if (trace) {
    *trace = {LayerKind::kRelu, ExecMode::kSparse, 0, static_cast<int64_t>(out.size()),
              out.height(), out.width(), input.channels(), input.channels(), 0, flops};
  }
  return out;
}

template <typename T>
SparseFeatureMap<T> sparse_maxpool(const SparseFeatureMap<T>& input, int kernel,
                                   bool ceil_mode, LayerTrace* trace) {
  if (kernel <= 0) throw std::invalid_argument("pool kernel must be positive");
  const Resolution res{pooled_extent(input.width(), kernel, ceil_mode),
                       pooled_extent(input.height(), kernel, ceil_mode)};
  const int channels = input.channels();
  SparseFeatureMap<T> out(res, channels);
  for (size_t r = 0; r < input.size(); ++r) {
    const Site s = input.sites()[r];
    const Site w{s.x / kernel, s.y / kernel};
    if (!res.contains(w)) continue;  // floor mode drops the ragged border
    int row = out.find(w);
    auto x = input.act(static_cast<int>(r));
    if (row < 0) {
      row = out.insert(w);
      std::copy(x.begin(), x.end(), out.pre(row).begin());
    } else {
      auto m = out.pre(row);
      for (int c = 0; c < channels; ++c) m[c] = std::max(m[c], x[c]);
    }
  }
  for (size_t row = 0; row < out.size(); ++row) {
    auto pre = out.pre(static_cast<int>(row));
    std::copy(pre.begin(), pre.end(), out.act(static_cast<int>(row)).begin());
  }
  if (trace) {
    const uint64_t per_site = static_cast<uint64_t>(channels) * kernel * kernel;
    *trace = {LayerKind::kMaxPool, ExecMode::kSparse, 0, static_cast<int64_t>(out.size()),
              res.height, res.width, channels, channels, kernel, out.size() * per_site};
  }
  return out;
}

template <typename T>
std::vector<T> fc_forward(const SparseFeatureMap<T>& input, const LayerSpec& fc,
                          LayerTrace* trace) {
  if (fc.kind != LayerKind::kFc) throw std::invalid_argument("fc_forward needs an fc layer");
  const int64_t flat = input.resolution().area() * input.channels();
  if (flat != fc.in_channels) {
    throw std::invalid_argument("fc_forward: flattened input size " + std::to_string(flat) +
                                " != " + std::to_string(fc.in_channels));
  }
  std::vector<T> out(fc.bias.begin(), fc.bias.end());
  std::vector<Site> sites = input.sites();
  std::sort(sites.begin(), sites.end());
  const int c = input.channels();
  for (Site s : sites) {
    auto x = input.activation_at(s);
    const size_t base = (static_cast<size_t>(s.y) * input.width() + s.x) * c;
    for (int o = 0; o < fc.out_channels; ++o) {
      const float* w = fc.weights.data() + static_cast<size_t>(o) * fc.in_channels + base;
      T acc = 0;
      for (int ci = 0; ci < c; ++ci) acc += static_cast<T>(w[ci]) * x[ci];
      out[o] += acc;
    }
  }
  if (trace) {
    *trace = {LayerKind::kFc, ExecMode::kSparse, 0, static_cast<int64_t>(input.size()), 1, 1,
              fc.in_channels, fc.out_channels, 0,
              2ull * static_cast<uint64_t>(fc.in_channels) * fc.out_channels};
  }
  return out;
}

template <typename T>
SparseForwardResult<T> sparse_forward(const NetworkSpec& net, SparseFeatureMap<T> input) {
  const auto shapes = validate_network(net);
  if (input.resolution() != net.input_resolution() || input.channels() != net.input_channels) {
    throw std::invalid_argument("input does not match the network input shape");
  }
  SparseForwardResult<T> result;
  result.maps.push_back(std::move(input));
  result.rulebooks.resize(net.layers.size());
  result.trace.resize(net.layers.size());
  // A rulebook only depends on the active set and kernel, so it is reused
  // until the next pooling layer changes the resolution.
  const Rulebook* cached = nullptr;
  for (size_t n = 0; n < net.layers.size(); ++n) {
    const LayerSpec& layer = net.layers[n];
    const SparseFeatureMap<T>& in = result.maps.back();
    LayerTrace* trace = &result.trace[n];
    switch (layer.kind) {
      case LayerKind::kConv: {
        if (cached && cached->kernel() == layer.kernel) {
          result.rulebooks[n] = *cached;
        } else {
          result.rulebooks[n] = build_rulebook(in.sites(), layer.kernel, in.resolution());
        }
        cached = &result.rulebooks[n];
        result.maps.push_back(ssc_forward(in, layer, result.rulebooks[n], trace));
        break;
      }
      case LayerKind::kRelu:
        result.maps.push_back(sparse_relu(in, trace));
        break;
      case LayerKind::kMaxPool:
        result.maps.push_back(sparse_maxpool(in, layer.kernel, net.ceil_pooling, trace));
        cached = nullptr;
        break;
      case LayerKind::kFc:
        result.output = fc_forward(in, layer, trace);
        break;
      case LayerKind::kBatchNorm:
        throw NetworkError("batch-norm must be folded before inference");
    }
  }
  return result;
}

template <typename T>
SparseForwardResult<T> sparse_forward(const NetworkSpec& net, const Representation& rep) {
  return sparse_forward<T>(net, input_map<T>(rep));
}

#define EVSPARSE_INSTANTIATE(T)                                                              \
  template SparseFeatureMap<T> ssc_forward(const SparseFeatureMap<T>&, const LayerSpec&,    \
                                           const Rulebook&, LayerTrace*);                   \
  template SparseFeatureMap<T> sparse_relu(const SparseFeatureMap<T>&, LayerTrace*);        \
  template SparseFeatureMap<T> sparse_maxpool(const SparseFeatureMap<T>&, int, bool,        \
                                              LayerTrace*);                                 \
  template std::vector<T> fc_forward(const SparseFeatureMap<T>&, const LayerSpec&,          \
                                     LayerTrace*);                                          \
  template SparseForwardResult<T> sparse_forward(const NetworkSpec&, SparseFeatureMap<T>);  \
  template SparseForwardResult<T> sparse_forward(const NetworkSpec&, const Representation&);

EVSPARSE_INSTANTIATE(float)
EVSPARSE_INSTANTIATE(double)

}  // namespace evsparse
