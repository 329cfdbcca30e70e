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
#include "evsparse/dense.hpp"

#include <algorithm>
#include <limits>

#include "evsparse/rulebook.hpp"

namespace evsparse {

template <typename T>
DenseTensor<T> densify(const SparseFeatureMap<T>& map) {
  DenseTensor<T> out(map.resolution(), map.channels());
  out.data = map.dense_activation();
  return out;
}

template <typename T>
DenseTensor<T> dense_input(const Representation& rep) {
  DenseTensor<T> out(rep.resolution(), rep.channels);
  std::transform(rep.values.begin(), rep.values.end(), out.data.begin(),
                 [](float v) { return static_cast<T>(v); });
  return out;
}

template <typename T>
DenseTensor<T> dense_conv(const DenseTensor<T>& in, const LayerSpec& conv, LayerTrace* trace) {
  if (conv.kind != LayerKind::kConv || in.channels != conv.in_channels) {
    throw std::invalid_argument("dense_conv: shape mismatch");
  }
  const auto offsets = kernel_offsets(conv.kernel);
  const int c_in = conv.in_channels;
  const int c_out = conv.out_channels;
  DenseTensor<T> out(in.res, c_out);
  std::vector<T> acc(static_cast<size_t>(c_out));
  // Multiplies and adds per output value with zero padding counted.
  const uint64_t per_value = 2ull * conv.kernel * conv.kernel * c_in - 1;
  uint64_t flops = 0;
  for (int y = 0; y < in.res.height; ++y) {
    for (int x = 0; x < in.res.width; ++x) {
      // Bias first, then taps in offset order: the order ssc_forward uses.
      for (int co = 0; co < c_out; ++co) acc[co] = static_cast<T>(conv.bias[co]);
      for (size_t o = 0; o < offsets.size(); ++o) {
        const Site src = Site{x, y} + offsets[o];
        if (!in.res.contains(src)) continue;
        const T* v = &in.data[(static_cast<size_t>(src.y) * in.res.width + src.x) * c_in];
        for (int ci = 0; ci < c_in; ++ci) {
          for (int co = 0; co < c_out; ++co) {
            acc[co] += static_cast<T>(conv.conv_weight(static_cast<int>(o), ci, co)) * v[ci];
          }
        }
      }
      for (int co = 0; co < c_out; ++co) out.at(x, y, co) = acc[co];
      flops += per_value * c_out;
    }
  }
  if (trace) {
    *trace = {LayerKind::kConv, ExecMode::kDense, 0, in.res.area(), in.res.height,
              in.res.width, c_in, c_out, conv.kernel, flops};
  }
  return out;
}

template <typename T>
DenseTensor<T> dense_relu(const DenseTensor<T>& in, LayerTrace* trace) {
  DenseTensor<T> out = in;
  for (T& v : out.data) v = std::max(v, T(0));
  if (trace) {
    *trace = {LayerKind::kRelu, ExecMode::kDense, 0, in.res.area(), in.res.height,
              in.res.width, in.channels, in.channels, 0, out.data.size()};
  }
  return out;
}

template <typename T>
DenseTensor<T> dense_maxpool(const DenseTensor<T>& in, int kernel, bool ceil_mode,
                             LayerTrace* trace) {
  const Resolution res{pooled_extent(in.res.width, kernel, ceil_mode),
                       pooled_extent(in.res.height, kernel, ceil_mode)};
  DenseTensor<T> out(res, in.channels);
  uint64_t flops = 0;
  for (int y = 0; y < res.height; ++y) {
    for (int x = 0; x < res.width; ++x) {
      for (int c = 0; c < in.channels; ++c) {
        T m = -std::numeric_limits<T>::infinity();
        for (int dy = 0; dy < kernel; ++dy) {
          for (int dx = 0; dx < kernel; ++dx) {
            const Site src{x * kernel + dx, y * kernel + dy};
            const T v = in.res.contains(src) ? in.at(src.x, src.y, c)
                                             : -std::numeric_limits<T>::infinity();
            m = std::max(m, v);
            ++flops;
          }
        }
        out.at(x, y, c) = m;
      }
    }
  }
  if (trace) {
    *trace = {LayerKind::kMaxPool, ExecMode::kDense, 0, res.area(), res.height, res.width,
              in.channels, in.channels, kernel, flops};
  }
  return out;
}

template <typename T>
std::vector<T> dense_fc(const DenseTensor<T>& in, const LayerSpec& fc, LayerTrace* trace) {
  if (static_cast<int64_t>(in.data.size()) != fc.in_channels) {
    throw std::invalid_argument("dense_fc: size mismatch");
  }
  std::vector<T> out(static_cast<size_t>(fc.out_channels));
  for (int o = 0; o < fc.out_channels; ++o) {
    T acc = static_cast<T>(fc.bias[o]);
    const float* w = fc.weights.data() + static_cast<size_t>(o) * fc.in_channels;
    for (int i = 0; i < fc.in_channels; ++i) acc += static_cast<T>(w[i]) * in.data[i];
    out[o] = acc;
  }
  if (trace) {
    *trace = {LayerKind::kFc, ExecMode::kDense, 0, in.res.area(), 1, 1, fc.in_channels,
              fc.out_channels, 0, 2ull * static_cast<uint64_t>(fc.in_channels) * fc.out_channels};
  }
  return out;
}

template <typename T>
DenseForwardResult<T> dense_forward(const NetworkSpec& net, const Representation& rep) {
  validate_network(net);
  if (rep.resolution() != net.input_resolution() || rep.channels != net.input_channels) {
    throw std::invalid_argument("representation does not match the network input shape");
  }
  DenseForwardResult<T> result;
  result.maps.push_back(dense_input<T>(rep));
  result.trace.resize(net.layers.size());
  for (size_t n = 0; n < net.layers.size(); ++n) {
    const LayerSpec& layer = net.layers[n];
    const DenseTensor<T>& in = result.maps.back();
    LayerTrace* trace = &result.trace[n];
    switch (layer.kind) {
      case LayerKind::kConv: result.maps.push_back(dense_conv(in, layer, trace)); break;
      case LayerKind::kRelu: result.maps.push_back(dense_relu(in, trace)); break;
      case LayerKind::kMaxPool:
        result.maps.push_back(dense_maxpool(in, layer.kernel, net.ceil_pooling, trace));
        break;
      case LayerKind::kFc: result.output = dense_fc(in, layer, trace); break;
      case LayerKind::kBatchNorm: throw NetworkError("batch-norm must be folded before inference");
    }
  }
  return result;
}

RunTrace dense_trace(const NetworkSpec& net) {
  const auto shapes = validate_network(net);
  RunTrace trace(net.layers.size());
  for (size_t n = 0; n < net.layers.size(); ++n) {
    const LayerSpec& l = net.layers[n];
    const LayerShape& s = shapes[n];
    LayerTrace& t = trace[n];
    t.kind = l.kind;
    t.mode = ExecMode::kDense;
    t.h_out = s.out_res.height;
    t.w_out = s.out_res.width;
    t.c_in = s.in_channels;
    t.c_out = s.out_channels;
    t.active = s.out_res.area();
    const auto hw = static_cast<uint64_t>(s.out_res.area());
    switch (l.kind) {
      case LayerKind::kConv:
        t.kernel = l.kernel;
        t.flops = hw * t.c_out * (2ull * l.kernel * l.kernel * t.c_in - 1);
        break;
      case LayerKind::kMaxPool:
        t.kernel = l.kernel;
        t.flops = hw * t.c_out * l.kernel * l.kernel;
        break;
      case LayerKind::kRelu: t.flops = hw * t.c_in; break;
      case LayerKind::kFc:
        t.c_in = l.in_channels;
        t.active = 1;
        t.flops = 2ull * t.c_in * t.c_out;
        break;
      case LayerKind::kBatchNorm: break;
    }
  }
  return trace;
}

#define EVSPARSE_INSTANTIATE(T)                                                                \
  template DenseTensor<T> densify(const SparseFeatureMap<T>&);                                \
  template DenseTensor<T> dense_input(const Representation&);                                 \
  template DenseTensor<T> dense_conv(const DenseTensor<T>&, const LayerSpec&, LayerTrace*);   \
  template DenseTensor<T> dense_relu(const DenseTensor<T>&, LayerTrace*);                     \
  template DenseTensor<T> dense_maxpool(const DenseTensor<T>&, int, bool, LayerTrace*);       \
  template std::vector<T> dense_fc(const DenseTensor<T>&, const LayerSpec&, LayerTrace*);     \
  template DenseForwardResult<T> dense_forward(const NetworkSpec&, const Representation&);

EVSPARSE_INSTANTIATE(float)
EVSPARSE_INSTANTIATE(double)

}  // namespace evsparse
