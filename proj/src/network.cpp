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
#include "evsparse/network.hpp"

namespace evsparse {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kFc: return "fc";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv(int kernel, int in_channels, int out_channels,
                          std::vector<float> weights, std::vector<float> bias) {
  LayerSpec l;
  l.kind = LayerKind::kConv;
  l.kernel = kernel;
  l.in_channels = in_channels;
  l.out_channels = out_channels;
  l.weights = std::move(weights);
  l.bias = std::move(bias);
  return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::maxpool(int kernel) {
  LayerSpec l;
  l.kind = LayerKind::kMaxPool;
  l.kernel = kernel;
  return l;
}

LayerSpec LayerSpec::fc(int in_size, int out_size, std::vector<float> weights,
                        std::vector<float> bias) {
  LayerSpec l;
  l.kind = LayerKind::kFc;
  l.in_channels = in_size;
  l.out_channels = out_size;
  l.weights = std::move(weights);
  l.bias = std::move(bias);
  return l;
}

LayerSpec LayerSpec::batchnorm(int channels, std::vector<float> gamma,
                               std::vector<float> beta, std::vector<float> mean,
                               std::vector<float> var, float eps) {
  LayerSpec l;
  l.kind = LayerKind::kBatchNorm;
  l.in_channels = channels;
  l.out_channels = channels;
  l.gamma = std::move(gamma);
  l.beta = std::move(beta);
  l.mean = std::move(mean);
  l.var = std::move(var);
  l.eps = eps;
  return l;
}

int pooled_extent(int extent, int kernel, bool ceil_mode) {
  return ceil_mode ? (extent + kernel - 1) / kernel : extent / kernel;
}

std::vector<LayerShape> validate_network(const NetworkSpec& net) {
  if (net.input_width <= 0 || net.input_height <= 0 || net.input_channels <= 0) {
    throw NetworkError("input shape must be positive");
  }
  if (net.window <= 0) throw NetworkError("window size must be positive");
  if (net.input_channels != representation_channels(net.representation)) {
    throw NetworkError("input channels do not match the " +
                       to_string(net.representation) + " representation");
  }
  if (net.layers.empty() || net.layers.back().kind != LayerKind::kFc) {
    throw NetworkError("network must end with an fc layer");
  }
  std::vector<LayerShape> shapes;
  Resolution res = net.input_resolution();
  int channels = net.input_channels;
  for (size_t n = 0; n < net.layers.size(); ++n) {
    const LayerSpec& l = net.layers[n];
    const std::string where = "layer " + std::to_string(n) + " (" + to_string(l.kind) + "): ";
    LayerShape shape{res, res, channels, channels};
    switch (l.kind) {
      case LayerKind::kConv:
        if (l.kernel <= 0 || l.kernel % 2 == 0) throw NetworkError(where + "kernel must be odd");
        if (l.in_channels != channels) throw NetworkError(where + "input channel mismatch");
        if (l.out_channels <= 0) throw NetworkError(where + "output channels must be positive");
        if (l.weights.size() != static_cast<size_t>(l.kernel) * l.kernel * l.in_channels *
                                    l.out_channels ||
            l.bias.size() != static_cast<size_t>(l.out_channels)) {
          throw NetworkError(where + "tensor size mismatch");
        }
        channels = l.out_channels;
        break;
      case LayerKind::kRelu:
        break;
      case LayerKind::kMaxPool: {
        if (l.kernel <= 0) throw NetworkError(where + "pool kernel must be positive");
        if (!net.ceil_pooling && (res.width % l.kernel != 0 || res.height % l.kernel != 0)) {
          throw NetworkError(where + "resolution " + std::to_string(res.width) + "x" +
                             std::to_string(res.height) + " not divisible by " +
                             std::to_string(l.kernel));
        }
        res = {pooled_extent(res.width, l.kernel, net.ceil_pooling),
               pooled_extent(res.height, l.kernel, net.ceil_pooling)};
        if (res.width <= 0 || res.height <= 0) throw NetworkError(where + "resolution vanished");
        break;
      }
      case LayerKind::kFc:
        if (n + 1 != net.layers.size()) throw NetworkError(where + "fc must be the last layer");
        if (l.in_channels != static_cast<int>(res.area() * channels)) {
          throw NetworkError(where + "fc input size " + std::to_string(l.in_channels) +
                             " != flattened map size " +
                             std::to_string(res.area() * channels));
        }
        if (l.out_channels <= 0 ||
            l.weights.size() != static_cast<size_t>(l.in_channels) * l.out_channels ||
            l.bias.size() != static_cast<size_t>(l.out_channels)) {
          throw NetworkError(where + "tensor size mismatch");
        }
        channels = l.out_channels;
        res = {1, 1};
        break;
      case LayerKind::kBatchNorm:
        throw NetworkError(where + "batch-norm must be folded before inference");
    }
    shape.out_res = res;
    shape.out_channels = channels;
    shapes.push_back(shape);
  }
  return shapes;
}

}  // namespace evsparse
