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

#include <stdexcept>
#include <string>
#include <vector>

#include "evsparse/representation.hpp"
#include "evsparse/site.hpp"

namespace evsparse {

enum class LayerKind { kConv, kBatchNorm, kRelu, kMaxPool, kFc };

std::string to_string(LayerKind kind);

/// One network layer. Tensor layouts:
///   conv  weights (ky, kx, c_in, c_out), bias (c_out)
///   fc    weights (out, in) row-major,   bias (out)
///   batchnorm gamma/beta/mean/var per channel, only in model files; runtime
///   networks carry it folded into the preceding conv.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  int kernel = 1;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<float> weights;
  std::vector<float> bias;
  std::vector<float> gamma, beta, mean, var;
  float eps = 1e-5f;

  static LayerSpec conv(int kernel, int in_channels, int out_channels,
                        std::vector<float> weights, std::vector<float> bias);
  static LayerSpec relu();
  static LayerSpec maxpool(int kernel);
  static LayerSpec fc(int in_size, int out_size, std::vector<float> weights,
                      std::vector<float> bias);
  static LayerSpec batchnorm(int channels, std::vector<float> gamma,
                             std::vector<float> beta, std::vector<float> mean,
                             std::vector<float> var, float eps);

  float conv_weight(int offset, int c_in, int c_out) const {
    return weights[(static_cast<size_t>(offset) * in_channels + c_in) * out_channels + c_out];
  }
};

struct NetworkSpec {
  std::string name = "network";
  RepresentationKind representation = RepresentationKind::kHistogram;
  int window = kDefaultWindow;
  int input_width = 0;
  int input_height = 0;
  int input_channels = 0;
  // Pooling on resolutions not divisible by k rounds the output size up and
  // clips the border windows. Off means strict divisibility is validated.
  bool ceil_pooling = false;
  std::vector<LayerSpec> layers;

  Resolution input_resolution() const { return {input_width, input_height}; }
};

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shape flowing into and out of one layer.
struct LayerShape {
  Resolution in_res;
  Resolution out_res;
  int in_channels = 0;
  int out_channels = 0;
};

int pooled_extent(int extent, int kernel, bool ceil_mode);

/// Checks the channel chain, pooling divisibility, tensor sizes, odd conv
/// kernels and that the last layer is the only fc. Batch-norm layers are
/// rejected; fold them first. Returns the per-layer shapes.
std::vector<LayerShape> validate_network(const NetworkSpec& net);

}  // namespace evsparse
