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

#include <vector>

#include "evsparse/network.hpp"
#include "evsparse/sparse_map.hpp"
#include "evsparse/trace.hpp"

namespace evsparse {

/// Dense (y, x, c) tensor used by the reference path.
template <typename T>
struct DenseTensor {
  Resolution res;
  int channels = 0;
  std::vector<T> data;

  DenseTensor() = default;
  DenseTensor(Resolution r, int c)
      : res(r), channels(c), data(static_cast<size_t>(r.area()) * c, T(0)) {}

  T& at(int x, int y, int c) {
    return data[(static_cast<size_t>(y) * res.width + x) * channels + c];
  }
  T at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * res.width + x) * channels + c];
  }
};

template <typename T>
DenseTensor<T> densify(const SparseFeatureMap<T>& map);

template <typename T>
DenseTensor<T> dense_input(const Representation& rep);

/// Same-padded stride-1 convolution (cross-correlation, zero padding).
template <typename T>
DenseTensor<T> dense_conv(const DenseTensor<T>& in, const LayerSpec& conv,
                          LayerTrace* trace = nullptr);
template <typename T>
DenseTensor<T> dense_relu(const DenseTensor<T>& in, LayerTrace* trace = nullptr);
/// Standard max pooling; in ceil mode out-of-range slots act as -inf.
template <typename T>
DenseTensor<T> dense_maxpool(const DenseTensor<T>& in, int kernel, bool ceil_mode = false,
                             LayerTrace* trace = nullptr);
template <typename T>
std::vector<T> dense_fc(const DenseTensor<T>& in, const LayerSpec& fc,
                        LayerTrace* trace = nullptr);

template <typename T>
struct DenseForwardResult {
  std::vector<DenseTensor<T>> maps;  // maps[0] input, maps[n + 1] after layer n
  std::vector<T> output;
  RunTrace trace;
};

/// Textbook dense inference over the zero-filled representation.
template <typename T>
DenseForwardResult<T> dense_forward(const NetworkSpec& net, const Representation& rep);

/// Layer dimensions of a dense run without executing it; FLOPs are filled
/// from the dense formulas since dense cost does not depend on the input.
RunTrace dense_trace(const NetworkSpec& net);

}  // namespace evsparse
