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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "evsparse/network.hpp"

namespace evsparse {

/// Model file layout, all integers u32 and all tensors f32, little endian:
///
///   "EVSN" version name_len name[name_len]
///   representation window width height channels flags layer_count
///   layer table, one entry per layer:
///     kind (0 conv, 1 batchnorm, 2 relu, 3 maxpool, 4 fc) followed by
///     conv: kernel c_in c_out | batchnorm: channels eps(f32) | relu: -
///     maxpool: kernel | fc: in out
///   payload in layer order:
///     conv W (ky, kx, c_in, c_out) then b | batchnorm gamma beta mean var
///     fc W (out, in) then b
///
/// flags bit 0 enables ceil-mode pooling.
inline constexpr uint32_t kModelVersion = 1;

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a model without folding; the result may contain batchnorm layers.
NetworkSpec parse_model(std::string_view bytes);
std::string serialize_model(const NetworkSpec& net);

/// Folds every batchnorm into the conv before it:
/// W' = W g / sqrt(v + eps), b' = (b - m) g / sqrt(v + eps) + beta.
NetworkSpec fold_batchnorm(const NetworkSpec& net);

/// Reads, folds and validates a model file.
NetworkSpec load_model(const std::string& path);
void save_model(const NetworkSpec& net, const std::string& path);

/// Deterministic He-uniform weights for a named template:
///   vgg13   240x180 histogram input, 5 blocks (conv3, relu, conv3, relu,
///           pool2) of widths 64, 128, 256, 512, 512 and a 101-way fc
///   small   32x32 histogram input, 2 blocks of widths 8, 16, 10-way fc
///   random  32x32, 2 to 5 blocks of 1 or 2 convs, random widths, kernels
///           1/3/5 and representation, all drawn from the seed
NetworkSpec random_model(uint64_t seed, const std::string& template_name);

/// Seed from ASYNC_SPARSE_SEED, or `fallback` when unset.
uint64_t seed_from_env(uint64_t fallback = 1);

}  // namespace evsparse
