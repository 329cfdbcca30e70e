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
#include <string>
#include <vector>

#include "evsparse/network.hpp"

namespace evsparse {

enum class ExecMode { kDense, kSparse, kAsync };

std::string to_string(ExecMode mode);
ExecMode parse_exec_mode(const std::string& name);

/// What one layer did during a forward pass or an event update. `flops` is
/// accumulated by the kernels as they run; the size fields are what the
/// analytic formulas need.
struct LayerTrace {
  LayerKind kind = LayerKind::kRelu;
  ExecMode mode = ExecMode::kSparse;
  int64_t rules = 0;   // N_r, conv only
  int64_t active = 0;  // N_a: active (or updated) output sites
  int h_out = 0;
  int w_out = 0;
  int c_in = 0;
  int c_out = 0;
  int kernel = 0;
  uint64_t flops = 0;
};

using RunTrace = std::vector<LayerTrace>;

}  // namespace evsparse
