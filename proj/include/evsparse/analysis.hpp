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
#include "evsparse/representation.hpp"
#include "evsparse/site.hpp"
#include "evsparse/trace.hpp"
#include "json.hpp"

namespace evsparse {

// Per-layer FLOP formulas. One multiply, add or comparison counts as one.
uint64_t flops_dense_conv(int h_out, int w_out, int c_in, int c_out, int kernel);
uint64_t flops_sparse_conv(uint64_t rules, int c_in, int c_out);
uint64_t flops_dense_pool(int h_out, int w_out, int channels, int kernel);
uint64_t flops_sparse_pool(uint64_t active, int channels, int kernel);
uint64_t flops_fc(int c_in, int c_out);
uint64_t flops_dense_relu(int h_out, int w_out, int channels);
uint64_t flops_sparse_relu(uint64_t active, int channels);

/// Formula value for one traced layer. Sparse and async share the sparse
/// rows; for async fc c_in is the number of changed input slots.
uint64_t analytic_flops(const LayerTrace& t);

struct FlopRow {
  size_t layer = 0;
  LayerTrace trace;
  uint64_t counted = 0;
  uint64_t analytic = 0;
};

struct FlopLedger {
  std::string network;
  std::vector<FlopRow> rows;

  uint64_t total_counted() const;
  uint64_t total_analytic() const;
  /// counted == analytic on every row.
  bool consistent() const;
};

/// Throws std::invalid_argument when the trace does not cover every layer of
/// `net` with matching kinds and filled dimensions.
FlopLedger ledger_for_run(const NetworkSpec& net, const RunTrace& trace);

std::string ledger_csv(const FlopLedger& ledger);
nlohmann::json ledger_json(const FlopLedger& ledger);

struct FractalEstimate {
  Site center{-1, -1};  // (-1, -1) for an average over many centers
  std::vector<int> radii;
  std::vector<double> counts;  // μ(B(u, r)) per radius
  double gamma = 0.0;
  double residual = 0.0;  // RMS of the log-log fit
  int64_t centers = 1;
};

std::vector<int> default_fractal_radii();

/// Counts active sites in the (2r+1)-side square around `center` and fits
/// log μ against log(2r+1) by least squares. Radii whose square leaves the
/// image are dropped; throws std::invalid_argument when fewer than two
/// radii with μ > 0 remain.
FractalEstimate fractal_dimension(const SiteSet& active, Resolution res, Site center,
                                  std::vector<int> radii = default_fractal_radii());
FractalEstimate fractal_dimension(const Representation& rep, Site center,
                                  std::vector<int> radii = default_fractal_radii());

/// Same fit on μ averaged over every active center whose largest square fits
/// in the image.
FractalEstimate mean_fractal_dimension(const Representation& rep,
                                       std::vector<int> radii = default_fractal_radii());

std::string fractal_csv(const FractalEstimate& est);
nlohmann::json fractal_json(const FractalEstimate& est);

/// printf("%.9g") of a double.
std::string format_number(double v);
/// `v` rounded to 9 significant digits, for JSON reports.
double round_to_9(double v);

}  // namespace evsparse
