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
#include "evsparse/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "evsparse/sparse_map.hpp"

namespace evsparse {

std::string to_string(ExecMode mode) {
  switch (mode) {
    case ExecMode::kDense: return "dense";
    case ExecMode::kSparse: return "sparse";
    case ExecMode::kAsync: return "async";
  }
  return "unknown";
}

ExecMode parse_exec_mode(const std::string& name) {
  if (name == "dense") return ExecMode::kDense;
  if (name == "sparse") return ExecMode::kSparse;
  if (name == "async") return ExecMode::kAsync;
  throw std::invalid_argument("unknown mode '" + name + "' (dense, sparse or async)");
}

uint64_t flops_dense_conv(int h_out, int w_out, int c_in, int c_out, int kernel) {
  return static_cast<uint64_t>(h_out) * w_out * c_out *
         (2ull * kernel * kernel * c_in - 1);
}

uint64_t flops_sparse_conv(uint64_t rules, int c_in, int c_out) {
  return rules * c_in * (2ull * c_out + 1);
}

uint64_t flops_dense_pool(int h_out, int w_out, int channels, int kernel) {
  return static_cast<uint64_t>(h_out) * w_out * channels * kernel * kernel;
}

uint64_t flops_sparse_pool(uint64_t active, int channels, int kernel) {
  return active * channels * kernel * kernel;
}

uint64_t flops_fc(int c_in, int c_out) { return 2ull * c_in * c_out; }

uint64_t flops_dense_relu(int h_out, int w_out, int channels) {
  return static_cast<uint64_t>(h_out) * w_out * channels;
}

uint64_t flops_sparse_relu(uint64_t active, int channels) { return active * channels; }

uint64_t analytic_flops(const LayerTrace& t) {
  const bool dense = t.mode == ExecMode::kDense;
  const auto active = static_cast<uint64_t>(t.active);
  switch (t.kind) {
    case LayerKind::kConv:
      return dense ? flops_dense_conv(t.h_out, t.w_out, t.c_in, t.c_out, t.kernel)
                   : flops_sparse_conv(static_cast<uint64_t>(t.rules), t.c_in, t.c_out);
    case LayerKind::kMaxPool:
      return dense ? flops_dense_pool(t.h_out, t.w_out, t.c_out, t.kernel)
                   : flops_sparse_pool(active, t.c_out, t.kernel);
    case LayerKind::kRelu:
      return dense ? flops_dense_relu(t.h_out, t.w_out, t.c_in)
                   : flops_sparse_relu(active, t.c_in);
    case LayerKind::kFc: return flops_fc(t.c_in, t.c_out);
    case LayerKind::kBatchNorm: break;
  }
  throw std::invalid_argument("no FLOP formula for " + to_string(t.kind));
}

uint64_t FlopLedger::total_counted() const {
  uint64_t s = 0;
  for (const auto& r : rows) s += r.counted;
  return s;
}

uint64_t FlopLedger::total_analytic() const {
  uint64_t s = 0;
  for (const auto& r : rows) s += r.analytic;
  return s;
}

bool FlopLedger::consistent() const {
  return std::all_of(rows.begin(), rows.end(),
                     [](const FlopRow& r) { return r.counted == r.analytic; });
}

FlopLedger ledger_for_run(const NetworkSpec& net, const RunTrace& trace) {
  if (trace.size() != net.layers.size()) {
    throw std::invalid_argument("incomplete trace: " + std::to_string(trace.size()) +
                                " entries for " + std::to_string(net.layers.size()) + " layers");
  }
  FlopLedger ledger;
  ledger.network = net.name;
  for (size_t n = 0; n < trace.size(); ++n) {
    const LayerTrace& t = trace[n];
    if (t.kind != net.layers[n].kind) {
      throw std::invalid_argument("incomplete trace: layer " + std::to_string(n) + " is " +
                                  to_string(t.kind) + ", network has " +
                                  to_string(net.layers[n].kind));
    }
    if (t.h_out <= 0 || t.w_out <= 0 || t.c_out <= 0 || t.rules < 0 || t.active < 0 ||
        (t.kind != LayerKind::kFc && t.c_in <= 0) ||
        ((t.kind == LayerKind::kConv || t.kind == LayerKind::kMaxPool) && t.kernel <= 0)) {
      throw std::invalid_argument("incomplete trace: layer " + std::to_string(n) +
                                  " is missing dimensions");
    }
    ledger.rows.push_back({n, t, t.flops, analytic_flops(t)});
  }
  return ledger;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double round_to_9(double v) { return std::strtod(format_number(v).c_str(), nullptr); }

std::string ledger_csv(const FlopLedger& ledger) {
  std::string out = "layer,kind,mode,counted_flops,analytic_flops,rules,active,h_out,w_out,c_in,c_out,kernel\n";
  for (const auto& r : ledger.rows) {
    const LayerTrace& t = r.trace;
    out += std::to_string(r.layer) + ',' + to_string(t.kind) + ',' + to_string(t.mode) + ',' +
           std::to_string(r.counted) + ',' + std::to_string(r.analytic) + ',' +
           std::to_string(t.rules) + ',' + std::to_string(t.active) + ',' +
           std::to_string(t.h_out) + ',' + std::to_string(t.w_out) + ',' +
           std::to_string(t.c_in) + ',' + std::to_string(t.c_out) + ',' +
           std::to_string(t.kernel) + '\n';
  }
  out += "total,,," + std::to_string(ledger.total_counted()) + ',' +
         std::to_string(ledger.total_analytic()) + ",,,,,,,\n";
  return out;
}

nlohmann::json ledger_json(const FlopLedger& ledger) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& r : ledger.rows) {
    const LayerTrace& t = r.trace;
    layers.push_back({{"layer", r.layer},
                      {"kind", to_string(t.kind)},
                      {"mode", to_string(t.mode)},
                      {"counted_flops", r.counted},
                      {"analytic_flops", r.analytic},
                      {"rules", t.rules},
                      {"active", t.active},
                      {"h_out", t.h_out},
                      {"w_out", t.w_out},
                      {"c_in", t.c_in},
                      {"c_out", t.c_out},
                      {"kernel", t.kernel}});
  }
  return {{"network", ledger.network},
          {"layers", layers},
          {"total_counted_flops", ledger.total_counted()},
          {"total_analytic_flops", ledger.total_analytic()}};
}

std::vector<int> default_fractal_radii() { return {1, 2, 3, 4, 6, 8, 12, 16}; }

namespace {

// Summed-area table over an activity mask.
class ActiveCounter {
 public:
  ActiveCounter(const SiteSet& active, Resolution res)
      : res_(res), sum_(static_cast<size_t>(res.width + 1) * (res.height + 1), 0) {
    for (Site s : active.sorted()) {
      if (res.contains(s)) at(s.x + 1, s.y + 1) = 1;
    }
    for (int y = 1; y <= res.height; ++y) {
      for (int x = 1; x <= res.width; ++x) {
        at(x, y) += at(x - 1, y) + at(x, y - 1) - at(x - 1, y - 1);
      }
    }
  }

  int64_t count(Site c, int r) const {
    const int x0 = c.x - r, y0 = c.y - r, x1 = c.x + r + 1, y1 = c.y + r + 1;
    return get(x1, y1) - get(x0, y1) - get(x1, y0) + get(x0, y0);
  }

  bool fits(Site c, int r) const {
    return c.x - r >= 0 && c.y - r >= 0 && c.x + r < res_.width && c.y + r < res_.height;
  }

 private:
  int64_t& at(int x, int y) { return sum_[static_cast<size_t>(y) * (res_.width + 1) + x]; }
  int64_t get(int x, int y) const { return sum_[static_cast<size_t>(y) * (res_.width + 1) + x]; }

  Resolution res_;
  std::vector<int64_t> sum_;
};

void check_radii(std::vector<int>& radii) {
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
  if (radii.size() < 2) throw std::invalid_argument("fractal fit needs at least two radii");
  if (radii.front() < 0) throw std::invalid_argument("fractal radii must be non-negative");
}

void fit(FractalEstimate& est) {
  std::vector<double> lx, ly;
  for (size_t i = 0; i < est.radii.size(); ++i) {
    if (est.counts[i] <= 0) continue;
    lx.push_back(std::log(2.0 * est.radii[i] + 1.0));
    ly.push_back(std::log(est.counts[i]));
  }
  if (lx.size() < 2) {
    throw std::invalid_argument("fractal fit needs at least two in-bounds radii with active sites");
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  est.gamma = sxy / sxx;
  const double icpt = my - est.gamma * mx;
  double ss = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    const double e = ly[i] - (icpt + est.gamma * lx[i]);
    ss += e * e;
  }
  est.residual = std::sqrt(ss / n);
}

}  // namespace

FractalEstimate fractal_dimension(const SiteSet& active, Resolution res, Site center,
                                  std::vector<int> radii) {
  check_radii(radii);
  if (!res.contains(center)) throw std::invalid_argument("fractal center outside the image");
  const ActiveCounter counter(active, res);
  FractalEstimate est;
  est.center = center;
  for (int r : radii) {
    if (!counter.fits(center, r)) continue;
    est.radii.push_back(r);
    est.counts.push_back(static_cast<double>(counter.count(center, r)));
  }
  fit(est);
  return est;
}

FractalEstimate fractal_dimension(const Representation& rep, Site center, std::vector<int> radii) {
  const SiteSet active(compute_active_sites(rep));
  return fractal_dimension(active, rep.resolution(), center, std::move(radii));
}

FractalEstimate mean_fractal_dimension(const Representation& rep, std::vector<int> radii) {
  check_radii(radii);
  const auto sites = compute_active_sites(rep);
  const ActiveCounter counter(SiteSet(sites), rep.resolution());
  FractalEstimate est;
  est.centers = 0;
  // Largest radius that still fits somewhere.
  while (radii.size() > 2 && 2 * radii.back() + 1 > std::min(rep.width, rep.height)) radii.pop_back();
  est.radii = radii;
  est.counts.assign(radii.size(), 0.0);
  for (Site s : sites) {
    if (!counter.fits(s, radii.back())) continue;
    ++est.centers;
    for (size_t i = 0; i < radii.size(); ++i) {
      est.counts[i] += static_cast<double>(counter.count(s, radii[i]));
    }
  }
  if (est.centers == 0) {
    throw std::invalid_argument("no active site far enough from the border for the given radii");
  }
  for (double& c : est.counts) c /= static_cast<double>(est.centers);
  fit(est);
  return est;
}

std::string fractal_csv(const FractalEstimate& est) {
  std::string out = "radius,side,count\n";
  for (size_t i = 0; i < est.radii.size(); ++i) {
    out += std::to_string(est.radii[i]) + ',' + std::to_string(2 * est.radii[i] + 1) + ',' +
           format_number(est.counts[i]) + '\n';
  }
  out += "gamma,," + format_number(est.gamma) + '\n';
  out += "residual,," + format_number(est.residual) + '\n';
  return out;
}

nlohmann::json fractal_json(const FractalEstimate& est) {
  nlohmann::json radii = nlohmann::json::array();
  for (size_t i = 0; i < est.radii.size(); ++i) {
    radii.push_back({{"radius", est.radii[i]}, {"count", round_to_9(est.counts[i])}});
  }
  return {{"center", {est.center.x, est.center.y}},
          {"centers", est.centers},
          {"radii", radii},
          {"gamma", round_to_9(est.gamma)},
          {"residual", round_to_9(est.residual)}};
}

}  // namespace evsparse
