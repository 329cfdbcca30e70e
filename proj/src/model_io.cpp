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
#include "evsparse/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace evsparse {

namespace {

static_assert(std::endian::native == std::endian::little, "model files assume little endian");

constexpr char kMagic[4] = {'E', 'V', 'S', 'N'};

class Writer {
 public:
  void u32(uint32_t v) { raw(&v, 4); }
  void f32(float v) { raw(&v, 4); }
  void floats(const std::vector<float>& v) { raw(v.data(), v.size() * 4); }
  void raw(const void* p, size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  uint32_t u32(const char* what) {
    uint32_t v;
    raw(&v, 4, what);
    return v;
  }
  float f32(const char* what) {
    float v;
    raw(&v, 4, what);
    return v;
  }
  std::vector<float> floats(size_t n, const std::string& what) {
    if (n > remaining() / 4) {
      throw ModelFormatError("truncated payload: " + what + " needs " + std::to_string(n) +
                             " floats, " + std::to_string(remaining() / 4) + " left");
    }
    std::vector<float> v(n);
    raw(v.data(), n * 4, what.c_str());
    return v;
  }
  void raw(void* p, size_t n, const char* what) {
    if (n > remaining()) throw ModelFormatError(std::string("truncated model file reading ") + what);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  size_t remaining() const { return in_.size() - pos_; }

 private:
  std::string_view in_;
  size_t pos_ = 0;
};

uint32_t kind_code(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return 0;
    case LayerKind::kBatchNorm: return 1;
    case LayerKind::kRelu: return 2;
    case LayerKind::kMaxPool: return 3;
    case LayerKind::kFc: return 4;
  }
  return 255;
}

int checked_dim(uint32_t v, const std::string& what) {
  if (v == 0 || v > (1u << 24)) throw ModelFormatError("shape inconsistency: bad " + what);
  return static_cast<int>(v);
}

// Uniform in [-bound, bound) from the top 53 bits, independent of the
// standard library's distribution implementation.
class WeightSource {
 public:
  explicit WeightSource(uint64_t seed) : rng_(seed) {}
  float uniform(double bound) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return static_cast<float>((2.0 * u - 1.0) * bound);
  }
  std::vector<float> fill(size_t n, double bound) {
    std::vector<float> v(n);
    for (float& x : v) x = uniform(bound);
    return v;
  }
  uint64_t below(uint64_t n) { return rng_() % n; }

 private:
  std::mt19937_64 rng_;
};

LayerSpec random_conv(WeightSource& src, int kernel, int c_in, int c_out) {
  const double bound = std::sqrt(6.0 / (static_cast<double>(kernel) * kernel * c_in));
  auto w = src.fill(static_cast<size_t>(kernel) * kernel * c_in * c_out, bound);
  auto b = src.fill(static_cast<size_t>(c_out), 0.1);
  return LayerSpec::conv(kernel, c_in, c_out, std::move(w), std::move(b));
}

LayerSpec random_fc(WeightSource& src, int in, int out) {
  const double bound = std::sqrt(6.0 / in);
  auto w = src.fill(static_cast<size_t>(in) * out, bound);
  auto b = src.fill(static_cast<size_t>(out), 0.1);
  return LayerSpec::fc(in, out, std::move(w), std::move(b));
}

struct Block {
  int convs;
  int width;
  int kernel;
};

NetworkSpec build_blocks(WeightSource& src, NetworkSpec net, const std::vector<Block>& blocks,
                         int classes) {
  int channels = net.input_channels;
  Resolution res = net.input_resolution();
  for (const Block& b : blocks) {
    for (int i = 0; i < b.convs; ++i) {
      net.layers.push_back(random_conv(src, b.kernel, channels, b.width));
      net.layers.push_back(LayerSpec::relu());
      channels = b.width;
    }
    net.layers.push_back(LayerSpec::maxpool(2));
    res = {pooled_extent(res.width, 2, net.ceil_pooling),
           pooled_extent(res.height, 2, net.ceil_pooling)};
  }
  net.layers.push_back(random_fc(src, static_cast<int>(res.area()) * channels, classes));
  return net;
}

}  // namespace

std::string serialize_model(const NetworkSpec& net) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kModelVersion);
  w.u32(static_cast<uint32_t>(net.name.size()));
  w.raw(net.name.data(), net.name.size());
  w.u32(net.representation == RepresentationKind::kHistogram ? 0 : 1);
  w.u32(static_cast<uint32_t>(net.window));
  w.u32(static_cast<uint32_t>(net.input_width));
  w.u32(static_cast<uint32_t>(net.input_height));
  w.u32(static_cast<uint32_t>(net.input_channels));
  w.u32(net.ceil_pooling ? 1u : 0u);
  w.u32(static_cast<uint32_t>(net.layers.size()));
  for (const LayerSpec& l : net.layers) {
    w.u32(kind_code(l.kind));
    switch (l.kind) {
      case LayerKind::kConv:
        w.u32(static_cast<uint32_t>(l.kernel));
        w.u32(static_cast<uint32_t>(l.in_channels));
        w.u32(static_cast<uint32_t>(l.out_channels));
        break;
      case LayerKind::kBatchNorm:
        w.u32(static_cast<uint32_t>(l.in_channels));
        w.f32(l.eps);
        break;
      case LayerKind::kRelu: break;
      case LayerKind::kMaxPool: w.u32(static_cast<uint32_t>(l.kernel)); break;
      case LayerKind::kFc:
        w.u32(static_cast<uint32_t>(l.in_channels));
        w.u32(static_cast<uint32_t>(l.out_channels));
        break;
    }
  }
  for (const LayerSpec& l : net.layers) {
    if (l.kind == LayerKind::kConv || l.kind == LayerKind::kFc) {
      w.floats(l.weights);
      w.floats(l.bias);
    } else if (l.kind == LayerKind::kBatchNorm) {
      w.floats(l.gamma);
      w.floats(l.beta);
      w.floats(l.mean);
      w.floats(l.var);
    }
  }
  return w.take();
}

NetworkSpec parse_model(std::string_view bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw ModelFormatError("not a model file (bad magic)");
  const uint32_t version = r.u32("version");
  if (version != kModelVersion) {
    throw ModelFormatError("unsupported model version " + std::to_string(version) +
                           " (expected " + std::to_string(kModelVersion) + ")");
  }
  NetworkSpec net;
  const uint32_t name_len = r.u32("name length");
  if (name_len > r.remaining()) throw ModelFormatError("truncated model file reading name");
  net.name.resize(name_len);
  r.raw(net.name.data(), name_len, "name");
  const uint32_t repr = r.u32("representation");
  if (repr > 1) throw ModelFormatError("unknown representation code " + std::to_string(repr));
  net.representation = repr == 0 ? RepresentationKind::kHistogram : RepresentationKind::kQueue;
  net.window = checked_dim(r.u32("window"), "window");
  net.input_width = checked_dim(r.u32("width"), "width");
  net.input_height = checked_dim(r.u32("height"), "height");
  net.input_channels = checked_dim(r.u32("channels"), "channels");
  net.ceil_pooling = (r.u32("flags") & 1u) != 0;
  const uint32_t count = r.u32("layer count");
  if (count > r.remaining() / 4) throw ModelFormatError("truncated layer table");
  for (uint32_t n = 0; n < count; ++n) {
    LayerSpec l;
    const uint32_t code = r.u32("layer kind");
    switch (code) {
      case 0:
        l.kind = LayerKind::kConv;
        l.kernel = checked_dim(r.u32("kernel"), "conv kernel");
        l.in_channels = checked_dim(r.u32("c_in"), "conv c_in");
        l.out_channels = checked_dim(r.u32("c_out"), "conv c_out");
        break;
      case 1:
        l.kind = LayerKind::kBatchNorm;
        l.in_channels = l.out_channels = checked_dim(r.u32("channels"), "batchnorm channels");
        l.eps = r.f32("eps");
        if (!(l.eps >= 0.0f)) throw ModelFormatError("shape inconsistency: negative eps");
        break;
      case 2: l.kind = LayerKind::kRelu; break;
      case 3:
        l.kind = LayerKind::kMaxPool;
        l.kernel = checked_dim(r.u32("kernel"), "pool kernel");
        break;
      case 4:
        l.kind = LayerKind::kFc;
        l.in_channels = checked_dim(r.u32("in"), "fc input size");
        l.out_channels = checked_dim(r.u32("out"), "fc output size");
        break;
      default: throw ModelFormatError("unknown layer kind code " + std::to_string(code));
    }
    net.layers.push_back(std::move(l));
  }
  for (size_t n = 0; n < net.layers.size(); ++n) {
    LayerSpec& l = net.layers[n];
    const std::string where = "layer " + std::to_string(n);
    if (l.kind == LayerKind::kConv) {
      l.weights = r.floats(static_cast<size_t>(l.kernel) * l.kernel * l.in_channels *
                               l.out_channels, where + " weights");
      l.bias = r.floats(static_cast<size_t>(l.out_channels), where + " bias");
    } else if (l.kind == LayerKind::kFc) {
      l.weights = r.floats(static_cast<size_t>(l.in_channels) * l.out_channels, where + " weights");
      l.bias = r.floats(static_cast<size_t>(l.out_channels), where + " bias");
    } else if (l.kind == LayerKind::kBatchNorm) {
      const auto c = static_cast<size_t>(l.in_channels);
      l.gamma = r.floats(c, where + " gamma");
      l.beta = r.floats(c, where + " beta");
      l.mean = r.floats(c, where + " mean");
      l.var = r.floats(c, where + " var");
    }
  }
  if (r.remaining() != 0) {
    throw ModelFormatError("shape inconsistency: " + std::to_string(r.remaining()) +
                           " trailing payload bytes");
  }
  return net;
}

NetworkSpec fold_batchnorm(const NetworkSpec& net) {
  NetworkSpec out = net;
  out.layers.clear();
  for (size_t n = 0; n < net.layers.size(); ++n) {
    const LayerSpec& l = net.layers[n];
    if (l.kind != LayerKind::kBatchNorm) {
      out.layers.push_back(l);
      continue;
    }
    if (out.layers.empty() || out.layers.back().kind != LayerKind::kConv) {
      throw ModelFormatError("batchnorm at layer " + std::to_string(n) +
                             " does not follow a conv");
    }
    LayerSpec& conv = out.layers.back();
    const int c_out = conv.out_channels;
    if (l.in_channels != c_out || l.gamma.size() != static_cast<size_t>(c_out) ||
        l.beta.size() != l.gamma.size() || l.mean.size() != l.gamma.size() ||
        l.var.size() != l.gamma.size()) {
      throw ModelFormatError("shape inconsistency: batchnorm at layer " + std::to_string(n) +
                             " does not match the conv width");
    }
    for (int c = 0; c < c_out; ++c) {
      const double scale = l.gamma[c] / std::sqrt(static_cast<double>(l.var[c]) + l.eps);
      for (size_t i = static_cast<size_t>(c); i < conv.weights.size(); i += c_out) {
        conv.weights[i] = static_cast<float>(conv.weights[i] * scale);
      }
      conv.bias[c] = static_cast<float>((conv.bias[c] - l.mean[c]) * scale + l.beta[c]);
    }
  }
  return out;
}

NetworkSpec load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError("cannot open model file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  NetworkSpec net = fold_batchnorm(parse_model(buf.str()));
  try {
    validate_network(net);
  } catch (const NetworkError& e) {
    throw ModelFormatError(std::string("shape inconsistency: ") + e.what());
  }
  return net;
}

void save_model(const NetworkSpec& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelFormatError("cannot write model file " + path);
  const std::string bytes = serialize_model(net);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ModelFormatError("write failed for " + path);
}

NetworkSpec random_model(uint64_t seed, const std::string& template_name) {
  WeightSource src(seed);
  NetworkSpec net;
  net.name = template_name;
  if (template_name == "vgg13") {
    net.input_width = 240;
    net.input_height = 180;
    net.ceil_pooling = true;
    net.input_channels = representation_channels(net.representation);
    net = build_blocks(src, net,
                       {{2, 64, 3}, {2, 128, 3}, {2, 256, 3}, {2, 512, 3}, {2, 512, 3}}, 101);
  } else if (template_name == "small") {
    net.input_width = net.input_height = 32;
    net.input_channels = representation_channels(net.representation);
    net = build_blocks(src, net, {{1, 8, 3}, {1, 16, 3}}, 10);
  } else if (template_name == "random") {
    net.input_width = net.input_height = 32;
    net.representation = src.below(2) == 0 ? RepresentationKind::kHistogram
                                           : RepresentationKind::kQueue;
    net.input_channels = representation_channels(net.representation);
    const int num_blocks = 2 + static_cast<int>(src.below(4));
    std::vector<Block> blocks;
    constexpr int kKernels[] = {3, 3, 3, 1, 5};
    for (int b = 0; b < num_blocks; ++b) {
      blocks.push_back({1 + static_cast<int>(src.below(2)), 2 + static_cast<int>(src.below(5)),
                        kKernels[src.below(5)]});
    }
    net = build_blocks(src, net, blocks, 2 + static_cast<int>(src.below(4)));
  } else {
    throw std::invalid_argument("unknown model template '" + template_name +
                                "' (vgg13, small or random)");
  }
  validate_network(net);
  return net;
}

uint64_t seed_from_env(uint64_t fallback) {
  const char* v = std::getenv("ASYNC_SPARSE_SEED");
  if (v == nullptr || *v == '\0') return fallback;
  char* end = nullptr;
  const unsigned long long seed = std::strtoull(v, &end, 10);
  if (*end != '\0') throw std::invalid_argument("ASYNC_SPARSE_SEED must be an unsigned integer");
  return seed;
}

}  // namespace evsparse
