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
#include <filesystem>
#include <random>

#include "doctest.h"
#include "evsparse/dense.hpp"
#include "evsparse/model_io.hpp"
#include "support.hpp"

using namespace evsparse;

namespace {

// 4x4 histogram input, conv 3x3 2->3, batchnorm, relu, pool 2, fc 12->2.
NetworkSpec bn_net(std::vector<float> gamma, std::vector<float> beta, std::vector<float> mean,
                   std::vector<float> var, float eps) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> w(9 * 2 * 3), b(3), fw(2 * 12), fb(2);
  for (auto* v : {&w, &b, &fw, &fb})
    for (auto& x : *v) x = u(rng);
  NetworkSpec net;
  net.name = "bn";
  net.input_width = net.input_height = 4;
  net.input_channels = 2;
  net.layers = {LayerSpec::conv(3, 2, 3, w, b),
                LayerSpec::batchnorm(3, gamma, beta, mean, var, eps), LayerSpec::relu(),
                LayerSpec::maxpool(2), LayerSpec::fc(12, 2, fw, fb)};
  return net;
}

}  // namespace

TEST_CASE("identity batchnorm folds to the same conv") {
  const auto net = bn_net({1, 1, 1}, {0, 0, 0}, {0, 0, 0}, {1, 1, 1}, 0.0f);
  const auto folded = fold_batchnorm(net);
  REQUIRE(folded.layers.size() == 4);
  CHECK(folded.layers[0].weights == net.layers[0].weights);
  CHECK(folded.layers[0].bias == net.layers[0].bias);
  CHECK_NOTHROW(validate_network(folded));
  CHECK_THROWS_AS(validate_network(net), NetworkError);
}

TEST_CASE("batchnorm scale doubles weights and shifts bias") {
  const auto net = bn_net({2, 2, 2}, {0.5f, 0, 0}, {0.25f, 0, 0}, {1, 1, 1}, 0.0f);
  const auto f = fold_batchnorm(net);
  for (size_t i = 0; i < f.layers[0].weights.size(); ++i)
    CHECK(f.layers[0].weights[i] == 2.0f * net.layers[0].weights[i]);
  CHECK(f.layers[0].bias[0] == doctest::Approx((net.layers[0].bias[0] - 0.25) * 2 + 0.5));
  CHECK(f.layers[0].bias[1] == 2.0f * net.layers[0].bias[1]);
}

TEST_CASE("folded conv matches conv followed by batchnorm") {
  const std::vector<float> g = {0.7f, 1.3f, -0.4f}, be = {0.1f, -0.2f, 0.3f},
                           m = {0.05f, -0.5f, 0.2f}, v = {0.5f, 2.0f, 0.9f};
  const float eps = 1e-3f;
  const auto net = bn_net(g, be, m, v, eps);
  const auto f = fold_batchnorm(net);
  const auto stream = evsparse::testing::random_stream(1, 4, 4, 30);
  const auto rep = build_representation(RepresentationKind::kHistogram, stream.events, 4, 4);
  const auto x = dense_input<double>(rep);
  const auto raw = dense_conv(x, net.layers[0]);
  const auto fused = dense_conv(x, f.layers[0]);
  double worst = 0.0;
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 4; ++xx)
      for (int c = 0; c < 3; ++c) {
        const double ref = (raw.at(xx, y, c) - m[c]) / std::sqrt(v[c] + eps) * g[c] + be[c];
        worst = std::max(worst, std::abs(fused.at(xx, y, c) - ref));
      }
  CHECK(worst < 1e-5);
}

TEST_CASE("model bytes round trip and load folds") {
  const auto net = bn_net({1.5f, 1, 1}, {0, 0, 0}, {0, 0, 0}, {1, 1, 1}, 1e-5f);
  const auto bytes = serialize_model(net);
  CHECK(bytes.substr(0, 4) == "EVSN");
  CHECK(serialize_model(parse_model(bytes)) == bytes);

  const auto path = (std::filesystem::temp_directory_path() / "evsparse_model.bin").string();
  save_model(net, path);
  const auto loaded = load_model(path);
  CHECK(loaded.layers.size() == 4);
  CHECK(loaded.layers[0].weights == fold_batchnorm(net).layers[0].weights);
  std::filesystem::remove(path);
}

TEST_CASE("every truncation of a model file is reported") {
  const auto bytes = serialize_model(random_model(3, "small"));
  for (size_t n = 0; n < bytes.size(); n += 1 + n / 8) {
    CHECK_THROWS_AS(parse_model(std::string_view(bytes).substr(0, n)), ModelFormatError);
  }
  CHECK_THROWS_AS(parse_model(bytes + "x"), ModelFormatError);
}

TEST_CASE("bad magic and version are reported") {
  auto bytes = serialize_model(random_model(3, "small"));
  auto wrong_version = bytes;
  wrong_version[4] = 2;
  try {
    parse_model(wrong_version);
    FAIL("expected error");
  } catch (const ModelFormatError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
  bytes[0] = 'X';
  CHECK_THROWS_AS(parse_model(bytes), ModelFormatError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.bin"), ModelFormatError);
}

TEST_CASE("random models are deterministic per seed") {
  for (const char* t : {"small", "random", "vgg13"}) {
    CHECK(serialize_model(random_model(9, t)) == serialize_model(random_model(9, t)));
  }
  CHECK(serialize_model(random_model(9, "random")) != serialize_model(random_model(10, "random")));
  CHECK_THROWS_AS(random_model(1, "resnet"), std::invalid_argument);
}

TEST_CASE("seed comes from the environment") {
  setenv("ASYNC_SPARSE_SEED", "42", 1);
  CHECK(seed_from_env() == 42);
  setenv("ASYNC_SPARSE_SEED", "4x", 1);
  CHECK_THROWS(seed_from_env());
  unsetenv("ASYNC_SPARSE_SEED");
  CHECK(seed_from_env(7) == 7);
}
