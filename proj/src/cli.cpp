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
#include "evsparse/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "evsparse/analysis.hpp"
#include "evsparse/async_engine.hpp"
#include "evsparse/dense.hpp"
#include "evsparse/events.hpp"
#include "evsparse/layers.hpp"
#include "evsparse/model_io.hpp"
#include "evsparse/representation.hpp"

namespace evsparse {

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

NetworkSpec resolve_model(const std::string& arg) {
  constexpr std::string_view kRandom = "random:";
  if (arg.rfind(kRandom, 0) == 0) {
    return random_model(seed_from_env(), arg.substr(kRandom.size()));
  }
  return load_model(arg);
}

// Applies the --repr/--window overrides and checks them against the model.
void apply_overrides(NetworkSpec& net, const std::optional<std::string>& repr,
                     const std::optional<int>& window) {
  if (repr) {
    const auto kind = parse_representation_kind(*repr);
    if (representation_channels(kind) != net.input_channels) {
      throw CliError("model expects " + std::to_string(net.input_channels) +
                     " input channels, " + *repr + " has " +
                     std::to_string(representation_channels(kind)));
    }
    net.representation = kind;
  }
  if (window) {
    if (*window <= 0) throw CliError("--window must be positive");
    net.window = *window;
  }
}

EventStream load_stream(const std::string& path, const NetworkSpec* net) {
  EventStream s = read_events(path);
  if (net && (s.width != net->input_width || s.height != net->input_height)) {
    throw CliError("event stream is " + std::to_string(s.width) + "x" +
                   std::to_string(s.height) + ", model input is " +
                   std::to_string(net->input_width) + "x" + std::to_string(net->input_height));
  }
  return s;
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CliError("cannot write " + path);
  f << text;
  if (!f) throw CliError("write failed for " + path);
}

uint64_t total_flops(const RunTrace& trace) {
  uint64_t s = 0;
  for (const auto& t : trace) s += t.flops;
  return s;
}

std::string join_outputs(const std::vector<float>& v) {
  std::string s;
  for (float x : v) s += ',' + format_number(x);
  return s;
}

nlohmann::json rounded(const std::vector<float>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (float x : v) a.push_back(round_to_9(x));
  return a;
}

int argmax(const std::vector<float>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct Step {
  size_t first = 0;
  size_t last = 0;  // exclusive
};

std::vector<Step> make_steps(size_t events, int batch) {
  if (batch <= 0) throw CliError("--batch must be positive");
  std::vector<Step> steps;
  for (size_t i = 0; i < events; i += static_cast<size_t>(batch)) {
    steps.push_back({i, std::min(events, i + static_cast<size_t>(batch))});
  }
  return steps;
}

struct RunOptions {
  std::string model, events, output;
  std::optional<std::string> repr;
  std::optional<int> window;
  std::string mode = "async";
  int batch = 1;
  bool json = false;
};

void cmd_run(const RunOptions& o, std::ostream& out) {
  NetworkSpec net = resolve_model(o.model);
  apply_overrides(net, o.repr, o.window);
  const auto shared = std::make_shared<const NetworkSpec>(net);
  const ExecMode mode = parse_exec_mode(o.mode);
  const EventStream stream = load_stream(o.events, &net);
  SlidingWindow win(net.representation, net.input_width, net.input_height, net.window);
  std::optional<AsyncEngine<float>> engine;
  if (mode == ExecMode::kAsync) engine.emplace(shared, win.representation());

  std::string csv = "step,t,active_sites,flops,argmax";
  const int classes = net.layers.back().out_channels;
  for (int c = 0; c < classes; ++c) csv += ",out_" + std::to_string(c);
  csv += '\n';
  nlohmann::json steps = nlohmann::json::array();
  uint64_t grand = 0;
  const auto plan = make_steps(stream.events.size(), o.batch);
  for (size_t k = 0; k < plan.size(); ++k) {
    const std::span<const Event> batch(stream.events.data() + plan[k].first,
                                       plan[k].last - plan[k].first);
    const SparseUpdate update = win.push_batch(batch);
    std::vector<float> output;
    uint64_t flops = 0;
    if (mode == ExecMode::kAsync) {
      output = engine->process(update);
      flops = total_flops(engine->last_trace());
    } else if (mode == ExecMode::kSparse) {
      auto r = sparse_forward<float>(net, win.representation());
      output = std::move(r.output);
      flops = total_flops(r.trace);
    } else {
      auto r = dense_forward<float>(net, win.representation());
      output = std::move(r.output);
      flops = total_flops(r.trace);
    }
    grand += flops;
    const size_t active = compute_active_sites(win.representation()).size();
    const int64_t t = batch.back().t;
    csv += std::to_string(k) + ',' + std::to_string(t) + ',' + std::to_string(active) + ',' +
           std::to_string(flops) + ',' + std::to_string(argmax(output)) + join_outputs(output) +
           '\n';
    if (o.json) {
      steps.push_back({{"step", k},
                       {"t", t},
                       {"active_sites", active},
                       {"flops", flops},
                       {"argmax", argmax(output)},
                       {"output", rounded(output)}});
    }
  }
  if (o.json) {
    const nlohmann::json doc = {{"network", net.name},
                                {"mode", to_string(mode)},
                                {"representation", to_string(net.representation)},
                                {"window", net.window},
                                {"batch", o.batch},
                                {"total_flops", grand},
                                {"steps", steps}};
    write_output(o.output, doc.dump(2) + '\n', out);
  } else {
    write_output(o.output, csv, out);
  }
}

void cmd_compare(const RunOptions& o, std::ostream& out) {
  NetworkSpec net = resolve_model(o.model);
  apply_overrides(net, o.repr, o.window);
  const auto shared = std::make_shared<const NetworkSpec>(net);
  const EventStream stream = load_stream(o.events, &net);
  SlidingWindow win(net.representation, net.input_width, net.input_height, net.window);
  AsyncEngine<float> engine(shared, win.representation());

  std::string csv =
      "step,t,active_sites,async_sparse_deviation,dense_sparse_deviation,"
      "dense_flops,sparse_flops,async_flops\n";
  nlohmann::json steps = nlohmann::json::array();
  double worst_async = 0.0;
  uint64_t sum_dense = 0, sum_sparse = 0, sum_async = 0;
  RunTrace last_dense, last_sparse, last_async;
  const auto plan = make_steps(stream.events.size(), o.batch);
  for (size_t k = 0; k < plan.size(); ++k) {
    const std::span<const Event> batch(stream.events.data() + plan[k].first,
                                       plan[k].last - plan[k].first);
    const auto& async_out = engine.process(win.push_batch(batch));
    auto sparse = sparse_forward<float>(net, win.representation());
    auto dense = dense_forward<float>(net, win.representation());
    double d_async = 0.0, d_dense = 0.0;
    for (size_t i = 0; i < sparse.output.size(); ++i) {
      const double ref = sparse.output[i];
      const double scale = std::max(std::abs(ref), 0.1);
      d_async = std::max(d_async, std::abs(async_out[i] - ref) / scale);
      d_dense = std::max(d_dense, std::abs(dense.output[i] - ref) / scale);
    }
    worst_async = std::max(worst_async, d_async);
    const uint64_t fd = total_flops(dense.trace), fs = total_flops(sparse.trace),
                   fa = total_flops(engine.last_trace());
    sum_dense += fd;
    sum_sparse += fs;
    sum_async += fa;
    const size_t active = sparse.maps.front().size();
    const int64_t t = batch.back().t;
    csv += std::to_string(k) + ',' + std::to_string(t) + ',' + std::to_string(active) + ',' +
           format_number(d_async) + ',' + format_number(d_dense) + ',' + std::to_string(fd) +
           ',' + std::to_string(fs) + ',' + std::to_string(fa) + '\n';
    if (o.json) {
      steps.push_back({{"step", k},
                       {"t", t},
                       {"active_sites", active},
                       {"async_sparse_deviation", round_to_9(d_async)},
                       {"dense_sparse_deviation", round_to_9(d_dense)},
                       {"dense_flops", fd},
                       {"sparse_flops", fs},
                       {"async_flops", fa}});
    }
    last_dense = std::move(dense.trace);
    last_sparse = std::move(sparse.trace);
    last_async = engine.last_trace();
  }
  const double n = std::max<double>(1.0, static_cast<double>(plan.size()));
  std::vector<FlopLedger> ledgers;
  if (!plan.empty()) {
    ledgers = {ledger_for_run(net, last_dense), ledger_for_run(net, last_sparse),
               ledger_for_run(net, last_async)};
  }
  if (o.json) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : ledgers) layers.push_back(ledger_json(l));
    const nlohmann::json doc = {
        {"network", net.name},
        {"representation", to_string(net.representation)},
        {"window", net.window},
        {"batch", o.batch},
        {"max_async_sparse_deviation", round_to_9(worst_async)},
        {"mean_dense_flops", round_to_9(sum_dense / n)},
        {"mean_sparse_flops", round_to_9(sum_sparse / n)},
        {"mean_async_flops", round_to_9(sum_async / n)},
        {"steps", steps},
        {"final_step_ledgers", layers}};
    write_output(o.output, doc.dump(2) + '\n', out);
    return;
  }
  write_output(o.output, csv, out);
  std::string layer_csv;
  for (size_t i = 0; i < ledgers.size(); ++i) {
    std::string part = ledger_csv(ledgers[i]);
    if (i > 0) part.erase(0, part.find('\n') + 1);  // one header
    layer_csv += part;
  }
  if (!o.output.empty() && o.output != "-") write_output(o.output + ".layers.csv", layer_csv, out);
}

struct FlopsOptions {
  std::string model, output;
  std::optional<std::string> events;
  std::string mode = "dense";
  std::optional<std::string> repr;
  std::optional<int> window;
  bool json = false;
};

void cmd_flops(const FlopsOptions& o, std::ostream& out) {
  NetworkSpec net = resolve_model(o.model);
  apply_overrides(net, o.repr, o.window);
  const ExecMode mode = parse_exec_mode(o.mode);
  RunTrace trace;
  if (mode == ExecMode::kDense) {
    trace = dense_trace(net);
  } else {
    if (!o.events) throw CliError("--events is required for sparse and async modes");
    const EventStream stream = load_stream(*o.events, &net);
    if (stream.events.empty()) throw CliError("event stream is empty");
    SlidingWindow win(net.representation, net.input_width, net.input_height, net.window);
    if (mode == ExecMode::kSparse) {
      for (const Event& e : stream.events) win.push_event(e);
      trace = sparse_forward<float>(net, win.representation()).trace;
    } else {
      // Cost of the final event on top of everything before it.
      win.push_batch(std::span<const Event>(stream.events.data(), stream.events.size() - 1));
      AsyncEngine<float> engine(std::make_shared<const NetworkSpec>(net), win.representation());
      engine.process(win.push_event(stream.events.back()));
      trace = engine.last_trace();
    }
  }
  const FlopLedger ledger = ledger_for_run(net, trace);
  write_output(o.output, o.json ? ledger_json(ledger).dump(2) + '\n' : ledger_csv(ledger), out);
}

struct FractalOptions {
  std::string events, output, repr = "histogram", radii;
  int window = kDefaultWindow;
  std::optional<std::string> center;
  bool json = false;
};

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      v.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CliError(std::string("bad ") + what + " entry '" + item + "'");
    }
  }
  return v;
}

void cmd_fractal(const FractalOptions& o, std::ostream& out) {
  const EventStream stream = load_stream(o.events, nullptr);
  if (o.window <= 0) throw CliError("--window must be positive");
  const auto kind = parse_representation_kind(o.repr);
  const size_t keep = std::min(stream.events.size(), static_cast<size_t>(o.window));
  const Representation rep = build_representation(
      kind, std::span<const Event>(stream.events).last(keep), stream.width, stream.height);
  const auto radii = o.radii.empty() ? default_fractal_radii() : parse_int_list(o.radii, "radius");
  FractalEstimate est;
  if (o.center) {
    const auto c = parse_int_list(*o.center, "center");
    if (c.size() != 2) throw CliError("--center takes x,y");
    est = fractal_dimension(rep, {c[0], c[1]}, radii);
  } else {
    est = mean_fractal_dimension(rep, radii);
  }
  write_output(o.output, o.json ? fractal_json(est).dump(2) + '\n' : fractal_csv(est), out);
}

struct GenEventsOptions {
  std::string frames, output;
  double threshold = 0.2;
  int width = 64, height = 48, num_frames = 50;
  int64_t interval = 1000;
};

void cmd_gen_events(const GenEventsOptions& o, std::ostream& out) {
  constexpr std::string_view kSynthetic = "synthetic:";
  FrameSequence seq =
      o.frames.rfind(kSynthetic, 0) == 0
          ? synthetic_frames(o.frames.substr(kSynthetic.size()), o.width, o.height,
                             o.num_frames, o.interval)
          : read_frame_directory(o.frames);
  const EventStream stream = generate_events(seq, o.threshold);
  write_output(o.output, format_events(stream), out);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Event-driven sparse CNN inference"};
  app.require_subcommand(1);

  GenEventsOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-events", "Generate events from frames");
  gen_cmd->add_option("--frames", gen.frames, "Directory of <t>.pgm frames or synthetic:<ramp|contour|bar>")
      ->required();
  gen_cmd->add_option("--threshold", gen.threshold, "Log-intensity contrast threshold")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--width", gen.width, "Synthetic frame width");
  gen_cmd->add_option("--height", gen.height, "Synthetic frame height");
  gen_cmd->add_option("--num-frames", gen.num_frames, "Synthetic frame count");
  gen_cmd->add_option("--interval", gen.interval, "Synthetic frame interval in microseconds");
  gen_cmd->add_option("-o,--output", gen.output, "Event file")->required();

  std::string model_template = "small", model_out;
  auto* model_cmd = app.add_subcommand("gen-model", "Write a random model from a template");
  model_cmd->add_option("--template", model_template, "vgg13, small or random");
  model_cmd->add_option("-o,--output", model_out, "Model file")->required();

  RunOptions run;
  auto add_run_options = [&](CLI::App* cmd, bool with_mode) {
    cmd->add_option("--model", run.model, "Model file or random:<template>")->required();
    cmd->add_option("--events", run.events, "Event file")->required();
    cmd->add_option("--repr", run.repr, "histogram or queue");
    cmd->add_option("--window", run.window, "Sliding window size in events");
    if (with_mode) cmd->add_option("--mode", run.mode, "dense, sparse or async");
    cmd->add_option("--batch", run.batch, "Events per update");
    cmd->add_flag("--json", run.json, "Write JSON instead of CSV");
    cmd->add_option("-o,--output", run.output, "Report file")->required();
  };
  auto* run_cmd = app.add_subcommand("run", "Run a model over an event stream");
  add_run_options(run_cmd, true);
  auto* compare_cmd = app.add_subcommand("compare", "Run all three modes and compare them");
  add_run_options(compare_cmd, false);

  FlopsOptions flops;
  auto* flops_cmd = app.add_subcommand("flops", "Per-layer FLOP ledger");
  flops_cmd->add_option("--model", flops.model, "Model file or random:<template>")->required();
  flops_cmd->add_option("--events", flops.events, "Event file (sparse and async modes)");
  flops_cmd->add_option("--mode", flops.mode, "dense, sparse or async");
  flops_cmd->add_option("--repr", flops.repr, "histogram or queue");
  flops_cmd->add_option("--window", flops.window, "Sliding window size in events");
  flops_cmd->add_flag("--json", flops.json, "Write JSON instead of CSV");
  flops_cmd->add_option("-o,--output", flops.output, "Report file")->required();

  FractalOptions fractal;
  auto* fractal_cmd = app.add_subcommand("fractal", "Fractal dimension of the active sites");
  fractal_cmd->add_option("--events", fractal.events, "Event file")->required();
  fractal_cmd->add_option("--repr", fractal.repr, "histogram or queue");
  fractal_cmd->add_option("--window", fractal.window, "Events in the representation");
  fractal_cmd->add_option("--radii", fractal.radii, "Comma separated radii");
  fractal_cmd->add_option("--center", fractal.center, "x,y; default averages over active sites");
  fractal_cmd->add_flag("--json", fractal.json, "Write JSON instead of CSV");
  fractal_cmd->add_option("-o,--output", fractal.output, "Report file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (gen_cmd->parsed()) {
      cmd_gen_events(gen, out);
    } else if (model_cmd->parsed()) {
      save_model(random_model(seed_from_env(), model_template), model_out);
    } else if (run_cmd->parsed()) {
      cmd_run(run, out);
    } else if (compare_cmd->parsed()) {
      cmd_compare(run, out);
    } else if (flops_cmd->parsed()) {
      cmd_flops(flops, out);
    } else if (fractal_cmd->parsed()) {
      cmd_fractal(fractal, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace evsparse
