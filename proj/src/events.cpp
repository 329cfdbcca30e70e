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
#include "evsparse/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace evsparse {

namespace {

std::string record_msg(int64_t index, const std::string& what) {
  return "event record " + std::to_string(index) + ": " + what;
}

// Parses exactly `count` space-separated integers from `line`.
template <typename Int>
bool parse_fields(std::string_view line, std::vector<Int>& out, size_t count) {
  out.clear();
  const char* p = line.data();
  const char* end = p + line.size();
  while (out.size() < count) {
    if (!out.empty()) {
      if (p == end || *p != ' ') return false;
      ++p;
    }
    Int v{};
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc{} || next == p) return false;
    out.push_back(v);
    p = next;
  }
  return p == end;
}

}  // namespace

void validate_stream(const EventStream& stream) {
  if (stream.width <= 0 || stream.height <= 0) {
    throw EventFormatError(EventErrorKind::kMalformedHeader, -1,
                           "sensor resolution must be positive");
  }
  int64_t last_t = 0;
  for (size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    const auto idx = static_cast<int64_t>(i);
    if (e.x < 0 || e.y < 0 || e.x >= stream.width || e.y >= stream.height) {
      throw EventFormatError(EventErrorKind::kOutOfBounds, idx,
                             record_msg(idx, "pixel out of bounds"));
    }
    if (e.p != 1 && e.p != -1) {
      throw EventFormatError(EventErrorKind::kBadPolarity, idx,
                             record_msg(idx, "polarity must be 1 or -1"));
    }
    if (e.t < 0 || (i > 0 && e.t < last_t)) {
      throw EventFormatError(EventErrorKind::kTimestampRegression, idx,
                             record_msg(idx, "timestamp regression"));
    }
    last_t = e.t;
  }
}

EventStream parse_events(const std::string& text) {
  EventStream stream;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw EventFormatError(EventErrorKind::kMalformedHeader, -1, "missing header");
  }
  std::vector<int64_t> fields;
  if (!parse_fields<int64_t>(line, fields, 2) || fields[0] <= 0 || fields[1] <= 0 ||
      fields[0] > INT32_MAX || fields[1] > INT32_MAX) {
    throw EventFormatError(EventErrorKind::kMalformedHeader, -1,
                           "header must be \"<width> <height>\"");
  }
  stream.width = static_cast<int>(fields[0]);
  stream.height = static_cast<int>(fields[1]);

  int64_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!parse_fields<int64_t>(line, fields, 4) || fields[0] < INT32_MIN ||
        fields[0] > INT32_MAX || fields[1] < INT32_MIN || fields[1] > INT32_MAX) {
      throw EventFormatError(EventErrorKind::kMalformedRecord, index,
                             record_msg(index, "expected \"<x> <y> <t> <p>\""));
    }
    if (fields[3] != 1 && fields[3] != -1) {
      throw EventFormatError(EventErrorKind::kBadPolarity, index,
                             record_msg(index, "polarity must be 1 or -1"));
    }
    stream.events.push_back({static_cast<int32_t>(fields[0]),
                             static_cast<int32_t>(fields[1]), fields[2],
                             static_cast<int8_t>(fields[3])});
    ++index;
  }
  validate_stream(stream);
  return stream;
}

std::string format_events(const EventStream& stream) {
  std::string out;
  out.reserve(16 + stream.events.size() * 20);
  out += std::to_string(stream.width) + ' ' + std::to_string(stream.height) + '\n';
  for (const Event& e : stream.events) {
    out += std::to_string(e.x);
    out += ' ';
    out += std::to_string(e.y);
    out += ' ';
    out += std::to_string(e.t);
    out += ' ';
    out += std::to_string(static_cast<int>(e.p));
    out += '\n';
  }
  return out;
}

EventStream read_events(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw EventFormatError(EventErrorKind::kIo, -1, "cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_events(buf.str());
}

void write_events(const EventStream& stream, const std::filesystem::path& path) {
  validate_stream(stream);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw EventFormatError(EventErrorKind::kIo, -1, "cannot write " + path.string());
  }
  const std::string text = format_events(stream);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw EventFormatError(EventErrorKind::kIo, -1, "write failed: " + path.string());
  }
}

EventStream generate_events(const FrameSequence& seq, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("threshold must be positive");
  if (seq.frames.size() < 2) throw std::invalid_argument("need at least two frames");
  if (seq.timestamps.size() != seq.frames.size()) {
    throw std::invalid_argument("frame/timestamp count mismatch");
  }
  const size_t n_pixels = static_cast<size_t>(seq.width) * seq.height;
  for (size_t f = 0; f < seq.frames.size(); ++f) {
    if (seq.frames[f].size() != n_pixels) {
      throw std::invalid_argument("frame " + std::to_string(f) + " has wrong size");
    }
    if (f > 0 && seq.timestamps[f] <= seq.timestamps[f - 1]) {
      throw std::invalid_argument("frame timestamps must be strictly increasing");
    }
    for (double v : seq.frames[f]) {
      if (!(v > 0.0)) {
        throw std::invalid_argument("frame " + std::to_string(f) +
                                    " has non-positive intensity");
      }
    }
  }
  if (seq.timestamps.front() < 0) throw std::invalid_argument("negative timestamp");

  EventStream stream{seq.width, seq.height, {}};
  std::vector<double> reference(n_pixels);
  for (size_t i = 0; i < n_pixels; ++i) reference[i] = std::log(seq.frames[0][i]);

  // Crossings within 1e-9 relative of C still fire, so an exact multiple of C
  // survives the rounding of log().
  const double fire_at = threshold * (1.0 - 1e-9);
  for (size_t f = 1; f < seq.frames.size(); ++f) {
    const int64_t t = seq.timestamps[f];
    for (int y = 0; y < seq.height; ++y) {
      for (int x = 0; x < seq.width; ++x) {
        const size_t i = static_cast<size_t>(y) * seq.width + x;
        const double level = std::log(seq.frames[f][i]);
        double diff = level - reference[i];
        while (std::abs(diff) >= fire_at) {
          const int8_t p = diff > 0 ? 1 : -1;
          stream.events.push_back({x, y, t, p});
          reference[i] += p * threshold;
          diff = level - reference[i];
        }
      }
    }
  }
  // Row-major emission already gives (t, y, x) order and a pixel fires one
  // polarity per frame, so (y, x, p) tie order holds without sorting.
  return stream;
}

FrameSequence synthetic_frames(const std::string& name, int width, int height,
                               int num_frames, int64_t frame_interval_us) {
  if (width <= 0 || height <= 0 || num_frames < 2 || frame_interval_us <= 0) {
    throw std::invalid_argument("invalid synthetic frame parameters");
  }
  FrameSequence seq;
  seq.width = width;
  seq.height = height;
  const size_t n = static_cast<size_t>(width) * height;

  auto smoothstep = [](double e0, double e1, double v) {
    const double t = std::clamp((v - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
  };

  for (int f = 0; f < num_frames; ++f) {
    std::vector<double> frame(n);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double log_i = 0.0;
        if (name == "ramp") {
          log_i = 0.05 * f * (0.5 + static_cast<double>(x) / width);
        } else if (name == "contour") {
          const double radius = 0.25 * std::min(width, height);
          const double travel = width + 2.0 * radius;
          const double cx = -radius + travel * f / std::max(1, num_frames - 1);
          const double cy = 0.5 * height;
          const double d = std::hypot(x - cx, y - cy);
          log_i = 1.5 * (1.0 - smoothstep(radius - 1.0, radius + 1.0, d));
        } else if (name == "bar") {
          const double half = std::max(1.0, 0.05 * width);
          const double cx = -half + (width + 2.0 * half) * f / std::max(1, num_frames - 1);
          const double d = std::abs(x - cx);
          log_i = 1.5 * (1.0 - smoothstep(half - 1.0, half + 1.0, d));
        } else {
          throw std::invalid_argument("unknown synthetic scene: " + name);
        }
        frame[static_cast<size_t>(y) * width + x] = std::exp(log_i);
      }
    }
    seq.frames.push_back(std::move(frame));
    seq.timestamps.push_back(static_cast<int64_t>(f) * frame_interval_us);
  }
  return seq;
}

namespace {

std::vector<double> read_pgm(const std::filesystem::path& path, int& width,
                             int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok += c;
    }
    return tok;
  };
  const std::string magic = next_token();
  if (magic != "P2" && magic != "P5") {
    throw std::runtime_error(path.string() + ": not a PGM file");
  }
  width = std::stoi(next_token());
  height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw std::runtime_error(path.string() + ": bad PGM header");
  }
  std::vector<double> pixels(static_cast<size_t>(width) * height);
  for (double& v : pixels) {
    int raw = 0;
    if (magic == "P2") {
      raw = std::stoi(next_token());
    } else if (maxval < 256) {
      raw = in.get();
    } else {
      const int hi = in.get();
      raw = (hi << 8) | in.get();
    }
    if (!in) throw std::runtime_error(path.string() + ": truncated PGM");
    v = static_cast<double>(raw) + 1.0;
  }
  return pixels;
}

}  // namespace

FrameSequence read_frame_directory(const std::filesystem::path& dir) {
  std::map<int64_t, std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".pgm") continue;
    const std::string stem = entry.path().stem().string();
    int64_t t = 0;
    auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), t);
    if (ec != std::errc{} || ptr != stem.data() + stem.size()) {
      throw std::runtime_error("frame name is not a timestamp: " + entry.path().string());
    }
    files.emplace(t, entry.path());
  }
  FrameSequence seq;
  for (const auto& [t, path] : files) {
    int w = 0, h = 0;
    auto frame = read_pgm(path, w, h);
    if (seq.frames.empty()) {
      seq.width = w;
      seq.height = h;
    } else if (w != seq.width || h != seq.height) {
      throw std::runtime_error("frame resolution mismatch: " + path.string());
    }
    seq.frames.push_back(std::move(frame));
    seq.timestamps.push_back(t);
  }
  return seq;
}

}  // namespace evsparse
