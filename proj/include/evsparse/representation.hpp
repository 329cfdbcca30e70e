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
#include <deque>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "evsparse/events.hpp"
#include "evsparse/site.hpp"

namespace evsparse {

enum class RepresentationKind { kHistogram, kQueue };

inline constexpr int kQueueDepth = 15;
inline constexpr int kDefaultWindow = 25000;

int representation_channels(RepresentationKind kind);
RepresentationKind parse_representation_kind(const std::string& name);
std::string to_string(RepresentationKind kind);

/// Dense event image, row-major (y, x, c).
///
/// Histogram: channel 0 counts positive events, channel 1 negative ones.
/// Queue: channels [0, 15) hold timestamps, [15, 30) polarities, newest event
/// first. A timestamp is encoded as the age relative to the pixel's newest
/// event divided by the age span of the events held in that pixel's queue
/// (0 when the span is 0). Unused slots are 0.
struct Representation {
  RepresentationKind kind = RepresentationKind::kHistogram;
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;

  Representation() = default;
  Representation(RepresentationKind k, int w, int h);

  Resolution resolution() const { return {width, height}; }
  size_t offset(int x, int y) const {
    return (static_cast<size_t>(y) * width + x) * channels;
  }
  float at(int x, int y, int c) const { return values[offset(x, y) + c]; }
  std::span<const float> pixel(Site s) const {
    return {values.data() + offset(s.x, s.y), static_cast<size_t>(channels)};
  }
  std::span<float> pixel(Site s) {
    return {values.data() + offset(s.x, s.y), static_cast<size_t>(channels)};
  }
  bool is_active(Site s) const;

  friend bool operator==(const Representation&, const Representation&) = default;
};

Representation build_representation(RepresentationKind kind,
                                    std::span<const Event> events, int width,
                                    int height);

/// Encodes one pixel's queue from its window events (oldest first).
void encode_queue_pixel(std::span<const std::pair<int64_t, int8_t>> history,
                        std::span<float> out);

struct SiteUpdate {
  Site site;
  std::vector<float> delta;  // after - before, per channel
  std::vector<float> after;  // value after the update
};

/// Net change of a representation: the per-event increments and the sites
/// whose feature vector switched between zero and non-zero.
struct SparseUpdate {
  std::vector<SiteUpdate> sites;
  std::vector<Site> newly_active;
  std::vector<Site> newly_inactive;

  bool empty() const { return sites.empty(); }
};

/// Representation over the most recent `window_size` events, updated in place.
class SlidingWindow {
 public:
  SlidingWindow(RepresentationKind kind, int width, int height,
                int window_size = kDefaultWindow);

  SparseUpdate push_event(const Event& e);
  SparseUpdate push_batch(std::span<const Event> events);

  const Representation& representation() const { return rep_; }
  const std::deque<Event>& buffer() const { return buffer_; }
  int window_size() const { return window_size_; }

 private:
  class Tracker;

  void check_event(const Event& e) const;
  void apply_add(const Event& e, Tracker& tracker);
  void apply_remove(const Event& e, Tracker& tracker);
  void touch_queue_pixel(Site s);

  Representation rep_;
  int window_size_;
  std::deque<Event> buffer_;
  // Queue kind only: window events per pixel, oldest first.
  std::unordered_map<uint64_t, std::deque<std::pair<int64_t, int8_t>>> history_;
};

/// Flat little-endian snapshot: u32 height, u32 width, u32 channels, then
/// float32 values in (y, x, c) order.
std::vector<uint8_t> encode_snapshot(int height, int width, int channels,
                                     std::span<const float> values);
void write_snapshot(const Representation& rep, const std::filesystem::path& path);

struct Snapshot {
  uint32_t height = 0;
  uint32_t width = 0;
  uint32_t channels = 0;
  std::vector<float> values;
};
Snapshot read_snapshot(const std::filesystem::path& path);

}  // namespace evsparse
