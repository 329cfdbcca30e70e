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
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace evsparse {

struct Event {
  int32_t x = 0;
  int32_t y = 0;
  int64_t t = 0;  // microseconds
  int8_t p = 1;   // -1 or +1

  friend bool operator==(const Event&, const Event&) = default;
};

struct EventStream {
  int width = 0;
  int height = 0;
  std::vector<Event> events;

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

/// Brightness frames for the ideal-sensor event generator. Intensities are
/// stored row-major per frame and must be strictly positive.
struct FrameSequence {
  int width = 0;
  int height = 0;
  std::vector<std::vector<double>> frames;
  std::vector<int64_t> timestamps;
};

enum class EventErrorKind {
  kMalformedHeader,
  kMalformedRecord,
  kOutOfBounds,
  kBadPolarity,
  kTimestampRegression,
  kIo,
};

/// Parse or validation failure. `record()` is the zero-based event index, or
/// -1 when the error concerns the header or the file as a whole.
class EventFormatError : public std::runtime_error {
 public:
  EventFormatError(EventErrorKind kind, int64_t record, const std::string& what)
      : std::runtime_error(what), kind_(kind), record_(record) {}

  EventErrorKind kind() const { return kind_; }
  int64_t record() const { return record_; }

 private:
  EventErrorKind kind_;
  int64_t record_;
};

/// Throws EventFormatError on the first violated stream invariant.
void validate_stream(const EventStream& stream);

EventStream parse_events(const std::string& text);
std::string format_events(const EventStream& stream);

EventStream read_events(const std::filesystem::path& path);
void write_events(const EventStream& stream, const std::filesystem::path& path);

/// Ideal event-camera model: per pixel a reference log intensity is kept and
/// one event of polarity sign(d) is emitted for every full threshold crossing,
/// stamped with the frame time. Ties at one timestamp are ordered (y, x, p).
EventStream generate_events(const FrameSequence& seq, double threshold);

/// Built-in synthetic scenes for fixtures and the CLI.
///   "ramp":    global brightening whose log rate grows linearly with x
///   "contour": bright disc moving across a dark background; events fire on
///              its outline
///   "bar":     vertical bright bar sweeping left to right
FrameSequence synthetic_frames(const std::string& name, int width, int height,
                               int num_frames, int64_t frame_interval_us = 1000);

/// Loads a directory of PGM images named <timestamp_us>.pgm. Pixel value v
/// maps to intensity v + 1 so black pixels stay valid in log space.
FrameSequence read_frame_directory(const std::filesystem::path& dir);

}  // namespace evsparse
