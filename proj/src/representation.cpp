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
#include "evsparse/representation.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace evsparse {

int representation_channels(RepresentationKind kind) {
  return kind == RepresentationKind::kHistogram ? 2 : 2 * kQueueDepth;
}

RepresentationKind parse_representation_kind(const std::string& name) {
  if (name == "histogram") return RepresentationKind::kHistogram;
  if (name == "queue") return RepresentationKind::kQueue;
  throw std::invalid_argument("unknown representation: " + name);
}

std::string to_string(RepresentationKind kind) {
  return kind == RepresentationKind::kHistogram ? "histogram" : "queue";
}

Representation::Representation(RepresentationKind k, int w, int h)
    : kind(k), width(w), height(h), channels(representation_channels(k)) {
  if (w <= 0 || h <= 0) throw std::invalid_argument("representation size must be positive");
  values.assign(static_cast<size_t>(w) * h * channels, 0.0f);
}

bool Representation::is_active(Site s) const {
  for (float v : pixel(s)) {
    if (v != 0.0f) return true;
  }
  return false;
}

void encode_queue_pixel(std::span<const std::pair<int64_t, int8_t>> history,
                        std::span<float> out) {
  std::fill(out.begin(), out.end(), 0.0f);
  const size_t n = history.size();
  if (n == 0) return;
  const size_t kept = std::min<size_t>(n, kQueueDepth);
  const int64_t newest = history[n - 1].first;
  const int64_t oldest = history[n - kept].first;
  const double span = static_cast<double>(newest - oldest);
  for (size_t j = 0; j < kept; ++j) {
    const auto& [t, p] = history[n - 1 - j];
    out[j] = span > 0.0 ? static_cast<float>(static_cast<double>(newest - t) / span)
                        : 0.0f;
    out[kQueueDepth + j] = static_cast<float>(p);
  }
}

Representation build_representation(RepresentationKind kind,
                                    std::span<const Event> events, int width,
                                    int height) {
  Representation rep(kind, width, height);
  for (const Event& e : events) {
    if (e.x < 0 || e.y < 0 || e.x >= width || e.y >= height) {
      throw std::invalid_argument("event out of bounds");
    }
  }
  if (kind == RepresentationKind::kHistogram) {
    for (const Event& e : events) {
      rep.values[rep.offset(e.x, e.y) + (e.p > 0 ? 0 : 1)] += 1.0f;
    }
    return rep;
  }
  std::unordered_map<uint64_t, std::vector<std::pair<int64_t, int8_t>>> per_pixel;
  for (const Event& e : events) {
    per_pixel[site_key({e.x, e.y})].emplace_back(e.t, e.p);
  }
  for (const auto& [key, history] : per_pixel) {
    encode_queue_pixel(history, rep.pixel(site_from_key(key)));
  }
  return rep;
}

// First-touch snapshots of pixels modified during one push.
class SlidingWindow::Tracker {
 public:
  explicit Tracker(const Representation& rep) : rep_(rep) {}

  void touch(Site s) {
    if (seen_.insert(site_key(s)).second) {
      auto px = rep_.pixel(s);
      order_.push_back({s, std::vector<float>(px.begin(), px.end())});
    }
  }

  SparseUpdate finish() const {
    SparseUpdate update;
    for (const auto& [site, before] : order_) {
      auto after = rep_.pixel(site);
      bool changed = false;
      bool was_active = false;
      bool is_active = false;
      for (size_t c = 0; c < before.size(); ++c) {
        changed |= before[c] != after[c];
        was_active |= before[c] != 0.0f;
        is_active |= after[c] != 0.0f;
      }
      if (!changed) continue;
      SiteUpdate su{site, std::vector<float>(before.size()),
                    std::vector<float>(after.begin(), after.end())};
      for (size_t c = 0; c < before.size(); ++c) su.delta[c] = after[c] - before[c];
      update.sites.push_back(std::move(su));
      if (!was_active && is_active) update.newly_active.push_back(site);
      if (was_active && !is_active) update.newly_inactive.push_back(site);
    }
    return update;
  }

 private:
  const Representation& rep_;
  std::unordered_set<uint64_t> seen_;
  std::vector<std::pair<Site, std::vector<float>>> order_;
};

SlidingWindow::SlidingWindow(RepresentationKind kind, int width, int height,
                             int window_size)
    : rep_(kind, width, height), window_size_(window_size) {
  if (window_size <= 0) throw std::invalid_argument("window size must be positive");
}

void SlidingWindow::check_event(const Event& e) const {
  if (e.x < 0 || e.y < 0 || e.x >= rep_.width || e.y >= rep_.height) {
    throw std::invalid_argument("event out of bounds");
  }
  if (e.p != 1 && e.p != -1) throw std::invalid_argument("polarity must be 1 or -1");
  if (!buffer_.empty() && e.t < buffer_.back().t) {
    throw std::invalid_argument("timestamp regression: " + std::to_string(e.t) + " < " +
                                std::to_string(buffer_.back().t));
  }
}

void SlidingWindow::touch_queue_pixel(Site s) {
  auto it = history_.find(site_key(s));
  if (it == history_.end() || it->second.empty()) {
    std::fill(rep_.pixel(s).begin(), rep_.pixel(s).end(), 0.0f);
    if (it != history_.end()) history_.erase(it);
    return;
  }
  // Only the newest kQueueDepth entries are encoded.
  const auto& dq = it->second;
  const size_t kept = std::min<size_t>(dq.size(), kQueueDepth);
  std::vector<std::pair<int64_t, int8_t>> tail(dq.end() - static_cast<long>(kept), dq.end());
  encode_queue_pixel(tail, rep_.pixel(s));
}

void SlidingWindow::apply_add(const Event& e, Tracker& tracker) {
  const Site s{e.x, e.y};
  tracker.touch(s);
  if (rep_.kind == RepresentationKind::kHistogram) {
    rep_.values[rep_.offset(e.x, e.y) + (e.p > 0 ? 0 : 1)] += 1.0f;
  } else {
    history_[site_key(s)].emplace_back(e.t, e.p);
    touch_queue_pixel(s);
  }
}

void SlidingWindow::apply_remove(const Event& e, Tracker& tracker) {
  const Site s{e.x, e.y};
  tracker.touch(s);
  if (rep_.kind == RepresentationKind::kHistogram) {
    rep_.values[rep_.offset(e.x, e.y) + (e.p > 0 ? 0 : 1)] -= 1.0f;
  } else {
    auto& dq = history_.at(site_key(s));
    dq.pop_front();
    touch_queue_pixel(s);
  }
}

SparseUpdate SlidingWindow::push_event(const Event& e) {
  return push_batch(std::span<const Event>(&e, 1));
}

SparseUpdate SlidingWindow::push_batch(std::span<const Event> events) {
  // Validate the whole batch first so a bad event leaves the state untouched.
  int64_t last_t = buffer_.empty() ? INT64_MIN : buffer_.back().t;
  for (const Event& e : events) {
    check_event(e);
    if (e.t < last_t) throw std::invalid_argument("timestamp regression inside batch");
    last_t = e.t;
  }
  Tracker tracker(rep_);
  for (const Event& e : events) {
    buffer_.push_back(e);
    apply_add(e, tracker);
    if (static_cast<int>(buffer_.size()) > window_size_) {
      const Event old = buffer_.front();
      buffer_.pop_front();
      apply_remove(old, tracker);
    }
  }
  return tracker.finish();
}

std::vector<uint8_t> encode_snapshot(int height, int width, int channels,
                                     std::span<const float> values) {
  std::vector<uint8_t> out;
  out.reserve(12 + values.size() * 4);
  auto put_u32 = [&](uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
  };
  put_u32(static_cast<uint32_t>(height));
  put_u32(static_cast<uint32_t>(width));
  put_u32(static_cast<uint32_t>(channels));
  for (float f : values) put_u32(std::bit_cast<uint32_t>(f));
  return out;
}

void write_snapshot(const Representation& rep, const std::filesystem::path& path) {
  const auto bytes = encode_snapshot(rep.height, rep.width, rep.channels, rep.values);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  auto get_u32 = [&](size_t pos) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
    return v;
  };
  if (bytes.size() < 12) throw std::runtime_error("snapshot too short");
  Snapshot snap{get_u32(0), get_u32(4), get_u32(8), {}};
  const size_t count = static_cast<size_t>(snap.height) * snap.width * snap.channels;
  if (bytes.size() != 12 + count * 4) throw std::runtime_error("snapshot size mismatch");
  snap.values.resize(count);
  for (size_t i = 0; i < count; ++i) {
    snap.values[i] = std::bit_cast<float>(get_u32(12 + 4 * i));
  }
  return snap;
}

}  // namespace evsparse
