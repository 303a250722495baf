// Copyright 2026 The detbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Three-stage streaming inference harness: a frame source, a detector stage
// wrapping a pluggable backend, and a debug sink that pairs detections with
// their frames. Stages are joined by latest-wins bounded queues.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detbench/annotation.hpp"
#include "detbench/error.hpp"
#include "detbench/image.hpp"

namespace detbench {

struct StageTimings {
  double preprocess_ms = 0.0;
  double inference_ms = 0.0;
  double postprocess_ms = 0.0;

  double total_ms() const { return preprocess_ms + inference_ms + postprocess_ms; }
  bool operator==(const StageTimings&) const = default;
};

/// Parses the one-line `pre_ms inf_ms post_ms` timing format.
StageTimings parse_timing_line(std::string_view text);
std::string write_timing_line(const StageTimings& timings);

struct Frame {
  std::uint64_t sequence_id = 0;
  std::int64_t capture_ns = 0;  // steady clock
  std::shared_ptr<const Image> image;
};

struct DetectionMessage {
  std::uint64_t frame_id = 0;
  std::vector<Detection> detections;
  StageTimings timings;
};

struct BackendOutput {
  std::vector<Detection> detections;
  StageTimings timings;
};

/// Raised by a backend when a single frame cannot be processed.
class BackendError : public Error {
 public:
  using Error::Error;
};

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  /// Processes one frame. Throws BackendError on failure.
  virtual BackendOutput detect(const Image& image, std::uint64_t frame_id) = 0;
  virtual int input_size() const { return 320; }
  virtual std::string name() const = 0;
};

/// Test double returning scripted outputs keyed by frame id.
class StubBackend : public DetectorBackend {
 public:
  struct Script {
    std::vector<Detection> detections;
    StageTimings timings;
  };

  explicit StubBackend(std::map<std::uint64_t, Script> script = {},
                       std::chrono::microseconds delay = std::chrono::microseconds(0));

  /// Every frame returns `timings` and no detections.
  static StubBackend with_fixed_timings(const StageTimings& timings,
                                        std::chrono::microseconds delay = {});

  /// Frames in `ids` raise BackendError.
  void fail_on(std::vector<std::uint64_t> ids) { fail_ids_ = std::move(ids); }

  BackendOutput detect(const Image& image, std::uint64_t frame_id) override;
  std::string name() const override { return "stub"; }

 private:
  std::map<std::uint64_t, Script> script_;
  std::optional<Script> fallback_;
  std::chrono::microseconds delay_;
  std::vector<std::uint64_t> fail_ids_;
};

/// Runs a shell command per frame. The template may reference `{image}` (input
/// PNG path), `{det}` (detection file to write) and `{timing}` (timing file to
/// write); missing placeholders for det/timing mean the command writes
/// `det.txt` / `timing.txt` next to the image.
class ExternalBackend : public DetectorBackend {
 public:
  explicit ExternalBackend(std::string command_template,
                           std::chrono::milliseconds timeout = std::chrono::seconds(30),
                           int input_size = 320);

  BackendOutput detect(const Image& image, std::uint64_t frame_id) override;
  int input_size() const override { return input_size_; }
  std::string name() const override { return "external"; }

 private:
  std::string template_;
  std::chrono::milliseconds timeout_;
  int input_size_;
};

/// In-process backend from three callables, each timed on the steady clock.
class FunctionBackend : public DetectorBackend {
 public:
  using Preprocess = std::function<Image(const Image&)>;
  using Infer = std::function<std::vector<Detection>(const Image&)>;
  using Postprocess = std::function<std::vector<Detection>(std::vector<Detection>)>;

  FunctionBackend(Preprocess pre, Infer infer, Postprocess post, int input_size = 320);

  BackendOutput detect(const Image& image, std::uint64_t frame_id) override;
  int input_size() const override { return input_size_; }
  std::string name() const override { return "function"; }

 private:
  Preprocess pre_;
  Infer infer_;
  Postprocess post_;
  int input_size_;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// Next frame, or nullopt when exhausted.
  virtual std::optional<Frame> next() = 0;
};

/// Frames from the PNG files of a directory, in lexicographic order.
class DirectorySource : public FrameSource {
 public:
  explicit DirectorySource(const std::string& dir);
  std::optional<Frame> next() override;
  std::size_t size() const { return paths_.size(); }

 private:
  std::vector<std::string> paths_;
  std::size_t pos_ = 0;
  std::uint64_t next_id_ = 0;
};

/// Generated gradient frames, optionally paced at a fixed period.
class SyntheticSource : public FrameSource {
 public:
  SyntheticSource(std::size_t count, int width = 320, int height = 320,
                  std::chrono::microseconds period = std::chrono::microseconds(0));
  std::optional<Frame> next() override;

 private:
  std::size_t count_;
  int width_;
  int height_;
  std::chrono::microseconds period_;
  std::size_t emitted_ = 0;
  std::chrono::steady_clock::time_point next_due_;
};

/// Bounded FIFO where a push into a full queue evicts the oldest item.
template <typename T>
class LatestWinsQueue {
 public:
  explicit LatestWinsQueue(std::size_t capacity = 1) : capacity_(capacity ? capacity : 1) {}

  /// Returns the evicted item, if any.
  std::optional<T> push(T item) {
    std::optional<T> evicted;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (items_.size() >= capacity_) {
        evicted = std::move(items_.front());
        items_.pop_front();
      }
      items_.push_back(std::move(item));
    }
    cv_.notify_one();
    return evicted;
  }

  /// Blocks until an item is available; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    return item;
  }

  void close() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex mutex_;
  std::condition_variable cv_;
};

using FrameSink = std::function<void(const Frame&, const DetectionMessage&)>;

struct PipelineOptions {
  std::size_t queue_capacity = 1;
  bool threaded = true;  // false: synchronous driver, no drops
};

struct RunSummary {
  std::size_t frames_in = 0;
  std::size_t processed = 0;
  std::size_t dropped = 0;       // evicted before reaching the detector
  std::size_t failed = 0;        // backend errors
  std::size_t delivered = 0;     // pairs handed to the sink
  std::size_t sink_dropped = 0;  // processed but evicted before the sink
  std::vector<std::uint64_t> failed_ids;
};

RunSummary run_pipeline(FrameSource& source, DetectorBackend& backend, const FrameSink& sink,
                        const PipelineOptions& options = {});

struct StageStats {
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

StageStats stage_stats(std::span<const double> samples);

struct LatencyReport {
  std::string backend;
  StageStats preprocess;
  StageStats inference;
  StageStats postprocess;
  StageStats total;  // of per-frame totals
  std::size_t frames = 0;
  std::size_t warmup = 0;
  std::size_t failed = 0;

  double mean_total_ms() const { return total.mean; }
  /// 1000 / mean total; +infinity when the mean total is zero.
  double possible_fps() const;
};

/// Runs `warmup` unrecorded calls, then `iterations` recorded calls cycling
/// through `images`. Throws Error if every recorded call failed.
LatencyReport bench(DetectorBackend& backend, std::span<const Image> images, std::size_t warmup,
                    std::size_t iterations);

/// Rounds half-to-even at `decimals` places.
double round_half_even(double value, int decimals);

std::string latency_report_to_json(const LatencyReport& report);
std::string run_summary_to_json(const RunSummary& summary);

}  // namespace detbench
