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

#include "detbench/pipeline.hpp"

#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <thread>

#include "json.hpp"

#include "detbench/logging.hpp"

namespace detbench {
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now().time_since_epoch())
      .count();
}

}  // namespace

StageTimings parse_timing_line(std::string_view text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.remove_suffix(1);
  if (text.find('\n') != std::string_view::npos) {
    throw ParseError("timing file must contain a single line");
  }
  double v[3];
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), v[i]);
    if (ec != std::errc() || !std::isfinite(v[i]) || v[i] < 0.0) {
      throw ParseError("timing field " + std::to_string(i + 1) + " is not a non-negative number");
    }
    pos = static_cast<std::size_t>(ptr - text.data());
  }
  while (pos < text.size() && text[pos] == ' ') ++pos;
  if (pos != text.size()) throw ParseError("timing line has trailing content");
  return {v[0], v[1], v[2]};
}

std::string write_timing_line(const StageTimings& t) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.3f %.3f %.3f\n", t.preprocess_ms, t.inference_ms,
                t.postprocess_ms);
  return buf;
}

StubBackend::StubBackend(std::map<std::uint64_t, Script> script, std::chrono::microseconds delay)
    : script_(std::move(script)), delay_(delay) {}

StubBackend StubBackend::with_fixed_timings(const StageTimings& timings,
                                            std::chrono::microseconds delay) {
  StubBackend stub({}, delay);
  stub.fallback_ = Script{{}, timings};
  return stub;
}

BackendOutput StubBackend::detect(const Image&, std::uint64_t frame_id) {
  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
  if (std::find(fail_ids_.begin(), fail_ids_.end(), frame_id) != fail_ids_.end()) {
    throw BackendError("scripted failure on frame " + std::to_string(frame_id));
  }
  if (auto it = script_.find(frame_id); it != script_.end()) {
    return {it->second.detections, it->second.timings};
  }
  if (fallback_) return {fallback_->detections, fallback_->timings};
  return {};
}

ExternalBackend::ExternalBackend(std::string command_template, std::chrono::milliseconds timeout,
                                 int input_size)
    : template_(std::move(command_template)), timeout_(timeout), input_size_(input_size) {
  if (template_.empty()) throw ParameterError("external backend command is empty");
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

void replace_all(std::string& s, const std::string& key, const std::string& value) {
  for (std::size_t pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos)) {
    s.replace(pos, key.size(), value);
    pos += value.size();
  }
}

class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "detbench-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) throw BackendError("cannot create temp directory");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Runs `sh -c command` in its own process group. Returns the exit status, or
// nullopt on timeout (after killing the group).
std::optional<int> run_shell(const std::string& command, std::chrono::milliseconds timeout) {
  const pid_t pid = ::fork();
  if (pid < 0) throw BackendError("fork failed");
  if (pid == 0) {
    ::setpgid(0, 0);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  const auto deadline = Clock::now() + timeout;
  int status = 0;
  auto backoff = std::chrono::microseconds(200);
  while (true) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) throw BackendError("waitpid failed");
    if (Clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      return std::nullopt;
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::min(backoff * 2, std::chrono::microseconds(20000));
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

}  // namespace

BackendOutput ExternalBackend::detect(const Image& image, std::uint64_t frame_id) {
  TempDir tmp;
  const std::string image_path = (tmp.path() / "frame.png").string();
  const std::string det_path = (tmp.path() / "det.txt").string();
  const std::string timing_path = (tmp.path() / "timing.txt").string();
  save_png(image_path, image);
  std::string command = template_;
  replace_all(command, "{image}", shell_quote(image_path));
  replace_all(command, "{det}", shell_quote(det_path));
  replace_all(command, "{timing}", shell_quote(timing_path));
  replace_all(command, "{frame}", std::to_string(frame_id));

  const auto status = run_shell(command, timeout_);
  const std::string frame = "frame " + std::to_string(frame_id);
  if (!status) throw BackendError(frame + ": command timed out");
  if (*status != 0) {
    throw BackendError(frame + ": command exited with status " + std::to_string(*status));
  }
  BackendOutput out;
  try {
    out.detections = parse_detection_file(read_text_file(det_path));
    out.timings = parse_timing_line(read_text_file(timing_path));
  } catch (const Error& e) {
    throw BackendError(frame + ": " + e.what());
  }
  return out;
}

FunctionBackend::FunctionBackend(Preprocess pre, Infer infer, Postprocess post, int input_size)
    : pre_(std::move(pre)), infer_(std::move(infer)), post_(std::move(post)),
      input_size_(input_size) {}

BackendOutput FunctionBackend::detect(const Image& image, std::uint64_t) {
  BackendOutput out;
  try {
    auto t0 = Clock::now();
    const Image input = pre_(image);
    out.timings.preprocess_ms = elapsed_ms(t0);
    t0 = Clock::now();
    auto raw = infer_(input);
    out.timings.inference_ms = elapsed_ms(t0);
    t0 = Clock::now();
    out.detections = post_(std::move(raw));
    out.timings.postprocess_ms = elapsed_ms(t0);
  } catch (const BackendError&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError(e.what());
  }
  return out;
}

DirectorySource::DirectorySource(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("source directory not found: " + dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") {
      paths_.push_back(e.path().string());
    }
  }
  std::sort(paths_.begin(), paths_.end());
}

std::optional<Frame> DirectorySource::next() {
  if (pos_ >= paths_.size()) return std::nullopt;
  auto image = std::make_shared<const Image>(load_png(paths_[pos_++]).rgb);
  return Frame{next_id_++, now_ns(), std::move(image)};
}

SyntheticSource::SyntheticSource(std::size_t count, int width, int height,
                                 std::chrono::microseconds period)
    : count_(count), width_(width), height_(height), period_(period),
      next_due_(Clock::now()) {}

std::optional<Frame> SyntheticSource::next() {
  if (emitted_ >= count_) return std::nullopt;
  if (period_.count() > 0) {
    std::this_thread::sleep_until(next_due_);
    next_due_ += period_;
  }
  Image img(width_, height_);
  const auto shade = static_cast<std::uint8_t>(emitted_ * 37 % 256);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      img.at(x, y, 0) = shade;
      img.at(x, y, 1) = static_cast<std::uint8_t>(x * 255 / std::max(1, width_ - 1));
      img.at(x, y, 2) = static_cast<std::uint8_t>(y * 255 / std::max(1, height_ - 1));
    }
  }
  const auto id = static_cast<std::uint64_t>(emitted_++);
  return Frame{id, now_ns(), std::make_shared<const Image>(std::move(img))};
}

namespace {

// Holds frames between the camera and the debug sink so detections can be
// re-paired with their images by sequence id.
class FrameSynchronizer {
 public:
  void add(const Frame& f) {
    std::lock_guard<std::mutex> lock(mutex_);
    frames_.emplace(f.sequence_id, f);
  }
  void forget(std::uint64_t id) {
    std::lock_guard<std::mutex> lock(mutex_);
    frames_.erase(id);
  }
  /// Removes and returns the frame with `id`; drops older frames.
  std::optional<Frame> take(std::uint64_t id) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = frames_.find(id);
    if (it == frames_.end()) return std::nullopt;
    Frame f = std::move(it->second);
    frames_.erase(frames_.begin(), std::next(it));
    return f;
  }

 private:
  std::mutex mutex_;
  std::map<std::uint64_t, Frame> frames_;
};

}  // namespace

RunSummary run_pipeline(FrameSource& source, DetectorBackend& backend, const FrameSink& sink,
                        const PipelineOptions& options) {
  RunSummary summary;
  if (!options.threaded) {
    while (auto frame = source.next()) {
      ++summary.frames_in;
      try {
        auto out = backend.detect(*frame->image, frame->sequence_id);
        ++summary.processed;
        sink(*frame, DetectionMessage{frame->sequence_id, std::move(out.detections), out.timings});
        ++summary.delivered;
      } catch (const BackendError& e) {
        log_warning(e.what());
        ++summary.failed;
        summary.failed_ids.push_back(frame->sequence_id);
      }
    }
    return summary;
  }

  LatestWinsQueue<Frame> to_detector(options.queue_capacity);
  LatestWinsQueue<DetectionMessage> to_sink(options.queue_capacity);
  FrameSynchronizer sync;
  std::mutex failed_mutex;
  std::atomic<std::size_t> frames_in{0}, processed{0}, dropped{0}, failed{0}, delivered{0},
      sink_dropped{0};
  std::exception_ptr stage_error;
  std::mutex error_mutex;
  auto record_error = [&] {
    std::lock_guard<std::mutex> lock(error_mutex);
    if (!stage_error) stage_error = std::current_exception();
  };

  std::thread camera([&] {
    try {
      while (auto frame = source.next()) {
        ++frames_in;
        sync.add(*frame);
        if (auto evicted = to_detector.push(std::move(*frame))) {
          ++dropped;
          sync.forget(evicted->sequence_id);
        }
      }
    } catch (...) {
      record_error();
    }
    to_detector.close();
  });

  std::thread detector([&] {
    while (auto frame = to_detector.pop()) {
      try {
        auto out = backend.detect(*frame->image, frame->sequence_id);
        ++processed;
        if (auto evicted = to_sink.push(DetectionMessage{frame->sequence_id,
                                                         std::move(out.detections), out.timings})) {
          ++sink_dropped;
          sync.forget(evicted->frame_id);
        }
      } catch (const BackendError& e) {
        log_warning(e.what());
        ++failed;
        sync.forget(frame->sequence_id);
        std::lock_guard<std::mutex> lock(failed_mutex);
        summary.failed_ids.push_back(frame->sequence_id);
      } catch (...) {
        record_error();
        sync.forget(frame->sequence_id);
        ++failed;
      }
    }
    to_sink.close();
  });

  std::thread debug([&] {
    while (auto msg = to_sink.pop()) {
      if (auto frame = sync.take(msg->frame_id)) {
        try {
          sink(*frame, *msg);
          ++delivered;
        } catch (...) {
          record_error();
        }
      }
    }
  });

  camera.join();
  detector.join();
  debug.join();
  if (stage_error) std::rethrow_exception(stage_error);
  summary.frames_in = frames_in;
  summary.processed = processed;
  summary.dropped = dropped;
  summary.failed = failed;
  summary.delivered = delivered;
  summary.sink_dropped = sink_dropped;
  return summary;
}

StageStats stage_stats(std::span<const double> samples) {
  StageStats s;
  if (samples.empty()) return s;
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  s.min = v.front();
  s.max = v.back();
  const std::size_t mid = v.size() / 2;
  s.median = v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
  return s;
}

double LatencyReport::possible_fps() const {
  const double t = mean_total_ms();
  return t > 0.0 ? 1000.0 / t : std::numeric_limits<double>::infinity();
}

LatencyReport bench(DetectorBackend& backend, std::span<const Image> images, std::size_t warmup,
                    std::size_t iterations) {
  if (iterations < 1) throw ParameterError("bench needs at least one iteration");
  if (images.empty()) throw ParameterError("bench needs at least one image");
  LatencyReport report;
  report.backend = backend.name();
  report.warmup = warmup;
  std::uint64_t id = 0;
  for (std::size_t i = 0; i < warmup; ++i, ++id) {
    try {
      (void)backend.detect(images[i % images.size()], id);
    } catch (const BackendError& e) {
      log_warning(std::string("warmup: ") + e.what());
    }
  }
  std::vector<double> pre, inf, post, total;
  for (std::size_t i = 0; i < iterations; ++i, ++id) {
    try {
      const auto out = backend.detect(images[i % images.size()], id);
      pre.push_back(out.timings.preprocess_ms);
      inf.push_back(out.timings.inference_ms);
      post.push_back(out.timings.postprocess_ms);
      total.push_back(out.timings.total_ms());
    } catch (const BackendError& e) {
      log_warning(e.what());
      ++report.failed;
    }
  }
  if (total.empty()) throw Error("bench: all " + std::to_string(iterations) + " iterations failed");
  report.frames = total.size();
  report.preprocess = stage_stats(pre);
  report.inference = stage_stats(inf);
  report.postprocess = stage_stats(post);
  report.total = stage_stats(total);
  if (!std::isfinite(report.possible_fps())) {
    log_warning("mean total latency is zero; possible FPS is unbounded");
  }
  return report;
}

double round_half_even(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::nearbyint(value * scale) / scale;
}

namespace {

nlohmann::json stats_json(const StageStats& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"min", s.min}, {"max", s.max}};
}

}  // namespace

std::string latency_report_to_json(const LatencyReport& r) {
  nlohmann::json doc = {{"backend", r.backend},
                        {"frames", r.frames},
                        {"warmup", r.warmup},
                        {"failed", r.failed},
                        {"preprocess_ms", stats_json(r.preprocess)},
                        {"inference_ms", stats_json(r.inference)},
                        {"postprocess_ms", stats_json(r.postprocess)},
                        {"total_ms", stats_json(r.total)}};
  const double fps = r.possible_fps();
  if (std::isfinite(fps)) {
    doc["possible_fps"] = round_half_even(fps, 3);
    doc["fps_unbounded"] = false;
  } else {
    doc["possible_fps"] = nullptr;
    doc["fps_unbounded"] = true;
  }
  return doc.dump(2) + "\n";
}

std::string run_summary_to_json(const RunSummary& s) {
  const nlohmann::json doc = {{"frames_in", s.frames_in},   {"processed", s.processed},
                              {"dropped", s.dropped},       {"failed", s.failed},
                              {"delivered", s.delivered},   {"sink_dropped", s.sink_dropped},
                              {"failed_ids", s.failed_ids}};
  return doc.dump(2) + "\n";
}

}  // namespace detbench
