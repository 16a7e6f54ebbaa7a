// SPDX-License-Identifier: Apache-2.0
#include "tdet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "tdet/rng.hpp"

namespace tdet {

double median(std::vector<double> v) {
  TDET_CHECK(!v.empty(), ErrorCode::kInvalidArgument, "median of empty sequence");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string hardware_descriptor() {
  std::string model = "unknown cpu";
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(colon + 2);
      break;
    }
  }
  return model + ", " + std::to_string(std::thread::hardware_concurrency()) +
         " logical cores, single-threaded run";
}

BenchResult speed_benchmark(const Network<float>& model, const BenchConfig& config) {
  TDET_CHECK(config.repetitions > 0 && config.buffers_per_rep > 0 && config.warmup >= 0,
             ErrorCode::kInvalidArgument, "bench: repetitions and buffers must be positive");
  const auto& bb = model.config().backbone;
  Rng rng(config.seed);
  Tensor<float> buffer({std::size_t(bb.in_channels), std::size_t(config.buffer_length),
                        std::size_t(bb.height), std::size_t(bb.width)});
  for (auto& v : buffer.values()) v = static_cast<float>(rng.normal());

  std::size_t sink = 0;
  for (int i = 0; i < config.warmup; ++i) sink += detect(buffer, model, config.detect).detections.size();

  BenchResult result;
  for (int r = 0; r < config.repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int b = 0; b < config.buffers_per_rep; ++b)
      sink += detect(buffer, model, config.detect).detections.size();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.fps.push_back(double(config.buffer_length) * config.buffers_per_rep / secs);
  }
  (void)sink;
  result.median_fps = median(result.fps);
  std::vector<double> dev;
  for (double f : result.fps) dev.push_back(std::abs(f - result.median_fps));
  result.mad_fps = median(dev);
  result.hardware = hardware_descriptor();
  return result;
}

}  // namespace tdet
