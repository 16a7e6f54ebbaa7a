// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdet/inference.hpp"
#include "tdet/model.hpp"

namespace tdet {

struct BenchConfig {
  int buffer_length = 768;
  int buffers_per_rep = 4;
  int repetitions = 10;
  int warmup = 2;  // untimed
  std::uint64_t seed = 0;
  DetectConfig detect;
};

struct BenchResult {
  std::vector<double> fps;  // one per timed repetition
  double median_fps = 0.0;
  double mad_fps = 0.0;     // median absolute deviation
  double relative_mad() const { return median_fps > 0.0 ? mad_fps / median_fps : 0.0; }
  std::string hardware;
};

double median(std::vector<double> values);

/// Times detect() over random buffers; fps = frames / wall time of the
/// detect calls, per repetition.
BenchResult speed_benchmark(const Network<float>& model, const BenchConfig& config);

/// CPU model name and logical core count, best effort.
std::string hardware_descriptor();

}  // namespace tdet
