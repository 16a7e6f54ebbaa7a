// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tdet/assignment.hpp"
#include "tdet/tensor.hpp"

namespace tdet {

struct Annotation {
  int class_id = 1;
  double start_s = 0.0;
  double end_s = 0.0;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct VideoRecord {
  std::string id;
  double fps = 25.0;
  long num_frames = 0;
  std::string features;  // relative to the annotation file's directory
  std::vector<Annotation> annotations;
  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;

  std::vector<LabeledSegment> segments_in_frames() const;
};

/// JSON Lines, one video object per line:
///   {"id":..., "fps":..., "num_frames":..., "features":..., "annotations":
///    [{"class":..., "start":..., "end":...}, ...]}
/// Validation errors name the offending line and field.
std::vector<VideoRecord> load_annotations(const std::filesystem::path& path,
                                          std::optional<int> num_classes = std::nullopt);
void write_annotations(const std::filesystem::path& path, const std::vector<VideoRecord>& videos);

// Feature-video file, integers little-endian:
//   "TDFV" | u32 version | u32 rank | rank x u64 dim | f32 values (C-order)
inline constexpr char kFeatureMagic[4] = {'T', 'D', 'F', 'V'};
inline constexpr std::uint32_t kFeatureVersion = 1;

void write_feature_video(const std::filesystem::path& path, const Tensor<float>& features);
Tensor<float> read_feature_video(const std::filesystem::path& path);

struct Video {
  VideoRecord record;
  Tensor<float> features;  // channels x num_frames x H x W
};

/// Loads annotations and every referenced feature file.
std::vector<Video> load_dataset(const std::filesystem::path& annotations,
                                std::optional<int> num_classes = std::nullopt);

struct SynthConfig {
  int num_classes = 5;
  int num_videos = 10;
  long min_frames = 768;
  long max_frames = 1536;
  int min_activities = 1;
  int max_activities = 4;
  double min_duration_s = 0.64;
  double max_duration_s = 5.12;
  double fps = 25.0;
  double snr = 3.0;  // pattern amplitude over noise standard deviation
  int channels = 8;
  int height = 2;
  int width = 2;
  bool allow_overlap = true;
  double min_gap_s = 0.0;  // minimum spacing between activities when overlap is disallowed
  std::uint64_t seed = 0;
  std::string id_prefix = "video";

  void validate() const;
};

/// Deterministic class signature: channel weights and a temporal envelope
/// (class-specific frequency and ramp). `t` is the frame offset into the
/// activity, `duration` its length in frames.
double pattern_weight(int class_id, int channel, int num_channels);
double pattern_envelope(int class_id, double t, double duration, double fps);
double pattern_value(int class_id, int channel, int num_channels, double t, double duration,
                     double fps);

/// Writes `<out_dir>/annotations.jsonl` and `<out_dir>/features/<id>.tdfv`.
/// Returns the generated records. Byte-identical for identical configs.
std::vector<VideoRecord> generate_synthetic(const SynthConfig& config,
                                            const std::filesystem::path& out_dir);

/// The same videos held in memory.
std::vector<Video> synthesize_videos(const SynthConfig& config);

}  // namespace tdet
