// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tdet/geometry.hpp"
#include "tdet/model.hpp"

namespace tdet {

struct ScoredSegment {
  TemporalSegment segment;
  double score = 0.0;
};

struct ScoredDetection {
  TemporalSegment segment;
  int class_id = 1;
  double score = 0.0;
};

/// Greedy suppression: repeatedly keep the best remaining candidate and drop
/// every remaining candidate whose IoU with it exceeds `threshold`. Equal
/// scores keep the earlier index first. Returns kept indices, best first.
std::vector<std::size_t> nms(std::span<const ScoredSegment> candidates, double threshold);

enum class BufferMode { kOneWay, kTwoWay };
enum class Direction { kForward, kReverse };

struct BufferWindow {
  long offset = 0;   // first video frame of the window
  Direction direction = Direction::kForward;
  long padding = 0;  // trailing frames filled by replicating the last video frame
};

/// Forward windows tile the video from frame 0. In two-way mode a second
/// tiling aligned to the end of the video is appended (reverse direction).
struct BufferPlan {
  int buffer_length = 768;
  std::vector<BufferWindow> windows;
  long padding = 0;  // padding of the forward pass's tail window
};

BufferPlan build_buffers(long video_length, int buffer_length, BufferMode mode);

/// Copies window frames out of a C x V x H x W video, replicating the last
/// video frame into any padded tail.
Tensor<float> extract_buffer(const Tensor<float>& video, const BufferWindow& window,
                             int buffer_length);

struct DetectConfig {
  double proposal_nms = 0.7;
  double eval_iou = 0.5;
  double score_floor = 0.05;
  std::size_t max_proposals = 300;
  double min_proposal_length = 1.0;  // frames
  // Predicted log-length offsets are clamped to +-log(1000/16) before decoding.
  double max_log_length_delta = std::log(1000.0 / 16.0);

  double final_nms() const { return eval_iou - 0.1; }
  void validate() const;
};

struct DetectStats {
  std::size_t anchors = 0;
  std::size_t proposals = 0;
  std::size_t after_nms = 0;
  std::size_t detections = 0;
};

struct BufferDetections {
  std::vector<ScoredDetection> detections;  // buffer frame coordinates
  std::vector<ScoredSegment> proposals;     // surviving stage-1 proposals
  DetectStats stats;
};

/// Decodes every anchor's predicted offsets, clips to [0, buffer_length] and
/// scores with the softmax activity probability. Proposals shorter than
/// min_length after clipping are dropped.
template <typename T>
std::vector<ScoredSegment> decode_proposals(const ProposalOutput<T>& out, const AnchorGrid& anchors,
                                            double buffer_length, double min_length,
                                            double max_log_length_delta);

/// NMS followed by a top-k cut.
std::vector<ScoredSegment> select_proposals(std::span<const ScoredSegment> candidates,
                                            double nms_threshold, std::size_t max_proposals);

/// Two-stage detection on one buffer (in_channels x B x H x W).
template <typename T>
BufferDetections detect(const Tensor<T>& buffer, const Network<T>& model,
                        const DetectConfig& config);

/// One-way tiling of a whole video; detections are returned in video frame
/// coordinates, clipped to [0, num_frames], with detections that lie entirely
/// in padded frames removed.
std::vector<ScoredDetection> detect_video(const Tensor<float>& video, long num_frames,
                                          const Network<float>& model, const DetectConfig& config,
                                          int buffer_length,
                                          std::vector<ScoredSegment>* proposals = nullptr);

/// One line per detection: video id, class id, start (s), end (s), score.
struct DetectionRecord {
  std::string video_id;
  int class_id = 1;
  double start_s = 0.0;
  double end_s = 0.0;
  double score = 0.0;
};

void write_detections(const std::filesystem::path& path, std::span<const DetectionRecord> records);
std::vector<DetectionRecord> read_detections(const std::filesystem::path& path);

}  // namespace tdet
