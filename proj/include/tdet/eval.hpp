// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdet/geometry.hpp"

namespace tdet {

struct EvalDetection {
  std::string video_id;
  int class_id = 1;
  TemporalSegment segment;
  double score = 0.0;
};

struct EvalGroundTruth {
  std::string video_id;
  int class_id = 1;
  TemporalSegment segment;
};

/// Detections are visited by descending score (stable for ties). A detection
/// is a true positive when some still-unmatched ground truth of the same class
/// and video has IoU >= iou_threshold with it; the highest-IoU such ground
/// truth is consumed. AP is the area under the precision envelope
/// (all-points interpolation). Returns nullopt when there are no ground truths.
std::optional<double> average_precision(std::span<const EvalDetection> detections,
                                         std::span<const EvalGroundTruth> gts,
                                         double iou_threshold);

struct EvalResult {
  std::vector<double> thresholds;
  std::map<int, std::vector<double>> per_class_ap;  // class -> AP per threshold
  std::vector<double> map_at;                       // mAP per threshold
  double average_map = 0.0;

  double map_for(double threshold) const;
};

/// Per-class AP at every threshold; classes without ground truth are skipped.
EvalResult map_at(std::span<const EvalDetection> detections,
                  std::span<const EvalGroundTruth> gts, std::span<const double> thresholds);

std::vector<double> thumos_thresholds();       // 0.1 .. 0.5
std::vector<double> activitynet_thresholds();  // 0.50 .. 0.95

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

/// Class-agnostic proposal check: a proposal is correct when its IoU with a
/// ground truth of the same video is strictly above `iou_threshold`. An empty
/// proposal set yields precision 0.
PrecisionRecall proposal_pr(std::span<const EvalDetection> proposals,
                            std::span<const EvalGroundTruth> gts, double iou_threshold = 0.7);

std::string format_table(const EvalResult& result);
std::string to_json(const EvalResult& result);

}  // namespace tdet
