// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tdet/geometry.hpp"

namespace tdet {

inline constexpr int kIgnoredLabel = -1;
inline constexpr int kBackgroundLabel = 0;

struct AssignmentEntry {
  int label = kIgnoredLabel;  // -1 ignored, 0 background, >= 1 class id
  std::optional<std::size_t> matched_gt;
  std::optional<OffsetPair> regression_target;

  bool positive() const noexcept { return label > 0; }
  bool negative() const noexcept { return label == kBackgroundLabel; }
};

struct AssignmentTable {
  std::vector<AssignmentEntry> entries;
  // Ground truths that overlap no candidate at all and therefore received no
  // positive. Reported to the caller as a dataset warning.
  std::vector<std::size_t> unmatched_gts;

  std::size_t size() const noexcept { return entries.size(); }
  std::size_t count_positive() const;
  std::size_t count_negative() const;
};

struct LabeledSegment {
  TemporalSegment segment;
  int class_id = 1;
};

/// Proposal-stage (class-agnostic) labels. An anchor is positive when its IoU
/// with some ground truth exceeds `hi`, or when it attains that ground truth's
/// highest IoU over all anchors; negative when its IoU is below `lo` for every
/// ground truth; ignored otherwise. Positives are labeled 1.
AssignmentTable assign_proposal_labels(std::span<const TemporalSegment> anchors,
                                       std::span<const TemporalSegment> gts,
                                       double hi = 0.7, double lo = 0.3);
AssignmentTable assign_proposal_labels(const AnchorGrid& anchors,
                                       std::span<const TemporalSegment> gts,
                                       double hi = 0.7, double lo = 0.3);

/// Classification-stage labels: the class of the highest-IoU ground truth
/// when that IoU exceeds `thresh`, background otherwise.
AssignmentTable assign_class_labels(std::span<const TemporalSegment> proposals,
                                    std::span<const LabeledSegment> gts, double thresh = 0.5);

struct SamplerConfig {
  std::size_t batch_size = 64;
  double positive_fraction = 0.5;
  std::uint64_t rng_seed = 0;
};

/// Balanced minibatch: at most positive_fraction * batch_size positives, the
/// remainder filled with negatives. Ignored entries are never returned.
/// Indices are returned in ascending order.
std::vector<std::size_t> sample_minibatch(const AssignmentTable& table,
                                          const SamplerConfig& config);

}  // namespace tdet
