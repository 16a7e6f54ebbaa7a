// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tdet {

/// Closed interval on the time axis, in input-frame units.
struct TemporalSegment {
  double start = 0.0;
  double end = 0.0;

  double center() const noexcept { return 0.5 * (start + end); }
  double length() const noexcept { return end - start; }
  bool valid() const noexcept { return start <= end; }

  static TemporalSegment from_center_length(double center, double length) noexcept {
    return {center - 0.5 * length, center + 0.5 * length};
  }

  friend bool operator==(const TemporalSegment&, const TemporalSegment&) = default;
};

/// Regression target relative to a reference segment: center shift normalized
/// by the reference length, and the natural log of the length ratio.
struct OffsetPair {
  double delta_center = 0.0;
  double delta_log_length = 0.0;

  friend bool operator==(const OffsetPair&, const OffsetPair&) = default;
};

/// Intersection over union. Returns 0 when the union has zero length.
double segment_iou(const TemporalSegment& a, const TemporalSegment& b) noexcept;

/// Throws kDegenerateSegment if either segment has non-positive length.
OffsetPair encode_offsets(const TemporalSegment& reference, const TemporalSegment& target);

/// Inverse of encode_offsets. Throws on non-finite offsets or a degenerate reference.
TemporalSegment decode_offsets(const TemporalSegment& reference, const OffsetPair& offsets);

TemporalSegment clip_segment(const TemporalSegment& s, double lo, double hi) noexcept;

/// K reference segments repeated at every feature-map location. Anchors are
/// stored location-major: anchor(j, k) lives at index j * K + k.
struct AnchorGrid {
  int stride = 8;
  std::vector<int> scales;
  int num_locations = 0;
  std::vector<TemporalSegment> anchors;

  std::size_t num_scales() const noexcept { return scales.size(); }
  std::size_t size() const noexcept { return anchors.size(); }
  const TemporalSegment& at(int location, std::size_t scale) const {
    return anchors.at(static_cast<std::size_t>(location) * scales.size() + scale);
  }
};

/// Anchor at location j and scale s has center (j + 0.5) * stride and length
/// s * stride. Anchors are not clipped to the buffer.
AnchorGrid generate_anchors(int num_locations, std::span<const int> scales, int stride);

}  // namespace tdet
