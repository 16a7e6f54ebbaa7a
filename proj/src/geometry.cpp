// SPDX-License-Identifier: Apache-2.0
#include "tdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tdet/error.hpp"

namespace tdet {

double segment_iou(const TemporalSegment& a, const TemporalSegment& b) noexcept {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  if (!(uni > 0.0)) return 0.0;
  return inter / uni;
}

OffsetPair encode_offsets(const TemporalSegment& reference, const TemporalSegment& target) {
  const double lr = reference.length();
  const double lt = target.length();
  TDET_CHECK(lr > 0.0 && lt > 0.0, ErrorCode::kDegenerateSegment,
             "encode_offsets: segments must have positive length");
  return {(target.center() - reference.center()) / lr, std::log(lt / lr)};
}

TemporalSegment decode_offsets(const TemporalSegment& reference, const OffsetPair& offsets) {
  TDET_CHECK(std::isfinite(offsets.delta_center) && std::isfinite(offsets.delta_log_length),
             ErrorCode::kInvalidArgument, "decode_offsets: non-finite offsets");
  const double lr = reference.length();
  TDET_CHECK(lr > 0.0, ErrorCode::kDegenerateSegment,
             "decode_offsets: reference must have positive length");
  const double c = reference.center() + offsets.delta_center * lr;
  const double l = lr * std::exp(offsets.delta_log_length);
  return TemporalSegment::from_center_length(c, l);
}

TemporalSegment clip_segment(const TemporalSegment& s, double lo, double hi) noexcept {
  return {std::clamp(s.start, lo, hi), std::clamp(s.end, lo, hi)};
}

AnchorGrid generate_anchors(int num_locations, std::span<const int> scales, int stride) {
  TDET_CHECK(!scales.empty(), ErrorCode::kInvalidArgument, "generate_anchors: empty scale list");
  TDET_CHECK(num_locations >= 1, ErrorCode::kInvalidArgument,
             "generate_anchors: num_locations must be >= 1");
  TDET_CHECK(stride >= 1, ErrorCode::kInvalidArgument, "generate_anchors: stride must be >= 1");
  for (int s : scales) {
    TDET_CHECK(s >= 1, ErrorCode::kInvalidArgument,
               "generate_anchors: scale " + std::to_string(s) + " must be >= 1");
  }

  AnchorGrid grid;
  grid.stride = stride;
  grid.scales.assign(scales.begin(), scales.end());
  grid.num_locations = num_locations;
  grid.anchors.reserve(static_cast<std::size_t>(num_locations) * scales.size());
  for (int j = 0; j < num_locations; ++j) {
    const double center = (j + 0.5) * stride;
    for (int s : scales) {
      grid.anchors.push_back(TemporalSegment::from_center_length(center, double(s) * stride));
    }
  }
  return grid;
}

}  // namespace tdet
