// SPDX-License-Identifier: Apache-2.0
#include "tdet/assignment.hpp"

#include <algorithm>
#include <cmath>

#include "tdet/error.hpp"
#include "tdet/rng.hpp"

namespace tdet {

std::size_t AssignmentTable::count_positive() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.positive(); }));
}

std::size_t AssignmentTable::count_negative() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.negative(); }));
}

namespace {

// Row-major anchors x gts IoU matrix.
std::vector<double> iou_matrix(std::span<const TemporalSegment> a,
                               std::span<const TemporalSegment> b) {
  std::vector<double> m(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t g = 0; g < b.size(); ++g) m[i * b.size() + g] = segment_iou(a[i], b[g]);
  return m;
}

}  // namespace

AssignmentTable assign_proposal_labels(std::span<const TemporalSegment> anchors,
                                       std::span<const TemporalSegment> gts, double hi,
                                       double lo) {
  TDET_CHECK(!anchors.empty(), ErrorCode::kInvalidArgument,
             "assign_proposal_labels: empty anchor list");
  TDET_CHECK(lo > 0.0 && lo <= hi && hi < 1.0, ErrorCode::kInvalidArgument,
             "assign_proposal_labels: thresholds must satisfy 0 < lo <= hi < 1");

  const std::size_t na = anchors.size();
  const std::size_t ng = gts.size();
  const auto iou = iou_matrix(anchors, gts);

  AssignmentTable table;
  table.entries.resize(na);

  // Per-anchor best gt; ties go to the lowest gt index.
  std::vector<std::size_t> best_gt(na, 0);
  std::vector<double> best_iou(na, 0.0);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t g = 0; g < ng; ++g) {
      if (iou[i * ng + g] > best_iou[i]) {
        best_iou[i] = iou[i * ng + g];
        best_gt[i] = g;
      }
    }
  }

  for (std::size_t i = 0; i < na; ++i) {
    if (best_iou[i] < lo) table.entries[i].label = kBackgroundLabel;
    if (best_iou[i] > hi) table.entries[i].label = 1;
  }

  // Highest-IoU rule: every anchor attaining a gt's maximum overlap is
  // positive, even below `lo`. A gt with no overlap anywhere gets nothing.
  for (std::size_t g = 0; g < ng; ++g) {
    double gt_max = 0.0;
    for (std::size_t i = 0; i < na; ++i) gt_max = std::max(gt_max, iou[i * ng + g]);
    if (gt_max <= 0.0) {
      table.unmatched_gts.push_back(g);
      continue;
    }
    for (std::size_t i = 0; i < na; ++i)
      if (iou[i * ng + g] == gt_max) table.entries[i].label = 1;
  }

  for (std::size_t i = 0; i < na; ++i) {
    auto& e = table.entries[i];
    if (!e.positive()) continue;
    e.matched_gt = best_gt[i];
    e.regression_target = encode_offsets(anchors[i], gts[best_gt[i]]);
  }
  return table;
}

AssignmentTable assign_proposal_labels(const AnchorGrid& anchors,
                                       std::span<const TemporalSegment> gts, double hi,
                                       double lo) {
  return assign_proposal_labels(std::span<const TemporalSegment>(anchors.anchors), gts, hi, lo);
}

AssignmentTable assign_class_labels(std::span<const TemporalSegment> proposals,
                                    std::span<const LabeledSegment> gts, double thresh) {
  AssignmentTable table;
  table.entries.resize(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    double best = 0.0;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = segment_iou(proposals[i], gts[g].segment);
      if (v > best) {
        best = v;
        best_g = g;
      }
    }
    auto& e = table.entries[i];
    if (best > thresh) {
      e.label = gts[best_g].class_id;
      e.matched_gt = best_g;
      e.regression_target = encode_offsets(proposals[i], gts[best_g].segment);
    } else {
      e.label = kBackgroundLabel;
    }
  }
  return table;
}

namespace {

// Partial Fisher-Yates: the first `k` elements become a uniform sample.
void take_random(std::vector<std::size_t>& pool, std::size_t k, Rng& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.index(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
}

}  // namespace

std::vector<std::size_t> sample_minibatch(const AssignmentTable& table,
                                          const SamplerConfig& config) {
  TDET_CHECK(config.batch_size >= 2, ErrorCode::kInvalidArgument,
             "sample_minibatch: batch_size must be >= 2");
  TDET_CHECK(config.positive_fraction > 0.0 && config.positive_fraction < 1.0,
             ErrorCode::kInvalidArgument,
             "sample_minibatch: positive_fraction must be in (0, 1)");

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < table.entries.size(); ++i) {
    if (table.entries[i].positive()) pos.push_back(i);
    else if (table.entries[i].negative()) neg.push_back(i);
  }
  TDET_CHECK(!pos.empty() || !neg.empty(), ErrorCode::kInvalidArgument,
             "sample_minibatch: no labeled (non-ignored) entries");

  Rng rng(config.rng_seed);
  const auto quota = static_cast<std::size_t>(
      std::floor(config.positive_fraction * static_cast<double>(config.batch_size)));
  take_random(pos, quota, rng);
  take_random(neg, config.batch_size - pos.size(), rng);

  std::vector<std::size_t> out;
  out.reserve(pos.size() + neg.size());
  out.insert(out.end(), pos.begin(), pos.end());
  out.insert(out.end(), neg.begin(), neg.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tdet
