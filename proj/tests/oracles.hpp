// SPDX-License-Identifier: Apache-2.0
// Brute-force reference implementations shared by the unit and acceptance
// tests. Each one is written from the definition, not from the library code.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tdet/assignment.hpp"
#include "tdet/eval.hpp"
#include "tdet/geometry.hpp"
#include "tdet/inference.hpp"
#include "tdet/roipool.hpp"

namespace oracle {

using tdet::TemporalSegment;

// IoU from the hull and gap: union = hull - gap, intersection = la + lb - union.
inline double iou(const TemporalSegment& a, const TemporalSegment& b) {
  const long double hull = std::max<long double>(a.end, b.end) - std::min<long double>(a.start, b.start);
  const long double gap = std::max<long double>(0.0L, std::max<long double>(a.start, b.start) -
                                                          std::min<long double>(a.end, b.end));
  const long double uni = hull - gap;
  if (uni <= 0.0L) return 0.0;
  const long double inter = (a.end - a.start) + (b.end - b.start) - uni;
  return static_cast<double>(std::max<long double>(0.0L, inter) / uni);
}

// Greedy NMS by definition: repeatedly take the best remaining candidate
// (highest score, lowest index on ties) that no kept candidate suppresses.
inline std::vector<std::size_t> nms(const std::vector<tdet::ScoredSegment>& c, double threshold) {
  std::vector<bool> used(c.size(), false);
  std::vector<std::size_t> kept;
  for (;;) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (used[i]) continue;
      if (!best || c[i].score > c[*best].score) best = i;
    }
    if (!best) break;
    used[*best] = true;
    bool suppressed = false;
    for (auto k : kept)
      if (iou(c[k].segment, c[*best].segment) > threshold) suppressed = true;
    if (!suppressed) kept.push_back(*best);
  }
  return kept;
}

struct Assigned {
  int label;
  std::optional<std::size_t> gt;
};

// Proposal-stage rule: positive when IoU > hi with some gt or when the anchor
// attains a gt's (nonzero) maximum IoU; negative when every IoU < lo.
inline std::vector<Assigned> assign_proposals(const std::vector<TemporalSegment>& anchors,
                                              const std::vector<TemporalSegment>& gts,
                                              double hi, double lo) {
  std::vector<Assigned> out;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    bool pos = false, all_low = true;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(anchors[i], gts[g]);
      if (v > hi) pos = true;
      if (v >= lo) all_low = false;
      double gmax = 0.0;
      for (const auto& a : anchors) gmax = std::max(gmax, iou(a, gts[g]));
      if (gmax > 0.0 && v == gmax) pos = true;
    }
    Assigned a{pos ? 1 : (all_low ? 0 : -1), std::nullopt};
    if (pos) {
      std::size_t best = 0;
      for (std::size_t g = 1; g < gts.size(); ++g)
        if (iou(anchors[i], gts[g]) > iou(anchors[i], gts[best])) best = g;
      a.gt = best;
    }
    out.push_back(a);
  }
  return out;
}

// Bin k of `bins` over `extent` cells; empty bins widen to one cell.
inline std::pair<int, int> bin(int k, int bins, int extent) {
  int b = static_cast<int>(std::floor(double(k) * extent / bins));
  int e = static_cast<int>(std::floor(double(k + 1) * extent / bins));
  if (e <= b) e = b + 1;
  return {b, e};
}

// RoI max pooling by enumeration: gather every member of a bin, then take the
// first maximum in C-order.
template <typename T>
std::pair<std::vector<T>, std::vector<std::int64_t>> roi_pool(const tdet::Tensor<T>& x,
                                                              int stride,
                                                              const TemporalSegment& p,
                                                              const tdet::PoolGrid& g) {
  const int C = int(x.dim(0)), L = int(x.dim(1)), H = int(x.dim(2)), W = int(x.dim(3));
  // Cells j with [j*stride, (j+1)*stride) meeting the proposal.
  std::vector<int> cells;
  for (int j = 0; j < L; ++j)
    if ((j + 1) * double(stride) > p.start && j * double(stride) < p.end) cells.push_back(j);
  if (cells.empty()) cells.push_back(std::clamp(int(std::floor(p.start / stride)), 0, L - 1));
  const int n = int(cells.size());
  std::vector<T> out;
  std::vector<std::int64_t> arg;
  for (int c = 0; c < C; ++c)
    for (int bt = 0; bt < g.ls; ++bt)
      for (int bh = 0; bh < g.hs; ++bh)
        for (int bw = 0; bw < g.ws; ++bw) {
          auto [t0, t1] = bin(bt, g.ls, n);
          auto [h0, h1] = bin(bh, g.hs, H);
          auto [w0, w1] = bin(bw, g.ws, W);
          std::vector<std::pair<T, std::int64_t>> members;
          for (int t = t0; t < t1; ++t)
            for (int h = h0; h < h1; ++h)
              for (int w = w0; w < w1; ++w) {
                const std::int64_t idx = ((std::int64_t(c) * L + cells[t]) * H + h) * W + w;
                members.push_back({x[std::size_t(idx)], idx});
              }
          auto best = members.front();
          for (const auto& m : members)
            if (m.first > best.first || (m.first == best.first && m.second < best.second)) best = m;
          out.push_back(best.first);
          arg.push_back(best.second);
        }
  return {out, arg};
}

// AP from the greedy TP flags as the mean, over ground truths, of the best
// precision reached at or beyond each true positive's rank.
inline std::optional<double> average_precision(std::vector<tdet::EvalDetection> dets,
                                               const std::vector<tdet::EvalGroundTruth>& gts,
                                               double alpha) {
  if (gts.empty()) return std::nullopt;
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return dets[a].score > dets[b].score; });
  std::vector<bool> taken(gts.size(), false);
  std::vector<bool> tp;
  for (auto i : order) {
    const auto& d = dets[i];
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].video_id != d.video_id || gts[g].class_id != d.class_id) continue;
      const double v = iou(d.segment, gts[g].segment);
      if (v >= alpha && v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best) taken[*best] = true;
    tp.push_back(best.has_value());
  }
  std::vector<double> precision;
  double hits = 0.0;
  for (std::size_t k = 0; k < tp.size(); ++k) {
    hits += tp[k] ? 1.0 : 0.0;
    precision.push_back(hits / double(k + 1));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < tp.size(); ++k) {
    if (!tp[k]) continue;
    double best = 0.0;
    for (std::size_t j = k; j < tp.size(); ++j) best = std::max(best, precision[j]);
    sum += best;
  }
  return sum / double(gts.size());
}

// Central finite difference of f with respect to x[i].
template <typename T>
double central_difference(std::vector<T>& x, std::size_t i, double h,
                          const std::function<double()>& f) {
  const T saved = x[i];
  x[i] = static_cast<T>(saved + h);
  const double up = f();
  x[i] = static_cast<T>(saved - h);
  const double down = f();
  x[i] = saved;
  return (up - down) / (2.0 * h);
}

// |a - b| / max(|a|, |b|, floor): relative error with an absolute floor for
// gradients that are numerically zero.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
