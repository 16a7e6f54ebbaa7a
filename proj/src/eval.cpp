// SPDX-License-Identifier: Apache-2.0
#include "tdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "tdet/error.hpp"

namespace tdet {

std::optional<double> average_precision(std::span<const EvalDetection> detections,
                                         std::span<const EvalGroundTruth> gts,
                                         double iou_threshold) {
  if (gts.empty()) return std::nullopt;

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });

  std::vector<bool> matched(gts.size(), false);
  std::vector<double> precision, recall;
  precision.reserve(order.size());
  recall.reserve(order.size());
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto& d = detections[order[rank]];
    double best = -1.0;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (matched[g] || gts[g].class_id != d.class_id || gts[g].video_id != d.video_id) continue;
      const double iou = segment_iou(d.segment, gts[g].segment);
      if (iou >= iou_threshold && iou > best) {
        best = iou;
        best_g = g;
      }
    }
    if (best_g < gts.size()) {
      matched[best_g] = true;
      ++tp;
    }
    precision.push_back(double(tp) / double(rank + 1));
    recall.push_back(double(tp) / double(gts.size()));
  }

  // Precision envelope, then area as a step function over recall.
  for (std::size_t i = precision.size(); i-- > 1;)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

double EvalResult::map_for(double threshold) const {
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    if (std::abs(thresholds[i] - threshold) < 1e-9) return map_at[i];
  throw Error(ErrorCode::kInvalidArgument, "threshold was not evaluated");
}

EvalResult map_at(std::span<const EvalDetection> detections,
                  std::span<const EvalGroundTruth> gts, std::span<const double> thresholds) {
  TDET_CHECK(!thresholds.empty(), ErrorCode::kInvalidArgument, "map_at: no thresholds");
  EvalResult r;
  r.thresholds.assign(thresholds.begin(), thresholds.end());

  std::set<int> classes;
  for (const auto& g : gts) classes.insert(g.class_id);

  for (int c : classes) {
    std::vector<EvalDetection> dc;
    std::vector<EvalGroundTruth> gc;
    for (const auto& d : detections)
      if (d.class_id == c) dc.push_back(d);
    for (const auto& g : gts)
      if (g.class_id == c) gc.push_back(g);
    auto& aps = r.per_class_ap[c];
    for (double t : thresholds) aps.push_back(*average_precision(dc, gc, t));
  }

  r.map_at.assign(thresholds.size(), 0.0);
  if (!classes.empty()) {
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      double s = 0.0;
      for (const auto& [c, aps] : r.per_class_ap) s += aps[i];
      r.map_at[i] = s / double(classes.size());
    }
  }
  r.average_map = std::accumulate(r.map_at.begin(), r.map_at.end(), 0.0) / double(r.map_at.size());
  return r;
}

std::vector<double> thumos_thresholds() { return {0.1, 0.2, 0.3, 0.4, 0.5}; }

std::vector<double> activitynet_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

PrecisionRecall proposal_pr(std::span<const EvalDetection> proposals,
                            std::span<const EvalGroundTruth> gts, double iou_threshold) {
  std::vector<bool> covered(gts.size(), false);
  std::size_t correct = 0;
  for (const auto& p : proposals) {
    bool ok = false;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].video_id != p.video_id) continue;
      if (segment_iou(p.segment, gts[g].segment) > iou_threshold) {
        ok = true;
        covered[g] = true;
      }
    }
    correct += ok;
  }
  PrecisionRecall pr;
  pr.precision = proposals.empty() ? 0.0 : double(correct) / double(proposals.size());
  const auto n_cov = std::count(covered.begin(), covered.end(), true);
  pr.recall = gts.empty() ? 0.0 : double(n_cov) / double(gts.size());
  return pr;
}

std::string format_table(const EvalResult& result) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << std::left << std::setw(10) << "class";
  for (double t : result.thresholds) os << std::right << std::setw(8) << ("@" + std::to_string(t).substr(0, 4));
  os << '\n';
  for (const auto& [c, aps] : result.per_class_ap) {
    os << std::left << std::setw(10) << c;
    for (double ap : aps) os << std::right << std::setw(8) << 100.0 * ap;
    os << '\n';
  }
  os << std::left << std::setw(10) << "mAP";
  for (double m : result.map_at) os << std::right << std::setw(8) << 100.0 * m;
  os << "\naverage mAP: " << 100.0 * result.average_map << '\n';
  return os.str();
}

std::string to_json(const EvalResult& result) {
  nlohmann::json j;
  j["thresholds"] = result.thresholds;
  j["map_at"] = result.map_at;
  j["average_map"] = result.average_map;
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [c, aps] : result.per_class_ap) per[std::to_string(c)] = aps;
  j["per_class_ap"] = per;
  return j.dump(2);
}

}  // namespace tdet
