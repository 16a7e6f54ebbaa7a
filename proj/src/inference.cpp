// SPDX-License-Identifier: Apache-2.0
#include "tdet/inference.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "tdet/loss.hpp"

namespace tdet {

std::vector<std::size_t> nms(std::span<const ScoredSegment> candidates, double threshold) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].score > candidates[b].score;
  });
  std::vector<std::size_t> keep;
  std::vector<bool> dead(candidates.size(), false);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (dead[i]) continue;
    keep.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!dead[j] && segment_iou(candidates[i].segment, candidates[j].segment) > threshold)
        dead[j] = true;
    }
  }
  return keep;
}

BufferPlan build_buffers(long video_length, int buffer_length, BufferMode mode) {
  TDET_CHECK(video_length > 0, ErrorCode::kInvalidArgument, "build_buffers: empty video");
  TDET_CHECK(buffer_length > 0 && buffer_length % 8 == 0, ErrorCode::kInvalidArgument,
             "build_buffers: buffer length must be a positive multiple of 8");
  BufferPlan plan;
  plan.buffer_length = buffer_length;
  const long n = (video_length + buffer_length - 1) / buffer_length;
  for (long i = 0; i < n; ++i) {
    BufferWindow w;
    w.offset = i * buffer_length;
    w.padding = std::max(0L, w.offset + buffer_length - video_length);
    plan.windows.push_back(w);
  }
  plan.padding = plan.windows.back().padding;
  if (mode == BufferMode::kTwoWay) {
    for (long i = 0; i < n; ++i) {
      BufferWindow w;
      w.direction = Direction::kReverse;
      w.offset = std::max(0L, video_length - (i + 1) * buffer_length);
      w.padding = std::max(0L, w.offset + buffer_length - video_length);
      plan.windows.push_back(w);
    }
  }
  return plan;
}

Tensor<float> extract_buffer(const Tensor<float>& video, const BufferWindow& window,
                             int buffer_length) {
  TDET_CHECK(video.rank() == 4, ErrorCode::kShapeMismatch, "video must be C x V x H x W");
  const std::size_t C = video.dim(0), V = video.dim(1), plane = video.dim(2) * video.dim(3);
  TDET_CHECK(V > 0 && window.offset >= 0 && std::size_t(window.offset) < V,
             ErrorCode::kInvalidArgument, "buffer window starts outside the video");
  Tensor<float> out({C, std::size_t(buffer_length), video.dim(2), video.dim(3)});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t t = 0; t < std::size_t(buffer_length); ++t) {
      const std::size_t src = std::min(V - 1, std::size_t(window.offset) + t);
      std::copy_n(video.data() + (c * V + src) * plane, plane,
                  out.data() + (c * buffer_length + t) * plane);
    }
  return out;
}

void DetectConfig::validate() const {
  TDET_CHECK(proposal_nms >= 0.0 && proposal_nms <= 1.0, ErrorCode::kInvalidArgument,
             "proposal NMS threshold must be in [0, 1]");
  TDET_CHECK(final_nms() >= 0.0 && final_nms() <= 1.0, ErrorCode::kInvalidArgument,
             "eval IoU must be in [0.1, 1.1] so the final NMS threshold lies in [0, 1]");
  TDET_CHECK(max_proposals >= 1, ErrorCode::kInvalidArgument, "max_proposals must be >= 1");
}

template <typename T>
std::vector<ScoredSegment> decode_proposals(const ProposalOutput<T>& out, const AnchorGrid& anchors,
                                            double buffer_length, double min_length,
                                            double max_log_length_delta) {
  TDET_CHECK(out.logits.size() == anchors.size() * 2, ErrorCode::kShapeMismatch,
             "proposal output does not match the anchor grid");
  std::vector<ScoredSegment> props;
  props.reserve(anchors.size());
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const double bg = out.logits[2 * a], fg = out.logits[2 * a + 1];
    const double score = 1.0 / (1.0 + std::exp(bg - fg));
    OffsetPair off{double(out.offsets[2 * a]), double(out.offsets[2 * a + 1])};
    off.delta_log_length =
        std::clamp(off.delta_log_length, -max_log_length_delta, max_log_length_delta);
    const auto seg = clip_segment(decode_offsets(anchors.anchors[a], off), 0.0, buffer_length);
    if (seg.length() >= min_length) props.push_back({seg, score});
  }
  return props;
}

std::vector<ScoredSegment> select_proposals(std::span<const ScoredSegment> candidates,
                                            double nms_threshold, std::size_t max_proposals) {
  auto keep = nms(candidates, nms_threshold);
  if (keep.size() > max_proposals) keep.resize(max_proposals);
  std::vector<ScoredSegment> out;
  out.reserve(keep.size());
  for (auto k : keep) out.push_back(candidates[k]);
  return out;
}

template <typename T>
BufferDetections detect(const Tensor<T>& buffer, const Network<T>& model,
                        const DetectConfig& config) {
  config.validate();
  const double B = static_cast<double>(buffer.dim(1));
  const int C = model.config().num_classes;

  BufferDetections result;
  const FeatureVolume<T> features = model.backbone().forward(buffer, nullptr);
  const auto pout = model.proposal_head().forward(features, nullptr);
  const AnchorGrid anchors = model.anchors(static_cast<int>(features.data.dim(1)));
  result.stats.anchors = anchors.size();

  const auto candidates = decode_proposals(pout, anchors, B, config.min_proposal_length,
                                           config.max_log_length_delta);
  result.stats.proposals = candidates.size();
  result.proposals = select_proposals(candidates, config.proposal_nms, config.max_proposals);
  result.stats.after_nms = result.proposals.size();
  if (result.proposals.empty()) return result;

  std::vector<TemporalSegment> rois;
  rois.reserve(result.proposals.size());
  for (const auto& p : result.proposals) rois.push_back(p.segment);
  const auto cout = model.classify(features, rois, nullptr);

  std::map<int, std::vector<ScoredSegment>> per_class;
  const std::size_t K1 = std::size_t(C) + 1;
  for (std::size_t n = 0; n < rois.size(); ++n) {
    std::vector<double> logits(K1);
    for (std::size_t c = 0; c < K1; ++c) logits[c] = cout.logits[n * K1 + c];
    const auto prob = softmax(logits);
    for (int c = 1; c <= C; ++c) {
      if (prob[c] < config.score_floor) continue;
      OffsetPair off{double(cout.offsets[(n * K1 + c) * 2]),
                     double(cout.offsets[(n * K1 + c) * 2 + 1])};
      off.delta_log_length =
          std::clamp(off.delta_log_length, -config.max_log_length_delta, config.max_log_length_delta);
      const auto seg = clip_segment(decode_offsets(rois[n], off), 0.0, B);
      if (seg.length() <= 0.0) continue;
      per_class[c].push_back({seg, prob[c]});
    }
  }

  for (auto& [cls, cands] : per_class) {
    for (auto k : nms(cands, config.final_nms()))
      result.detections.push_back({cands[k].segment, cls, cands[k].score});
  }
  result.stats.detections = result.detections.size();
  return result;
}

std::vector<ScoredDetection> detect_video(const Tensor<float>& video, long num_frames,
                                          const Network<float>& model, const DetectConfig& config,
                                          int buffer_length,
                                          std::vector<ScoredSegment>* proposals) {
  const BufferPlan plan = build_buffers(num_frames, buffer_length, BufferMode::kOneWay);
  const double V = static_cast<double>(num_frames);
  std::vector<ScoredDetection> out;
  for (const auto& w : plan.windows) {
    const auto buf = extract_buffer(video, w, buffer_length);
    auto res = detect(buf, model, config);
    const double off = static_cast<double>(w.offset);
    for (auto d : res.detections) {
      d.segment.start += off;
      d.segment.end += off;
      if (d.segment.start >= V) continue;  // entirely inside padded frames
      d.segment = clip_segment(d.segment, 0.0, V);
      if (d.segment.length() <= 0.0) continue;
      out.push_back(d);
    }
    if (proposals) {
      for (auto p : res.proposals) {
        p.segment.start += off;
        p.segment.end += off;
        if (p.segment.start >= V) continue;
        p.segment = clip_segment(p.segment, 0.0, V);
        proposals->push_back(p);
      }
    }
  }
  return out;
}

void write_detections(const std::filesystem::path& path,
                      std::span<const DetectionRecord> records) {
  std::ofstream os(path, std::ios::trunc);
  TDET_CHECK(os.good(), ErrorCode::kIo, "cannot write detections: " + path.string());
  os << std::setprecision(17);
  for (const auto& r : records)
    os << r.video_id << '\t' << r.class_id << '\t' << r.start_s << '\t' << r.end_s << '\t'
       << r.score << '\n';
}

std::vector<DetectionRecord> read_detections(const std::filesystem::path& path) {
  std::ifstream is(path);
  TDET_CHECK(is.good(), ErrorCode::kIo, "cannot read detections: " + path.string());
  std::vector<DetectionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    DetectionRecord r;
    std::string cls, start, end, score;
    if (!std::getline(ls, r.video_id, '\t') || !std::getline(ls, cls, '\t') ||
        !std::getline(ls, start, '\t') || !std::getline(ls, end, '\t') ||
        !std::getline(ls, score, '\t'))
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(lineno) +
                                         ": expected 5 tab-separated fields");
    try {
      r.class_id = std::stoi(cls);
      r.start_s = std::stod(start);
      r.end_s = std::stod(end);
      r.score = std::stod(score);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse,
                  path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
    out.push_back(std::move(r));
  }
  return out;
}

template std::vector<ScoredSegment> decode_proposals<float>(const ProposalOutput<float>&,
                                                            const AnchorGrid&, double, double,
                                                            double);
template std::vector<ScoredSegment> decode_proposals<double>(const ProposalOutput<double>&,
                                                             const AnchorGrid&, double, double,
                                                             double);
template BufferDetections detect<float>(const Tensor<float>&, const Network<float>&,
                                        const DetectConfig&);
template BufferDetections detect<double>(const Tensor<double>&, const Network<double>&,
                                         const DetectConfig&);

}  // namespace tdet
