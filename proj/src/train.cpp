// SPDX-License-Identifier: Apache-2.0
#include "tdet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "tdet/rng.hpp"

namespace tdet {

void TrainConfig::validate() const {
  TDET_CHECK(lr >= 0.0 && std::isfinite(lr), ErrorCode::kInvalidArgument, "train: lr must be >= 0");
  TDET_CHECK(epochs >= 0, ErrorCode::kInvalidArgument, "train: epochs must be >= 0");
  TDET_CHECK(buffer_length > 0 && buffer_length % 8 == 0, ErrorCode::kInvalidArgument,
             "train: buffer length must be a positive multiple of 8");
  TDET_CHECK(pos_iou_lo > 0.0 && pos_iou_lo <= pos_iou_hi && pos_iou_hi < 1.0,
             ErrorCode::kInvalidArgument, "train: need 0 < pos-iou-lo <= pos-iou-hi < 1");
  TDET_CHECK(cls_iou > 0.0 && cls_iou < 1.0, ErrorCode::kInvalidArgument,
             "train: cls-iou must be in (0, 1)");
  TDET_CHECK(lambda >= 0.0, ErrorCode::kInvalidArgument, "train: lambda must be >= 0");
}

std::vector<LabeledSegment> window_ground_truth(const VideoRecord& video,
                                                const BufferWindow& window, int buffer_length) {
  std::vector<LabeledSegment> out;
  const double off = double(window.offset);
  for (const auto& g : video.segments_in_frames()) {
    TemporalSegment s{g.segment.start - off, g.segment.end - off};
    s = clip_segment(s, 0.0, double(buffer_length));
    if (s.length() > 0.0) out.push_back({s, g.class_id});
  }
  return out;
}

template <typename T>
StepLoss forward_backward(Network<T>& model, const Tensor<T>& buffer,
                          std::span<const LabeledSegment> gts, const TrainConfig& config,
                          std::uint64_t step_seed, const std::vector<TemporalSegment>* fixed_rois) {
  Rng rng(step_seed);
  StepLoss loss;

  typename Backbone<T>::Tape backbone_tape;
  const FeatureVolume<T> features = model.backbone().forward(buffer, &backbone_tape);
  const int locations = static_cast<int>(features.data.dim(1));
  const int K = model.config().num_scales();
  const AnchorGrid anchors = model.anchors(locations);

  std::vector<TemporalSegment> gt_segments;
  for (const auto& g : gts) gt_segments.push_back(g.segment);

  // Proposal subnet: class-agnostic objectness + offsets on sampled anchors.
  typename ProposalHead<T>::Tape ptape;
  const auto pout = model.proposal_head().forward(features, &ptape);
  const auto finite = [](const Tensor<T>& t) {
    return std::all_of(t.values().begin(), t.values().end(), [](T v) { return std::isfinite(v); });
  };
  TDET_CHECK(finite(pout.logits) && finite(pout.offsets), ErrorCode::kDiverged,
             "non-finite proposal outputs; lower the learning rate");
  const auto ptable =
      assign_proposal_labels(anchors, gt_segments, config.pos_iou_hi, config.pos_iou_lo);
  loss.unmatched_gts = ptable.unmatched_gts.size();
  const auto psample = sample_minibatch(
      ptable, {config.proposal_batch, config.proposal_positive_fraction, rng.next()});

  std::vector<ClsTerm> pcls;
  std::vector<RegTerm> preg;
  for (auto a : psample) {
    const auto& e = ptable.entries[a];
    pcls.push_back({{double(pout.logits[2 * a]), double(pout.logits[2 * a + 1])},
                    e.positive() ? std::size_t{1} : std::size_t{0}});
    RegTerm r;
    r.pred = {double(pout.offsets[2 * a]), double(pout.offsets[2 * a + 1])};
    r.positive = e.positive();
    if (r.positive) r.target = *e.regression_target;
    preg.push_back(r);
  }
  const auto pj = joint_loss(pcls, preg, config.lambda);
  loss.proposal = pj.report;

  Tensor<T> g_logits({std::size_t(locations), std::size_t(K), 2});
  Tensor<T> g_offsets({std::size_t(locations), std::size_t(K), 2});
  for (std::size_t i = 0; i < psample.size(); ++i) {
    const std::size_t a = psample[i];
    g_logits[2 * a] += static_cast<T>(pj.cls_grads[i][0]);
    g_logits[2 * a + 1] += static_cast<T>(pj.cls_grads[i][1]);
    g_offsets[2 * a] += static_cast<T>(pj.reg_grads[i].delta_center);
    g_offsets[2 * a + 1] += static_cast<T>(pj.reg_grads[i].delta_log_length);
  }

  // Classification subnet on sampled proposals; proposal coordinates are
  // treated as constants.
  std::vector<TemporalSegment> pool;
  if (fixed_rois) {
    pool = *fixed_rois;
  } else {
    const double B = double(buffer.dim(1));
    const auto cands = decode_proposals(pout, anchors, B, 1.0, std::log(1000.0 / 16.0));
    for (const auto& p : select_proposals(cands, config.proposal_nms, config.train_proposals))
      pool.push_back(p.segment);
    if (config.add_gt_proposals)
      for (const auto& g : gts) pool.push_back(g.segment);
  }

  Tensor<T> g_features(features.data.shape());
  if (!pool.empty()) {
    const auto ctable = assign_class_labels(pool, gts, config.cls_iou);
    const auto csample =
        sample_minibatch(ctable, {config.cls_batch, config.cls_positive_fraction, rng.next()});
    std::vector<TemporalSegment> rois;
    for (auto i : csample) rois.push_back(pool[i]);

    typename Network<T>::RoiTape rtape;
    const auto cout = model.classify(features, rois, &rtape);
    const std::size_t K1 = std::size_t(model.config().num_classes) + 1;

    std::vector<ClsTerm> ccls;
    std::vector<RegTerm> creg;
    for (std::size_t n = 0; n < rois.size(); ++n) {
      const auto& e = ctable.entries[csample[n]];
      ClsTerm c;
      c.logits.resize(K1);
      for (std::size_t k = 0; k < K1; ++k) c.logits[k] = cout.logits[n * K1 + k];
      c.label = static_cast<std::size_t>(e.label);
      ccls.push_back(std::move(c));
      RegTerm r;
      r.positive = e.positive();
      if (r.positive) {
        const std::size_t slot = (n * K1 + std::size_t(e.label)) * 2;
        r.pred = {double(cout.offsets[slot]), double(cout.offsets[slot + 1])};
        r.target = *e.regression_target;
      }
      creg.push_back(r);
    }
    const auto cj = joint_loss(ccls, creg, config.lambda);
    loss.classification = cj.report;

    Tensor<T> gc_logits(cout.logits.shape());
    Tensor<T> gc_offsets(cout.offsets.shape());
    for (std::size_t n = 0; n < rois.size(); ++n) {
      for (std::size_t k = 0; k < K1; ++k)
        gc_logits[n * K1 + k] = static_cast<T>(cj.cls_grads[n][k]);
      if (creg[n].positive) {
        const std::size_t slot = (n * K1 + ccls[n].label) * 2;
        gc_offsets[slot] = static_cast<T>(cj.reg_grads[n].delta_center);
        gc_offsets[slot + 1] = static_cast<T>(cj.reg_grads[n].delta_log_length);
      }
    }
    model.classify_backward(gc_logits, gc_offsets, rtape, g_features);
  }

  const Tensor<T> gp = model.proposal_head().backward(g_logits, g_offsets, ptape);
  for (std::size_t i = 0; i < g_features.size(); ++i) g_features[i] += gp[i];
  model.backbone().backward(g_features, backbone_tape);

  loss.total = loss.proposal.total + loss.classification.total;
  return loss;
}

TrainResult train(Network<float>& model, const std::vector<Video>& dataset,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  TDET_CHECK(!dataset.empty(), ErrorCode::kInvalidArgument, "train: empty dataset");

  struct Item {
    std::size_t video;
    BufferWindow window;
  };
  std::vector<Item> items;
  for (std::size_t v = 0; v < dataset.size(); ++v) {
    const auto plan =
        build_buffers(dataset[v].record.num_frames, config.buffer_length, config.buffer_mode);
    for (const auto& w : plan.windows) items.push_back({v, w});
  }

  Rng rng(config.seed);
  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Fisher-Yates with the explicit source keeps the order bit-reproducible.
    for (std::size_t i = items.size(); i > 1; --i)
      std::swap(items[i - 1], items[static_cast<std::size_t>(rng.index(i))]);

    EpochLog log;
    log.epoch = epoch;
    log.lr = config.lr_at(epoch);
    for (const auto& item : items) {
      if (config.max_steps && result.steps >= config.max_steps) break;
      const Video& video = dataset[item.video];
      const auto buffer = extract_buffer(video.features, item.window, config.buffer_length);
      const auto gts = window_ground_truth(video.record, item.window, config.buffer_length);

      model.params().zero_grad();
      const StepLoss step = forward_backward(model, buffer, gts, config, rng.next());
      TDET_CHECK(std::isfinite(step.total) && model.params().all_finite(), ErrorCode::kDiverged,
                 "training diverged at epoch " + std::to_string(epoch) + ", step " +
                     std::to_string(result.steps) + " (loss " + std::to_string(step.total) +
                     "); lower the learning rate");
      model.params().sgd_step(log.lr);

      result.step_losses.push_back(step.total);
      ++result.steps;
      ++log.steps;
      log.mean_total += step.total;
      log.mean_proposal += step.proposal.total;
      log.mean_classification += step.classification.total;
    }
    if (log.steps) {
      log.mean_total /= double(log.steps);
      log.mean_proposal /= double(log.steps);
      log.mean_classification /= double(log.steps);
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (config.max_steps && result.steps >= config.max_steps) break;
  }
  return result;
}

template StepLoss forward_backward<float>(Network<float>&, const Tensor<float>&,
                                          std::span<const LabeledSegment>, const TrainConfig&,
                                          std::uint64_t, const std::vector<TemporalSegment>*);
template StepLoss forward_backward<double>(Network<double>&, const Tensor<double>&,
                                           std::span<const LabeledSegment>, const TrainConfig&,
                                           std::uint64_t, const std::vector<TemporalSegment>*);

}  // namespace tdet
