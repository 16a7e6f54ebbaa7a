// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tdet/assignment.hpp"
#include "tdet/data.hpp"
#include "tdet/inference.hpp"
#include "tdet/loss.hpp"
#include "tdet/model.hpp"

namespace tdet {

struct TrainConfig {
  // Staged schedule: `lr` for the first `decay_epoch` epochs, then lr * decay_factor.
  double lr = 1e-4;
  int epochs = 15;
  int decay_epoch = 10;
  double decay_factor = 0.1;

  int buffer_length = 768;
  BufferMode buffer_mode = BufferMode::kTwoWay;

  double pos_iou_hi = 0.7;
  double pos_iou_lo = 0.3;
  double cls_iou = 0.5;
  double lambda = 1.0;

  std::size_t proposal_batch = 64;
  double proposal_positive_fraction = 0.5;  // 1:1
  std::size_t cls_batch = 64;
  double cls_positive_fraction = 0.25;      // 1:3

  double proposal_nms = 0.7;
  std::size_t train_proposals = 300;
  // Ground-truth segments join the sampled proposal pool.
  bool add_gt_proposals = true;

  std::uint64_t seed = 0;
  std::size_t max_steps = 0;  // 0 = no cap

  double lr_at(int epoch) const { return epoch < decay_epoch ? lr : lr * decay_factor; }
  void validate() const;
};

struct StepLoss {
  LossReport proposal;
  LossReport classification;
  double total = 0.0;
  std::size_t unmatched_gts = 0;
};

/// Forward and backward pass of the joint objective on one buffer. Parameter
/// gradients are accumulated (not zeroed) into model.params(). `gts` are in
/// buffer frame coordinates. When `fixed_rois` is given it replaces the
/// NMS-selected proposal pool of the classification stage.
template <typename T>
StepLoss forward_backward(Network<T>& model, const Tensor<T>& buffer,
                          std::span<const LabeledSegment> gts, const TrainConfig& config,
                          std::uint64_t step_seed,
                          const std::vector<TemporalSegment>* fixed_rois = nullptr);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  std::size_t steps = 0;
  double mean_total = 0.0;
  double mean_proposal = 0.0;
  double mean_classification = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<double> step_losses;
  std::size_t steps = 0;
};

/// Ground truths of a window in buffer frames, clipped to the buffer.
std::vector<LabeledSegment> window_ground_truth(const VideoRecord& video,
                                                const BufferWindow& window, int buffer_length);

/// Plain SGD over every buffer of every video, one buffer per step, shuffled
/// per epoch. Throws kDiverged on a non-finite loss.
TrainResult train(Network<float>& model, const std::vector<Video>& dataset,
                  const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace tdet
