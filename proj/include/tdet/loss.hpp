// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tdet/geometry.hpp"

namespace tdet {

struct LossReport {
  double cls_loss = 0.0;
  double reg_loss = 0.0;
  double total = 0.0;
  std::size_t n_cls = 0;
  std::size_t n_reg = 0;
  double lambda = 1.0;
};

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> grad;  // softmax - one_hot
};

/// -log softmax(logits)[label], log-sum-exp stabilized.
CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label);

std::vector<double> softmax(std::span<const double> logits);

struct SmoothL1 {
  double loss = 0.0;
  OffsetPair grad;
};

/// Sum over both coordinates of 0.5 x^2 (|x| < 1) or |x| - 0.5, x = pred - target.
SmoothL1 smooth_l1(const OffsetPair& pred, const OffsetPair& target);

struct ClsTerm {
  std::vector<double> logits;
  std::size_t label = 0;
};

struct RegTerm {
  OffsetPair pred;
  OffsetPair target;
  bool positive = false;
};

struct JointLoss {
  LossReport report;
  std::vector<std::vector<double>> cls_grads;  // d total / d logits, per term
  std::vector<OffsetPair> reg_grads;           // d total / d pred, per term (0 for negatives)
};

/// cls averaged over all terms; regression summed over positive terms only
/// and averaged over the number of positives, then weighted by lambda.
JointLoss joint_loss(std::span<const ClsTerm> cls, std::span<const RegTerm> reg, double lambda);

/// Sums the component losses of the proposal and classification subnets.
LossReport combine(const LossReport& a, const LossReport& b);

}  // namespace tdet
