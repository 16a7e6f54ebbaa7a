// SPDX-License-Identifier: Apache-2.0
#include "tdet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tdet/error.hpp"

namespace tdet {

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
  for (auto& v : p) v /= z;
  return p;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  TDET_CHECK(label < logits.size(), ErrorCode::kInvalidArgument,
             "softmax_cross_entropy: label " + std::to_string(label) + " out of range for " +
                 std::to_string(logits.size()) + " logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double log_z = m + std::log(z);
  CrossEntropy out;
  out.loss = log_z - logits[label];
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logits[i] - log_z);
  out.grad[label] -= 1.0;
  return out;
}

SmoothL1 smooth_l1(const OffsetPair& pred, const OffsetPair& target) {
  auto one = [](double x, double& g) {
    if (std::abs(x) < 1.0) {
      g = x;
      return 0.5 * x * x;
    }
    g = x > 0 ? 1.0 : -1.0;
    return std::abs(x) - 0.5;
  };
  SmoothL1 out;
  out.loss = one(pred.delta_center - target.delta_center, out.grad.delta_center) +
             one(pred.delta_log_length - target.delta_log_length, out.grad.delta_log_length);
  return out;
}

JointLoss joint_loss(std::span<const ClsTerm> cls, std::span<const RegTerm> reg, double lambda) {
  JointLoss out;
  out.report.lambda = lambda;
  out.report.n_cls = cls.size();
  out.cls_grads.resize(cls.size());
  if (!cls.empty()) {
    const double inv = 1.0 / static_cast<double>(cls.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < cls.size(); ++i) {
      auto ce = softmax_cross_entropy(cls[i].logits, cls[i].label);
      sum += ce.loss;
      for (auto& g : ce.grad) g *= inv;
      out.cls_grads[i] = std::move(ce.grad);
    }
    out.report.cls_loss = sum * inv;
  }

  const auto n_pos = static_cast<std::size_t>(
      std::count_if(reg.begin(), reg.end(), [](const RegTerm& r) { return r.positive; }));
  out.report.n_reg = n_pos;
  out.reg_grads.assign(reg.size(), OffsetPair{});
  if (n_pos > 0) {
    const double inv = 1.0 / static_cast<double>(n_pos);
    double sum = 0.0;
    for (std::size_t i = 0; i < reg.size(); ++i) {
      if (!reg[i].positive) continue;
      const auto s = smooth_l1(reg[i].pred, reg[i].target);
      sum += s.loss;
      out.reg_grads[i] = {lambda * inv * s.grad.delta_center,
                          lambda * inv * s.grad.delta_log_length};
    }
    out.report.reg_loss = sum * inv;
  }
  out.report.total = out.report.cls_loss + lambda * out.report.reg_loss;
  return out;
}

LossReport combine(const LossReport& a, const LossReport& b) {
  LossReport r;
  r.cls_loss = a.cls_loss + b.cls_loss;
  r.reg_loss = a.reg_loss + b.reg_loss;
  r.total = a.total + b.total;
  r.n_cls = a.n_cls + b.n_cls;
  r.n_reg = a.n_reg + b.n_reg;
  r.lambda = a.lambda;
  return r;
}

}  // namespace tdet
