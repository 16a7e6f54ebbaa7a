// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "tdet/loss.hpp"

using namespace tdet;

TEST_CASE("softmax cross entropy values") {
  const std::vector<double> zero{0, 0};
  CHECK(softmax_cross_entropy(zero, 0).loss == doctest::Approx(std::log(2.0)));
  const std::vector<double> big{1000, 0};
  const auto ce = softmax_cross_entropy(big, 0);
  CHECK(std::isfinite(ce.loss));
  CHECK(ce.loss == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(softmax_cross_entropy(big, 1).loss == doctest::Approx(1000.0));
  CHECK_THROWS_AS(softmax_cross_entropy(zero, 2), Error);
  const auto p = softmax(std::vector<double>{0, 0, 0, 0});
  for (double v : p) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("smooth L1 branches") {
  CHECK(smooth_l1({0.3, -0.2}, {0.3, -0.2}).loss == 0.0);
  CHECK(smooth_l1({0.5, 0}, {0, 0}).loss == doctest::Approx(0.125));
  CHECK(smooth_l1({2, 0}, {0, 0}).loss == doctest::Approx(1.5));
  CHECK(smooth_l1({-2, 0}, {0, 0}).grad.delta_center == -1.0);
  CHECK(smooth_l1({0.5, 0}, {0, 0}).grad.delta_center == doctest::Approx(0.5));
}

TEST_CASE("joint loss normalisation and gating") {
  std::vector<ClsTerm> cls{{{0, 0}, 1}, {{0, 0}, 0}};
  std::vector<RegTerm> reg{{{0.5, 0}, {0, 0}, true}, {{9, 9}, {0, 0}, false}};
  const auto j = joint_loss(cls, reg, 1.0);
  CHECK(j.report.cls_loss == doctest::Approx(std::log(2.0)));
  CHECK(j.report.reg_loss == doctest::Approx(0.125));
  CHECK(j.report.total == doctest::Approx(std::log(2.0) + 0.125));
  CHECK(j.report.n_cls == 2);
  CHECK(j.report.n_reg == 1);
  CHECK(j.reg_grads[1] == OffsetPair{0, 0});

  const auto zero_lambda = joint_loss(cls, reg, 0.0);
  CHECK(zero_lambda.report.total == zero_lambda.report.cls_loss);

  // Negatives' regression inputs never matter.
  reg[1].pred = {-40, 17};
  CHECK(joint_loss(cls, reg, 1.0).report.total == j.report.total);

  std::vector<ClsTerm> exact{{{-50, 50}, 1}};
  std::vector<RegTerm> exact_reg{{{0.2, 0.1}, {0.2, 0.1}, true}};
  const auto e = joint_loss(exact, exact_reg, 1.0);
  CHECK(e.report.reg_loss == 0.0);
  CHECK(e.report.total == e.report.cls_loss);
}

TEST_CASE("joint loss with no positives has zero regression term") {
  std::vector<ClsTerm> cls{{{1, 2}, 0}};
  std::vector<RegTerm> reg{{{1, 1}, {0, 0}, false}};
  const auto j = joint_loss(cls, reg, 1.0);
  CHECK(j.report.reg_loss == 0.0);
  CHECK(j.report.n_reg == 0);
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(8);
  CHECK(gradcheck::softmax_cross_entropy_error(rng) < 1e-5);
  CHECK(gradcheck::smooth_l1_error(rng) < 1e-4);
  CHECK(gradcheck::joint_loss_error(rng) < 1e-4);
}
