// Copyright 2026 The RDAL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include <cmath>
#include <random>

#include "doctest.h"
#include "rdal/losses.hpp"

using namespace rdal;

TEST_CASE("uniform 12-class prediction scores ln 12") {
  nn::Tensor<double> probs = nn::Tensor<double>::vec(3, 12);
  for (auto& v : probs.data) v = 1.0 / 12.0;
  std::vector<int> labels = {0, 5, 11};
  CHECK(std::abs(loss_cls(probs, labels) - std::log(12.0)) < 1e-9);
}

TEST_CASE("uniform binary prediction scores ln 2") {
  nn::Tensor<double> probs = nn::Tensor<double>::vec(4, 1);
  for (auto& v : probs.data) v = 0.5;
  std::vector<double> targets = {1.0, 0.0, 1.0, 0.0};
  CHECK(std::abs(loss_adv(probs, targets) - std::log(2.0)) < 1e-9);
}

TEST_CASE("confident predictions score minus log of the probability") {
  nn::Tensor<double> probs = nn::Tensor<double>::vec(1, 2);
  probs.data = {0.9, 0.1};
  std::vector<int> labels = {0};
  CHECK(std::abs(loss_cls(probs, labels) - (-std::log(0.9))) < 1e-9);

  nn::Tensor<double> bp = nn::Tensor<double>::vec(1, 1);
  bp.data = {0.7};
  CHECK(std::abs(loss_adv(bp, {1.0}) - (-std::log(0.7))) < 1e-9);
  CHECK(std::abs(loss_adv(bp, {0.0}) - (-std::log(0.3))) < 1e-9);
}

TEST_CASE("probability clipping keeps the loss finite") {
  nn::Tensor<double> probs = nn::Tensor<double>::vec(1, 2);
  probs.data = {0.0, 1.0};
  const double l = loss_cls(probs, {0});
  CHECK(std::isfinite(l));
  CHECK(l == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));

  nn::Tensor<double> bp = nn::Tensor<double>::vec(1, 1);
  bp.data = {1.0};
  CHECK(std::isfinite(loss_adv(bp, {0.0})));
}

TEST_CASE("loss shape violations throw") {
  nn::Tensor<double> probs = nn::Tensor<double>::vec(2, 3);
  CHECK_THROWS_AS(loss_cls(probs, {0}), ShapeError);
  CHECK_THROWS_AS(loss_cls(probs, {0, 3}), ShapeError);
  nn::Tensor<double> bp = nn::Tensor<double>::vec(2, 2);
  CHECK_THROWS_AS(loss_adv(bp, {0.0, 1.0}), ShapeError);
}

TEST_CASE("softmax rows sum to one and ignore shifts") {
  nn::Tensor<float> logits = nn::Tensor<float>::vec(2, 5);
  logits.data = {1.0f, 2.0f, 3.0f, -1.0f, 0.5f,
                 100.0f, 101.0f, 99.0f, 100.5f, 98.0f};
  nn::Tensor<float> p = softmax(logits);
  for (int i = 0; i < 2; ++i) {
    double sum = 0.0;
    for (int k = 0; k < 5; ++k) sum += p.data[std::size_t(i) * 5 + k];
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
  nn::Tensor<float> shifted = logits;
  for (int k = 0; k < 5; ++k) shifted.data[k] += 10.0f;
  nn::Tensor<float> p2 = softmax(shifted);
  for (int k = 0; k < 5; ++k)
    CHECK(p2.data[k] == doctest::Approx(p.data[k]).epsilon(1e-5));
}

TEST_CASE("fused cross entropy agrees with the probability form") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  nn::Tensor<double> logits = nn::Tensor<double>::vec(6, 4);
  for (auto& v : logits.data) v = u(rng);
  std::vector<int> labels = {0, 1, 2, 3, 1, 2};
  nn::Tensor<double> probs;
  const double fused = softmax_ce_with_logits<double>(logits, labels, &probs,
                                                      nullptr);
  CHECK(std::abs(fused - loss_cls(probs, labels)) < 1e-9);
}

TEST_CASE("fused binary cross entropy agrees with the probability form") {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  nn::Tensor<double> logits = nn::Tensor<double>::vec(8, 1);
  for (auto& v : logits.data) v = u(rng);
  std::vector<double> targets = {1, 0, 1, 0, 1, 0, 1, 0};
  nn::Tensor<double> probs;
  const double fused = bce_with_logits<double>(logits, targets, &probs,
                                               nullptr);
  CHECK(std::abs(fused - loss_adv(probs, targets)) < 1e-9);
}

TEST_CASE("fused binary cross entropy stays finite at extreme logits") {
  nn::Tensor<double> logits = nn::Tensor<double>::vec(2, 1);
  logits.data = {500.0, -500.0};
  std::vector<double> targets = {0.0, 1.0};
  const double l = bce_with_logits<double>(logits, targets, nullptr, nullptr);
  CHECK(std::isfinite(l));
  CHECK(l == doctest::Approx(500.0).epsilon(1e-9));
}

TEST_CASE("cross entropy gradient matches finite differences") {
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  nn::Tensor<double> logits = nn::Tensor<double>::vec(5, 3);
  for (auto& v : logits.data) v = u(rng);
  std::vector<int> labels = {0, 2, 1, 1, 0};
  nn::Tensor<double> grad;
  softmax_ce_with_logits<double>(logits, labels, nullptr, &grad);
  const double step = 1e-6;
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    nn::Tensor<double> lp = logits, lm = logits;
    lp.data[i] += step;
    lm.data[i] -= step;
    const double fd = (softmax_ce_with_logits<double>(lp, labels) -
                       softmax_ce_with_logits<double>(lm, labels)) /
                      (2.0 * step);
    CHECK(std::abs(fd - grad.data[i]) < 1e-7);
  }
}

TEST_CASE("binary cross entropy gradient matches finite differences") {
  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  nn::Tensor<double> logits = nn::Tensor<double>::vec(6, 1);
  for (auto& v : logits.data) v = u(rng);
  std::vector<double> targets = {1, 0, 0, 1, 1, 0};
  nn::Tensor<double> grad;
  bce_with_logits<double>(logits, targets, nullptr, &grad);
  const double step = 1e-6;
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    nn::Tensor<double> lp = logits, lm = logits;
    lp.data[i] += step;
    lm.data[i] -= step;
    const double fd = (bce_with_logits<double>(lp, targets) -
                       bce_with_logits<double>(lm, targets)) /
                      (2.0 * step);
    CHECK(std::abs(fd - grad.data[i]) < 1e-7);
  }
}
