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

#ifndef RDAL_LOSSES_HPP_
#define RDAL_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "rdal/nn/tensor.hpp"

namespace rdal {

constexpr double kProbClip = 1e-7;

// -- Probability-space losses (reporting) -------------------------------------

// Mean categorical cross entropy over the batch; probs is (n, Y), one row
// per example, labels are 0-based class indices. Probabilities are clipped
// to [kProbClip, 1 - kProbClip] before the log.
template <typename S>
double loss_cls(const nn::Tensor<S>& probs, const std::vector<int>& labels) {
  if (probs.n != int(labels.size()) || probs.h != 1 || probs.w != 1)
    throw ShapeError("loss_cls: probs must be (n, classes)");
  double total = 0.0;
  for (int i = 0; i < probs.n; ++i) {
    if (labels[i] < 0 || labels[i] >= probs.c)
      throw ShapeError("loss_cls: label out of range");
    const double p = std::clamp(double(probs.at(i, labels[i], 0, 0)),
                                kProbClip, 1.0 - kProbClip);
    total -= std::log(p);
  }
  return total / probs.n;
}

// Mean binary cross entropy; probs is (n, 1), targets in {0, 1}.
template <typename S>
double loss_adv(const nn::Tensor<S>& probs, const std::vector<S>& targets) {
  if (probs.n != int(targets.size()) || probs.features() != 1)
    throw ShapeError("loss_adv: probs must be (n, 1)");
  double total = 0.0;
  for (int i = 0; i < probs.n; ++i) {
    const double p =
        std::clamp(double(probs.data[i]), kProbClip, 1.0 - kProbClip);
    const double t = double(targets[i]);
    total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return total / probs.n;
}

// -- Logit-space losses (training) ---------------------------------------------

template <typename S>
nn::Tensor<S> softmax(const nn::Tensor<S>& logits) {
  nn::Tensor<S> probs = logits;
  for (int i = 0; i < logits.n; ++i) {
    S* row = &probs.data[std::size_t(i) * logits.c];
    S mx = row[0];
    for (int k = 1; k < logits.c; ++k) mx = std::max(mx, row[k]);
    double denom = 0.0;
    for (int k = 0; k < logits.c; ++k) denom += std::exp(double(row[k] - mx));
    for (int k = 0; k < logits.c; ++k)
      row[k] = S(std::exp(double(row[k] - mx)) / denom);
  }
  return probs;
}

// Fused softmax cross entropy. Returns the mean loss; optionally emits the
// softmax probabilities and the gradient with respect to the logits
// ((softmax - onehot) / n).
template <typename S>
double softmax_ce_with_logits(const nn::Tensor<S>& logits,
                              const std::vector<int>& labels,
                              nn::Tensor<S>* probs_out = nullptr,
                              nn::Tensor<S>* grad_out = nullptr) {
  if (logits.n != int(labels.size()) || logits.h != 1 || logits.w != 1)
    throw ShapeError("softmax_ce_with_logits: logits must be (n, classes)");
  nn::Tensor<S> probs = softmax(logits);
  double total = 0.0;
  for (int i = 0; i < logits.n; ++i) {
    if (labels[i] < 0 || labels[i] >= logits.c)
      throw ShapeError("softmax_ce_with_logits: label out of range");
    // log-sum-exp form keeps the loss exact even when the prob underflows
    const S* row = &logits.data[std::size_t(i) * logits.c];
    S mx = row[0];
    for (int k = 1; k < logits.c; ++k) mx = std::max(mx, row[k]);
    double denom = 0.0;
    for (int k = 0; k < logits.c; ++k) denom += std::exp(double(row[k] - mx));
    total += std::log(denom) - double(row[labels[i]] - mx);
  }
  if (grad_out) {
    *grad_out = probs;
    for (int i = 0; i < logits.n; ++i) {
      grad_out->data[std::size_t(i) * logits.c + labels[i]] -= S(1);
      for (int k = 0; k < logits.c; ++k)
        grad_out->data[std::size_t(i) * logits.c + k] /= S(logits.n);
    }
  }
  if (probs_out) *probs_out = std::move(probs);
  return total / logits.n;
}

template <typename S>
S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

// Fused sigmoid binary cross entropy on (n, 1) logits; gradient is
// (sigmoid(logit) - target) / n.
template <typename S>
double bce_with_logits(const nn::Tensor<S>& logits,
                       const std::vector<S>& targets,
                       nn::Tensor<S>* probs_out = nullptr,
                       nn::Tensor<S>* grad_out = nullptr) {
  if (logits.n != int(targets.size()) || logits.features() != 1)
    throw ShapeError("bce_with_logits: logits must be (n, 1)");
  nn::Tensor<S> probs = logits;
  double total = 0.0;
  for (int i = 0; i < logits.n; ++i) {
    const double z = double(logits.data[i]);
    const double t = double(targets[i]);
    // max(z,0) - z*t + log(1 + exp(-|z|)) is the stable form.
    total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    probs.data[i] = sigmoid(S(z));
  }
  if (grad_out) {
    *grad_out = probs;
    for (int i = 0; i < logits.n; ++i)
      grad_out->data[i] = (probs.data[i] - targets[i]) / S(logits.n);
  }
  if (probs_out) *probs_out = std::move(probs);
  return total / logits.n;
}

}  // namespace rdal

#endif  // RDAL_LOSSES_HPP_
