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

#ifndef RDAL_MODELS_HPP_
#define RDAL_MODELS_HPP_

#include <algorithm>
#include <array>
#include <memory>
#include <random>
#include <utility>

#include "rdal/features.hpp"
#include "rdal/losses.hpp"
#include "rdal/nn/layers.hpp"

namespace rdal {

constexpr int kLatentDim = 64;
constexpr std::array<int, 4> kFullConvWidths = {64, 128, 256, 512};
constexpr double kLeakySlope = 0.01;

// -- Gradient reversal ---------------------------------------------------------

// Identity on the forward pass.
template <typename S>
nn::Tensor<S> grl_forward(const nn::Tensor<S>& x) {
  return x;
}

// Scales the upstream gradient by -lambda on the way down.
template <typename S>
nn::Tensor<S> grl_backward(const nn::Tensor<S>& grad, double lambda) {
  if (lambda < 0.0) throw Error("grl_backward: lambda must be >= 0");
  nn::Tensor<S> out = grad;
  for (auto& v : out.data) v *= S(-lambda);
  return out;
}

// -- Network builders ----------------------------------------------------------

// Feature extractor F: four 3x3 conv blocks (conv + batch norm + ReLU) with
// 2x2 max pooling after the first three, global max pooling after the
// fourth, then a linear map to the 64-dimensional latent.
template <typename S>
std::unique_ptr<nn::Sequential<S>> build_feature_extractor(
    const std::array<int, 4>& widths, std::mt19937_64* rng) {
  auto net = std::make_unique<nn::Sequential<S>>();
  int in_ch = 1;
  for (int b = 0; b < 4; ++b) {
    const std::string blk = "block" + std::to_string(b + 1);
    net->add(blk + ".conv",
             std::make_unique<nn::Conv2d<S>>(blk, in_ch, widths[b], rng));
    net->add(blk + ".bn", std::make_unique<nn::BatchNorm2d<S>>(blk, widths[b]));
    net->add(blk + ".relu", std::make_unique<nn::ReLU<S>>());
    if (b < 3) net->add(blk + ".pool", std::make_unique<nn::MaxPool2d<S>>());
    in_ch = widths[b];
  }
  net->add("gpool", std::make_unique<nn::GlobalMaxPool<S>>());
  net->add("fc", std::make_unique<nn::Linear<S>>("F.fc", widths[3], kLatentDim,
                                                 rng));
  return net;
}

// Event classifier C: one linear layer producing Y logits (softmax applied
// by forward_event or the fused training loss).
template <typename S>
std::unique_ptr<nn::Sequential<S>> build_event_classifier(
    int num_classes, std::mt19937_64* rng) {
  auto net = std::make_unique<nn::Sequential<S>>();
  net->add("fc", std::make_unique<nn::Linear<S>>("C.fc", kLatentDim,
                                                 num_classes, rng));
  return net;
}

// Speech classifier D (also D^tau and the attacker): 64 -> 48 -> 32 -> 16
// with LeakyReLU, then a single logit (sigmoid applied by forward_speech or
// the fused training loss).
template <typename S>
std::unique_ptr<nn::Sequential<S>> build_speech_classifier(
    std::mt19937_64* rng) {
  auto net = std::make_unique<nn::Sequential<S>>();
  const std::array<int, 4> dims = {kLatentDim, 48, 32, 16};
  for (int i = 0; i < 3; ++i) {
    const std::string name = "fc" + std::to_string(i + 1);
    net->add(name, std::make_unique<nn::Linear<S>>(name, dims[i], dims[i + 1],
                                                   rng));
    net->add("lrelu" + std::to_string(i + 1),
             std::make_unique<nn::LeakyReLU<S>>(kLeakySlope));
  }
  net->add("fc4", std::make_unique<nn::Linear<S>>("fc4", 16, 1, rng));
  return net;
}

// -- Inference helpers ----------------------------------------------------------

// y_hat = softmax(C(F(x))); x is (n, 1, bands, frames).
template <typename S>
nn::Tensor<S> forward_event(nn::Module<S>& f, nn::Module<S>& c,
                            const nn::Tensor<S>& x, bool train = false) {
  return softmax(c.forward(f.forward(x, train), train));
}

// s_hat = sigmoid(D(z)); z is (n, 64).
template <typename S>
nn::Tensor<S> forward_speech(nn::Module<S>& d, const nn::Tensor<S>& z,
                             bool train = false) {
  nn::Tensor<S> logit = d.forward(z, train);
  for (auto& v : logit.data) v = sigmoid(v);
  return logit;
}

// -- Masking front-end -----------------------------------------------------------

// Three-level U-shaped encoder-decoder over the magnitude spectrogram.
// Produces a sigmoid mask and returns mask (x) input. Skip connections
// concatenate [upsampled, encoder] along channels.
template <typename S>
class MaskNet : public nn::Module<S> {
 public:
  using Tensor = nn::Tensor<S>;

  MaskNet(int base, int in_h, int in_w, std::mt19937_64* rng)
      : base_(base), in_h_(in_h), in_w_(in_w),
        conv1_("M.enc1", 1, base, rng), bn1_("M.enc1", base),
        conv2_("M.enc2", base, 2 * base, rng), bn2_("M.enc2", 2 * base),
        conv3_("M.bott", 2 * base, 4 * base, rng), bn3_("M.bott", 4 * base),
        up2_(in_h / 2, in_w / 2),
        conv4_("M.dec2", 6 * base, 2 * base, rng), bn4_("M.dec2", 2 * base),
        up1_(in_h, in_w),
        conv5_("M.dec1", 3 * base, base, rng), bn5_("M.dec1", base),
        head_("M.head", base, 1, rng) {
    if (in_h / 4 < 1 || in_w / 4 < 1)
      throw ShapeError("MaskNet: input too small for three levels");
    // Identity start: zeroed head weights and a positive bias open the mask
    // to roughly all-ones, so pre-training only has to learn where to
    // attenuate. A mask initialized near 0.5 instead races every gate open
    // and saturates before the suppression signal can act.
    std::vector<nn::NamedParam<S>> head_params;
    head_.collect("head", &head_params);
    for (const auto& p : head_params) {
      const S v = p.name == "head.bias" ? S(4) : S(0);
      std::fill(p.value->begin(), p.value->end(), v);
    }
  }

  Tensor forward(const Tensor& x, bool train) override {
    x.require_shape(x.n, 1, in_h_, in_w_, "MaskNet");
    input_ = x;
    a1_ = relu1_.forward(bn1_.forward(conv1_.forward(x, train), train), train);
    Tensor p1 = pool1_.forward(a1_, train);
    a2_ = relu2_.forward(bn2_.forward(conv2_.forward(p1, train), train), train);
    Tensor p2 = pool2_.forward(a2_, train);
    Tensor b = relu3_.forward(bn3_.forward(conv3_.forward(p2, train), train),
                              train);
    Tensor u2 = up2_.forward(b, train);
    Tensor d2 = relu4_.forward(
        bn4_.forward(conv4_.forward(concat(u2, a2_), train), train), train);
    Tensor u1 = up1_.forward(d2, train);
    Tensor d1 = relu5_.forward(
        bn5_.forward(conv5_.forward(concat(u1, a1_), train), train), train);
    mask_ = sig_.forward(head_.forward(d1, train), train);
    Tensor y = x;
    for (std::size_t i = 0; i < y.data.size(); ++i)
      y.data[i] *= mask_.data[i];
    return y;
  }

  Tensor backward(const Tensor& g) override {
    g.require_shape(input_.n, 1, in_h_, in_w_, "MaskNet");
    Tensor gmask = g;
    Tensor gx = g;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      gmask.data[i] = g.data[i] * input_.data[i];
      gx.data[i] = g.data[i] * mask_.data[i];
    }
    Tensor gd1 = head_.backward(sig_.backward(gmask));
    Tensor gc1 = conv5_.backward(bn5_.backward(relu5_.backward(gd1)));
    auto [gu1, ga1_skip] = split(gc1, 2 * base_);
    Tensor gd2 = up1_.backward(gu1);
    Tensor gc2 = conv4_.backward(bn4_.backward(relu4_.backward(gd2)));
    auto [gu2, ga2_skip] = split(gc2, 4 * base_);
    Tensor gb = up2_.backward(gu2);
    Tensor gp2 = conv3_.backward(bn3_.backward(relu3_.backward(gb)));
    Tensor ga2 = pool2_.backward(gp2);
    add_in_place(&ga2, ga2_skip);
    Tensor gp1 = conv2_.backward(bn2_.backward(relu2_.backward(ga2)));
    Tensor ga1 = pool1_.backward(gp1);
    add_in_place(&ga1, ga1_skip);
    Tensor gx_net = conv1_.backward(bn1_.backward(relu1_.backward(ga1)));
    add_in_place(&gx, gx_net);
    return gx;
  }

  void collect(const std::string& prefix,
               std::vector<nn::NamedParam<S>>* out) override {
    conv1_.collect(prefix + ".enc1.conv", out);
    bn1_.collect(prefix + ".enc1.bn", out);
    conv2_.collect(prefix + ".enc2.conv", out);
    bn2_.collect(prefix + ".enc2.bn", out);
    conv3_.collect(prefix + ".bott.conv", out);
    bn3_.collect(prefix + ".bott.bn", out);
    conv4_.collect(prefix + ".dec2.conv", out);
    bn4_.collect(prefix + ".dec2.bn", out);
    conv5_.collect(prefix + ".dec1.conv", out);
    bn5_.collect(prefix + ".dec1.bn", out);
    head_.collect(prefix + ".head", out);
  }

  // Mask produced by the most recent forward.
  const nn::Tensor<S>& last_mask() const { return mask_; }

 private:
  static Tensor concat(const Tensor& a, const Tensor& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
      throw ShapeError("MaskNet: concat shape mismatch");
    Tensor out(a.n, a.c + b.c, a.h, a.w);
    const std::size_t hw = std::size_t(a.h) * a.w;
    for (int s = 0; s < a.n; ++s) {
      std::copy_n(&a.data[std::size_t(s) * a.c * hw], a.c * hw,
                  &out.data[std::size_t(s) * out.c * hw]);
      std::copy_n(&b.data[std::size_t(s) * b.c * hw], b.c * hw,
                  &out.data[std::size_t(s) * out.c * hw + a.c * hw]);
    }
    return out;
  }

  static std::pair<Tensor, Tensor> split(const Tensor& g, int first_ch) {
    Tensor a(g.n, first_ch, g.h, g.w);
    Tensor b(g.n, g.c - first_ch, g.h, g.w);
    const std::size_t hw = std::size_t(g.h) * g.w;
    for (int s = 0; s < g.n; ++s) {
      std::copy_n(&g.data[std::size_t(s) * g.c * hw], first_ch * hw,
                  &a.data[std::size_t(s) * a.c * hw]);
      std::copy_n(&g.data[std::size_t(s) * g.c * hw + first_ch * hw],
                  (g.c - first_ch) * hw, &b.data[std::size_t(s) * b.c * hw]);
    }
    return {std::move(a), std::move(b)};
  }

  static void add_in_place(Tensor* a, const Tensor& b) {
    if (!a->same_shape(b)) throw ShapeError("MaskNet: gradient shape");
    for (std::size_t i = 0; i < a->data.size(); ++i) a->data[i] += b.data[i];
  }

  int base_, in_h_, in_w_;
  nn::Conv2d<S> conv1_;
  nn::BatchNorm2d<S> bn1_;
  nn::ReLU<S> relu1_;
  nn::MaxPool2d<S> pool1_;
  nn::Conv2d<S> conv2_;
  nn::BatchNorm2d<S> bn2_;
  nn::ReLU<S> relu2_;
  nn::MaxPool2d<S> pool2_;
  nn::Conv2d<S> conv3_;
  nn::BatchNorm2d<S> bn3_;
  nn::ReLU<S> relu3_;
  nn::UpsampleToShape<S> up2_;
  nn::Conv2d<S> conv4_;
  nn::BatchNorm2d<S> bn4_;
  nn::ReLU<S> relu4_;
  nn::UpsampleToShape<S> up1_;
  nn::Conv2d<S> conv5_;
  nn::BatchNorm2d<S> bn5_;
  nn::ReLU<S> relu5_;
  nn::Conv2d<S> head_;
  nn::Sigmoid<S> sig_;
  nn::Tensor<S> input_, mask_, a1_, a2_;
};

// -- Feature plumbing -----------------------------------------------------------

// (1, 1, rows, cols) tensor view of a feature matrix.
nn::Tensor<float> to_tensor(const FeatureMatrix& m);
FeatureMatrix to_feature(const nn::Tensor<float>& t);

// Runs the frozen mask network in eval mode on one spectrogram.
MagnitudeSpectrogram mask_apply(const MagnitudeSpectrogram& spec,
                                MaskNet<float>* net);

}  // namespace rdal

#endif  // RDAL_MODELS_HPP_
