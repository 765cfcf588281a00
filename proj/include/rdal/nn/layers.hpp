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

#ifndef RDAL_NN_LAYERS_HPP_
#define RDAL_NN_LAYERS_HPP_

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rdal/nn/tensor.hpp"

namespace rdal::nn {

// Parameter or buffer exposed for the optimizer and checkpointing. Buffers
// (batch-norm running statistics) carry grad == nullptr.
template <typename S>
struct NamedParam {
  std::string name;
  std::vector<S>* value;
  std::vector<S>* grad;
};

// forward caches whatever backward needs; backward consumes the most recent
// forward, accumulates into parameter grads, and returns the input gradient.
template <typename S>
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor<S> forward(const Tensor<S>& x, bool train) = 0;
  virtual Tensor<S> backward(const Tensor<S>& grad_out) = 0;
  virtual void collect(const std::string& prefix,
                       std::vector<NamedParam<S>>* out) {
    (void)prefix;
    (void)out;
  }
};

namespace detail {

// Kaiming-uniform: weights and biases from U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
template <typename S>
void kaiming_fill(std::vector<S>* v, int fan_in, std::mt19937_64* rng) {
  const double bound = 1.0 / std::sqrt(double(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& x : *v) x = S(u(*rng));
}

template <typename S>
using MatRM =
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatCM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace detail

// 3x3 convolution, stride 1, same padding, via per-sample im2col and GEMM.
template <typename S>
class Conv2d : public Module<S> {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, std::mt19937_64* rng)
      : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch),
        weight_(std::size_t(out_ch) * in_ch * 9),
        bias_(out_ch),
        grad_weight_(weight_.size(), S(0)),
        grad_bias_(out_ch, S(0)) {
    detail::kaiming_fill(&weight_, in_ch * 9, rng);
    detail::kaiming_fill(&bias_, in_ch * 9, rng);
  }

  Tensor<S> forward(const Tensor<S>& x, bool train) override {
    (void)train;
    if (x.c != in_ch_) throw ShapeError(name_ + ": channel mismatch");
    input_ = x;
    Tensor<S> y(x.n, out_ch_, x.h, x.w);
    const int hw = x.h * x.w;
    detail::MatRM<S> col(std::size_t(in_ch_) * 9, hw);
    Eigen::Map<const detail::MatRM<S>> w(weight_.data(), out_ch_,
                                         std::size_t(in_ch_) * 9);
    for (int s = 0; s < x.n; ++s) {
      im2col(x, s, &col);
      detail::MatCM<S> out = w * col;
      for (int oc = 0; oc < out_ch_; ++oc) {
        S* dst = &y.at(s, oc, 0, 0);
        const S b = bias_[oc];
        for (int i = 0; i < hw; ++i) dst[i] = out(oc, i) + b;
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    const Tensor<S>& x = input_;
    g.require_shape(x.n, out_ch_, x.h, x.w, name_.c_str());
    Tensor<S> gx(x.n, x.c, x.h, x.w);
    const int hw = x.h * x.w;
    detail::MatRM<S> col(std::size_t(in_ch_) * 9, hw);
    Eigen::Map<const detail::MatRM<S>> w(weight_.data(), out_ch_,
                                         std::size_t(in_ch_) * 9);
    Eigen::Map<detail::MatRM<S>> gw(grad_weight_.data(), out_ch_,
                                    std::size_t(in_ch_) * 9);
    for (int s = 0; s < x.n; ++s) {
      im2col(x, s, &col);
      Eigen::Map<const detail::MatRM<S>> go(&g.at(s, 0, 0, 0), out_ch_, hw);
      gw.noalias() += go * col.transpose();
      // Explicit accumulation keeps the order fixed; Eigen's redux would
      // split at an address-dependent alignment boundary.
      for (int oc = 0; oc < out_ch_; ++oc) {
        const S* gp = &g.at(s, oc, 0, 0);
        S acc = S(0);
        for (int i = 0; i < hw; ++i) acc += gp[i];
        grad_bias_[oc] += acc;
      }
      detail::MatRM<S> gcol = w.transpose() * go;
      col2im(gcol, s, &gx);
    }
    return gx;
  }

  void collect(const std::string& prefix,
               std::vector<NamedParam<S>>* out) override {
    out->push_back({prefix + ".weight", &weight_, &grad_weight_});
    out->push_back({prefix + ".bias", &bias_, &grad_bias_});
  }

 private:
  void im2col(const Tensor<S>& x, int s, detail::MatRM<S>* col) const {
    const int H = x.h, W = x.w;
    for (int ic = 0; ic < in_ch_; ++ic) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int row = (ic * 3 + ky) * 3 + kx;
          for (int oh = 0; oh < H; ++oh) {
            const int ih = oh + ky - 1;
            S* dst = &(*col)(row, oh * W);
            if (ih < 0 || ih >= H) {
              for (int ow = 0; ow < W; ++ow) dst[ow] = S(0);
              continue;
            }
            const S* src = &x.at(s, ic, ih, 0);
            for (int ow = 0; ow < W; ++ow) {
              const int iw = ow + kx - 1;
              dst[ow] = (iw < 0 || iw >= W) ? S(0) : src[iw];
            }
          }
        }
      }
    }
  }

  void col2im(const detail::MatRM<S>& gcol, int s, Tensor<S>* gx) const {
    const int H = gx->h, W = gx->w;
    for (int ic = 0; ic < in_ch_; ++ic) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int row = (ic * 3 + ky) * 3 + kx;
          for (int oh = 0; oh < H; ++oh) {
            const int ih = oh + ky - 1;
            if (ih < 0 || ih >= H) continue;
            S* dst = &gx->at(s, ic, ih, 0);
            const S* src = &gcol(row, oh * W);
            for (int ow = 0; ow < W; ++ow) {
              const int iw = ow + kx - 1;
              if (iw >= 0 && iw < W) dst[iw] += src[ow];
            }
          }
        }
      }
    }
  }

  std::string name_;
  int in_ch_, out_ch_;
  std::vector<S> weight_, bias_, grad_weight_, grad_bias_;
  Tensor<S> input_;
};

// Batch normalization over (n, h, w) per channel; eps 1e-5, momentum 0.1,
// population variance both for normalization and for the running buffer.
template <typename S>
class BatchNorm2d : public Module<S> {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  explicit BatchNorm2d(std::string name, int ch)
      : name_(std::move(name)), ch_(ch), gamma_(ch, S(1)), beta_(ch, S(0)),
        grad_gamma_(ch, S(0)), grad_beta_(ch, S(0)), running_mean_(ch, S(0)),
        running_var_(ch, S(1)) {}

  Tensor<S> forward(const Tensor<S>& x, bool train) override {
    if (x.c != ch_) throw ShapeError(name_ + ": channel mismatch");
    train_ = train;
    input_ = x;
    xhat_ = Tensor<S>(x.n, x.c, x.h, x.w);
    inv_std_.assign(ch_, S(0));
    Tensor<S> y(x.n, x.c, x.h, x.w);
    const int hw = x.h * x.w;
    const std::size_t m = std::size_t(x.n) * hw;
    if (train && m < 2)
      throw Error(name_ + ": batch statistics need more than one value");

    for (int c = 0; c < ch_; ++c) {
      double mean, var;
      if (train) {
        double sum = 0.0;
        for (int s = 0; s < x.n; ++s) {
          const S* p = &x.at(s, c, 0, 0);
          for (int i = 0; i < hw; ++i) sum += double(p[i]);
        }
        mean = sum / double(m);
        double ss = 0.0;
        for (int s = 0; s < x.n; ++s) {
          const S* p = &x.at(s, c, 0, 0);
          for (int i = 0; i < hw; ++i) {
            const double d = double(p[i]) - mean;
            ss += d * d;
          }
        }
        var = ss / double(m);
        running_mean_[c] =
            S((1.0 - kMomentum) * double(running_mean_[c]) + kMomentum * mean);
        running_var_[c] =
            S((1.0 - kMomentum) * double(running_var_[c]) + kMomentum * var);
      } else {
        mean = double(running_mean_[c]);
        var = double(running_var_[c]);
      }
      const double inv = 1.0 / std::sqrt(var + kEps);
      inv_std_[c] = S(inv);
      const double g = double(gamma_[c]), b = double(beta_[c]);
      for (int s = 0; s < x.n; ++s) {
        const S* p = &x.at(s, c, 0, 0);
        S* ph = &xhat_.at(s, c, 0, 0);
        S* py = &y.at(s, c, 0, 0);
        for (int i = 0; i < hw; ++i) {
          const double h = (double(p[i]) - mean) * inv;
          ph[i] = S(h);
          py[i] = S(g * h + b);
        }
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    const Tensor<S>& x = input_;
    g.require_shape(x.n, x.c, x.h, x.w, name_.c_str());
    Tensor<S> gx(x.n, x.c, x.h, x.w);
    const int hw = x.h * x.w;
    const double m = double(std::size_t(x.n) * hw);

    for (int c = 0; c < ch_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int s = 0; s < x.n; ++s) {
        const S* pg = &g.at(s, c, 0, 0);
        const S* ph = &xhat_.at(s, c, 0, 0);
        for (int i = 0; i < hw; ++i) {
          sum_dy += double(pg[i]);
          sum_dy_xhat += double(pg[i]) * double(ph[i]);
        }
      }
      grad_beta_[c] += S(sum_dy);
      grad_gamma_[c] += S(sum_dy_xhat);
      const double gam = double(gamma_[c]);
      const double inv = double(inv_std_[c]);
      for (int s = 0; s < x.n; ++s) {
        const S* pg = &g.at(s, c, 0, 0);
        const S* ph = &xhat_.at(s, c, 0, 0);
        S* px = &gx.at(s, c, 0, 0);
        for (int i = 0; i < hw; ++i) {
          if (train_) {
            px[i] = S(gam * inv *
                      (double(pg[i]) - sum_dy / m -
                       double(ph[i]) * sum_dy_xhat / m));
          } else {
            px[i] = S(gam * inv * double(pg[i]));
          }
        }
      }
    }
    return gx;
  }

  void collect(const std::string& prefix,
               std::vector<NamedParam<S>>* out) override {
    out->push_back({prefix + ".gamma", &gamma_, &grad_gamma_});
    out->push_back({prefix + ".beta", &beta_, &grad_beta_});
    out->push_back({prefix + ".running_mean", &running_mean_, nullptr});
    out->push_back({prefix + ".running_var", &running_var_, nullptr});
  }

 private:
  std::string name_;
  int ch_;
  bool train_ = true;
  std::vector<S> gamma_, beta_, grad_gamma_, grad_beta_;
  std::vector<S> running_mean_, running_var_;
  std::vector<S> inv_std_;
  Tensor<S> input_, xhat_;
};

template <typename S>
class LeakyReLU : public Module<S> {
 public:
  explicit LeakyReLU(double slope = 0.0) : slope_(S(slope)) {}

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    input_ = x;
    Tensor<S> y = x;
    for (auto& v : y.data)
      if (v < S(0)) v *= slope_;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    if (!g.same_shape(input_)) throw ShapeError("relu: gradient shape");
    Tensor<S> gx = g;
    for (std::size_t i = 0; i < gx.data.size(); ++i)
      if (input_.data[i] < S(0)) gx.data[i] *= slope_;
    return gx;
  }

 private:
  S slope_;
  Tensor<S> input_;
};

template <typename S>
class ReLU : public LeakyReLU<S> {
 public:
  ReLU() : LeakyReLU<S>(0.0) {}
};

template <typename S>
class Sigmoid : public Module<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x, bool) override {
    output_ = x;
    for (auto& v : output_.data) v = S(1) / (S(1) + std::exp(-v));
    return output_;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    if (!g.same_shape(output_)) throw ShapeError("sigmoid: gradient shape");
    Tensor<S> gx = g;
    for (std::size_t i = 0; i < gx.data.size(); ++i)
      gx.data[i] *= output_.data[i] * (S(1) - output_.data[i]);
    return gx;
  }

 private:
  Tensor<S> output_;
};

// 2x2 max pooling, stride 2; odd trailing rows/columns are dropped.
template <typename S>
class MaxPool2d : public Module<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x, bool) override {
    in_shape_ = {x.n, x.c, x.h, x.w};
    const int oh = x.h / 2, ow = x.w / 2;
    if (oh == 0 || ow == 0) throw ShapeError("maxpool: input too small");
    Tensor<S> y(x.n, x.c, oh, ow);
    argmax_.assign(y.size(), 0);
    std::size_t o = 0;
    for (int s = 0; s < x.n; ++s) {
      for (int c = 0; c < x.c; ++c) {
        for (int i = 0; i < oh; ++i) {
          for (int j = 0; j < ow; ++j, ++o) {
            S best = x.at(s, c, 2 * i, 2 * j);
            int bh = 2 * i, bw = 2 * j;
            for (int dy = 0; dy < 2; ++dy) {
              for (int dx = 0; dx < 2; ++dx) {
                const S v = x.at(s, c, 2 * i + dy, 2 * j + dx);
                if (v > best) {
                  best = v;
                  bh = 2 * i + dy;
                  bw = 2 * j + dx;
                }
              }
            }
            y.data[o] = best;
            argmax_[o] = std::size_t(bh) * x.w + bw;
          }
        }
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    Tensor<S> gx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
    const int oh = in_shape_[2] / 2, ow = in_shape_[3] / 2;
    g.require_shape(in_shape_[0], in_shape_[1], oh, ow, "maxpool");
    std::size_t o = 0;
    for (int s = 0; s < g.n; ++s)
      for (int c = 0; c < g.c; ++c)
        for (int i = 0; i < oh * ow; ++i, ++o)
          gx.data[(std::size_t(s) * gx.c + c) * gx.h * gx.w + argmax_[o]] +=
              g.data[o];
    return gx;
  }

 private:
  std::array<int, 4> in_shape_{};
  std::vector<std::size_t> argmax_;
};

// Max over the full spatial extent; output (n, c, 1, 1).
template <typename S>
class GlobalMaxPool : public Module<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x, bool) override {
    in_shape_ = {x.n, x.c, x.h, x.w};
    Tensor<S> y(x.n, x.c, 1, 1);
    argmax_.assign(y.size(), 0);
    const int hw = x.h * x.w;
    std::size_t o = 0;
    for (int s = 0; s < x.n; ++s) {
      for (int c = 0; c < x.c; ++c, ++o) {
        const S* p = &x.at(s, c, 0, 0);
        int arg = 0;
        for (int i = 1; i < hw; ++i)
          if (p[i] > p[arg]) arg = i;
        y.data[o] = p[arg];
        argmax_[o] = std::size_t(arg);
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    g.require_shape(in_shape_[0], in_shape_[1], 1, 1, "globalmaxpool");
    Tensor<S> gx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
    const int hw = in_shape_[2] * in_shape_[3];
    std::size_t o = 0;
    for (int s = 0; s < g.n; ++s)
      for (int c = 0; c < g.c; ++c, ++o)
        gx.data[(std::size_t(s) * gx.c + c) * hw + argmax_[o]] += g.data[o];
    return gx;
  }

 private:
  std::array<int, 4> in_shape_{};
  std::vector<std::size_t> argmax_;
};

// Fully connected layer on flattened features; output (n, out, 1, 1).
template <typename S>
class Linear : public Module<S> {
 public:
  Linear(std::string name, int in, int out, std::mt19937_64* rng)
      : name_(std::move(name)), in_(in), out_(out),
        weight_(std::size_t(out) * in), bias_(out),
        grad_weight_(weight_.size(), S(0)), grad_bias_(out, S(0)) {
    detail::kaiming_fill(&weight_, in, rng);
    detail::kaiming_fill(&bias_, in, rng);
  }

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    if (x.features() != in_) throw ShapeError(name_ + ": feature mismatch");
    input_ = x;
    Tensor<S> y = Tensor<S>::vec(x.n, out_);
    Eigen::Map<const detail::MatRM<S>> xm(x.data.data(), x.n, in_);
    Eigen::Map<const detail::MatRM<S>> w(weight_.data(), out_, in_);
    Eigen::Map<detail::MatRM<S>> ym(y.data.data(), x.n, out_);
    ym.noalias() = xm * w.transpose();
    for (int s = 0; s < x.n; ++s)
      for (int o = 0; o < out_; ++o) ym(s, o) += bias_[o];
    return y;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    g.require_shape(input_.n, out_, 1, 1, name_.c_str());
    Eigen::Map<const detail::MatRM<S>> gm(g.data.data(), g.n, out_);
    Eigen::Map<const detail::MatRM<S>> xm(input_.data.data(), input_.n, in_);
    Eigen::Map<const detail::MatRM<S>> w(weight_.data(), out_, in_);
    Eigen::Map<detail::MatRM<S>> gw(grad_weight_.data(), out_, in_);
    gw.noalias() += gm.transpose() * xm;
    for (int s = 0; s < g.n; ++s)
      for (int o = 0; o < out_; ++o) grad_bias_[o] += gm(s, o);
    Tensor<S> gx(input_.n, input_.c, input_.h, input_.w);
    Eigen::Map<detail::MatRM<S>> gxm(gx.data.data(), gx.n, in_);
    gxm.noalias() = gm * w;
    return gx;
  }

  void collect(const std::string& prefix,
               std::vector<NamedParam<S>>* out) override {
    out->push_back({prefix + ".weight", &weight_, &grad_weight_});
    out->push_back({prefix + ".bias", &bias_, &grad_bias_});
  }

 private:
  std::string name_;
  int in_, out_;
  std::vector<S> weight_, bias_, grad_weight_, grad_bias_;
  Tensor<S> input_;
};

// Nearest-neighbor upsample to an explicit spatial target; source pixels are
// replicated 2x with the last row/column repeated for odd targets.
template <typename S>
class UpsampleToShape : public Module<S> {
 public:
  UpsampleToShape(int target_h, int target_w)
      : th_(target_h), tw_(target_w) {}

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    in_shape_ = {x.n, x.c, x.h, x.w};
    Tensor<S> y(x.n, x.c, th_, tw_);
    for (int s = 0; s < x.n; ++s)
      for (int c = 0; c < x.c; ++c)
        for (int i = 0; i < th_; ++i) {
          const int si = std::min(i / 2, x.h - 1);
          for (int j = 0; j < tw_; ++j)
            y.at(s, c, i, j) = x.at(s, c, si, std::min(j / 2, x.w - 1));
        }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    g.require_shape(in_shape_[0], in_shape_[1], th_, tw_, "upsample");
    Tensor<S> gx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
    for (int s = 0; s < g.n; ++s)
      for (int c = 0; c < g.c; ++c)
        for (int i = 0; i < th_; ++i) {
          const int si = std::min(i / 2, gx.h - 1);
          for (int j = 0; j < tw_; ++j)
            gx.at(s, c, si, std::min(j / 2, gx.w - 1)) += g.at(s, c, i, j);
        }
    return gx;
  }

 private:
  int th_, tw_;
  std::array<int, 4> in_shape_{};
};

// Ordered chain of named children.
template <typename S>
class Sequential : public Module<S> {
 public:
  void add(std::string name, std::unique_ptr<Module<S>> m) {
    children_.emplace_back(std::move(name), std::move(m));
  }

  Tensor<S> forward(const Tensor<S>& x, bool train) override {
    Tensor<S> v = x;
    for (auto& [name, m] : children_) v = m->forward(v, train);
    return v;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    Tensor<S> v = g;
    for (auto it = children_.rbegin(); it != children_.rend(); ++it)
      v = it->second->backward(v);
    return v;
  }

  void collect(const std::string& prefix,
               std::vector<NamedParam<S>>* out) override {
    for (auto& [name, m] : children_)
      m->collect(prefix.empty() ? name : prefix + "." + name, out);
  }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Module<S>>>> children_;
};

template <typename S>
std::vector<NamedParam<S>> collect_params(Module<S>* m,
                                          const std::string& prefix) {
  std::vector<NamedParam<S>> out;
  m->collect(prefix, &out);
  return out;
}

template <typename S>
void zero_grads(const std::vector<NamedParam<S>>& params) {
  for (const auto& p : params)
    if (p.grad) std::fill(p.grad->begin(), p.grad->end(), S(0));
}

}  // namespace rdal::nn

#endif  // RDAL_NN_LAYERS_HPP_
