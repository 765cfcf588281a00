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

#ifndef RDAL_NN_TENSOR_HPP_
#define RDAL_NN_TENSOR_HPP_

#include <cstddef>
#include <vector>

#include "rdal/common.hpp"

namespace rdal::nn {

// Dense NCHW tensor. Vectors ride along as (n, features, 1, 1).
template <typename S>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<S> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(std::size_t(n_) * c_ * h_ * w_, S(0)) {}

  static Tensor vec(int batch, int features) {
    return Tensor(batch, features, 1, 1);
  }

  std::size_t size() const { return data.size(); }
  int features() const { return c * h * w; }

  S& at(int in, int ic, int ih, int iw) {
    return data[((std::size_t(in) * c + ic) * h + ih) * w + iw];
  }
  const S& at(int in, int ic, int ih, int iw) const {
    return data[((std::size_t(in) * c + ic) * h + ih) * w + iw];
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  void require_shape(int en, int ec, int eh, int ew, const char* who) const {
    if (n != en || c != ec || h != eh || w != ew)
      throw ShapeError(std::string(who) + ": unexpected tensor shape");
  }
};

}  // namespace rdal::nn

#endif  // RDAL_NN_TENSOR_HPP_
