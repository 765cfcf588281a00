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

#include "rdal/models.hpp"

namespace rdal {

nn::Tensor<float> to_tensor(const FeatureMatrix& m) {
  if (m.values.size() != std::size_t(m.rows) * m.cols)
    throw ShapeError("to_tensor: value count does not match shape");
  nn::Tensor<float> t(1, 1, m.rows, m.cols);
  t.data = m.values;
  return t;
}

FeatureMatrix to_feature(const nn::Tensor<float>& t) {
  if (t.n != 1 || t.c != 1) throw ShapeError("to_feature: expected (1,1,h,w)");
  FeatureMatrix m;
  m.rows = t.h;
  m.cols = t.w;
  m.values = t.data;
  return m;
}

MagnitudeSpectrogram mask_apply(const MagnitudeSpectrogram& spec,
                                MaskNet<float>* net) {
  return to_feature(net->forward(to_tensor(spec), /*train=*/false));
}

}  // namespace rdal
