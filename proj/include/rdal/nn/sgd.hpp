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

#ifndef RDAL_NN_SGD_HPP_
#define RDAL_NN_SGD_HPP_

#include <string>
#include <vector>

#include "rdal/nn/layers.hpp"

namespace rdal::nn {

// Momentum SGD: v <- momentum * v + g; w <- w - lr * v.
template <typename S>
class Sgd {
 public:
  Sgd(std::vector<NamedParam<S>> params, double lr, double momentum)
      : lr_(S(lr)), momentum_(S(momentum)) {
    for (auto& p : params) {
      if (!p.grad) continue;  // buffers are not optimized
      slots_.push_back({p.name, p.value, p.grad,
                        std::vector<S>(p.value->size(), S(0))});
    }
  }

  void zero_grad() {
    for (auto& s : slots_) std::fill(s.grad->begin(), s.grad->end(), S(0));
  }

  void step() {
    for (auto& s : slots_) {
      for (std::size_t i = 0; i < s.value->size(); ++i) {
        s.velocity[i] = momentum_ * s.velocity[i] + (*s.grad)[i];
        (*s.value)[i] -= lr_ * s.velocity[i];
      }
    }
  }

  // Drops accumulated momentum; used when parameters are replaced wholesale.
  void reset_velocity() {
    for (auto& s : slots_)
      std::fill(s.velocity.begin(), s.velocity.end(), S(0));
  }

  // Velocity buffers exposed for checkpointing, named opt.<param>.
  std::vector<NamedParam<S>> state() {
    std::vector<NamedParam<S>> out;
    for (auto& s : slots_)
      out.push_back({"opt." + s.name, &s.velocity, nullptr});
    return out;
  }

 private:
  struct Slot {
    std::string name;
    std::vector<S>* value;
    std::vector<S>* grad;
    std::vector<S> velocity;
  };
  S lr_, momentum_;
  std::vector<Slot> slots_;
};

}  // namespace rdal::nn

#endif  // RDAL_NN_SGD_HPP_
