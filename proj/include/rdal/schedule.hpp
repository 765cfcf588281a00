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

#ifndef RDAL_SCHEDULE_HPP_
#define RDAL_SCHEDULE_HPP_

#include <algorithm>
#include <cmath>

#include "rdal/common.hpp"

namespace rdal {

constexpr int kWarmupEpochs = 30;
constexpr double kLambdaGamma = 100.0;

// Reversal coefficient for completed-epoch index m (0-based): zero through
// the warmup, then 2 / (1 + exp(-gamma * beta)) - 1 with beta the progress
// through the post-warmup range, clamped to [0, 1].
inline double lambda_schedule(int m, int max_epochs,
                              int warmup = kWarmupEpochs,
                              double gamma = kLambdaGamma) {
  if (m < 0) throw ConfigError("lambda_schedule: negative epoch");
  if (m < warmup) return 0.0;
  double beta = 1.0;
  if (max_epochs > warmup)
    beta = std::clamp(double(m - warmup) / double(max_epochs - warmup), 0.0,
                      1.0);
  const double lam = 2.0 / (1.0 + std::exp(-gamma * beta)) - 1.0;
  return std::min(lam, 1.0);
}

}  // namespace rdal

#endif  // RDAL_SCHEDULE_HPP_
