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

#include "doctest.h"
#include "rdal/schedule.hpp"

using namespace rdal;

TEST_CASE("lambda is zero through the warm-up") {
  for (int m = 0; m < 30; ++m) CHECK(lambda_schedule(m, 5000) == 0.0);
  CHECK(lambda_schedule(29, 5000) == 0.0);
}

TEST_CASE("lambda matches the logistic ramp anchors") {
  // warmup 30, horizon 130: progress is (m - 30) / 100.
  CHECK(lambda_schedule(30, 130) == 0.0);  // progress 0
  CHECK(std::abs(lambda_schedule(31, 130) - 0.46211715726000974) < 1e-6);
  CHECK(std::abs(lambda_schedule(40, 130) - 0.9999092042625951) < 1e-6);
}

TEST_CASE("lambda saturates at one") {
  CHECK(lambda_schedule(130, 130) == 1.0);
  CHECK(lambda_schedule(5000, 5000) == 1.0);
  CHECK(lambda_schedule(2600, 5000) <= 1.0);
}

TEST_CASE("lambda never decreases over a full horizon") {
  double prev = -1.0;
  for (int m = 0; m <= 5000; ++m) {
    const double l = lambda_schedule(m, 5000);
    CHECK(l >= prev);
    CHECK(l >= 0.0);
    CHECK(l <= 1.0);
    prev = l;
  }
}

TEST_CASE("lambda is zero exactly when the epoch is inside the warm-up") {
  for (int m = 0; m <= 200; ++m) {
    const double l = lambda_schedule(m, 200);
    if (m < 30)
      CHECK(l == 0.0);
    else if (m > 30)
      CHECK(l > 0.0);
  }
}

TEST_CASE("lambda handles degenerate horizons and rejects negatives") {
  CHECK_THROWS_AS(lambda_schedule(-1, 100), ConfigError);
  // Horizon at or below the warm-up: ramp treated as fully saturated.
  CHECK(lambda_schedule(30, 30) == 1.0);
  CHECK(lambda_schedule(29, 30) == 0.0);
}

TEST_CASE("custom gamma controls the ramp steepness") {
  const double gentle = lambda_schedule(40, 130, 30, 10.0);
  const double steep = lambda_schedule(40, 130, 30, 100.0);
  CHECK(gentle < steep);
  CHECK(std::abs(gentle - std::tanh(10.0 * 0.1 / 2.0)) < 1e-12);
}
