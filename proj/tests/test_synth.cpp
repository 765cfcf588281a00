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

#include "rdal/synth.hpp"

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rdal/common.hpp"

namespace rdal {
namespace {

// Energy of the signal inside [lo, hi] Hz, probed with the Goertzel
// recurrence on a 2 Hz grid over the first half second. Shares no code with
// the generator.
double band_energy(const AudioSegment& seg, double lo, double hi) {
  const int n = kSampleRate / 2;
  double total = 0.0;
  for (double f = lo; f <= hi; f += 2.0) {
    const double w = 2.0 * std::numbers::pi * f / kSampleRate;
    const double coeff = 2.0 * std::cos(w);
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s0 = double(seg.samples[i]) + coeff * s1 - s2;
      s2 = s1;
      s1 = s0;
    }
    total += s1 * s1 + s2 * s2 - coeff * s1 * s2;
  }
  return total;
}

TEST_CASE("event class center frequencies are geometrically spaced") {
  CHECK(synthetic_event_center_hz(1) == doctest::Approx(350.0));
  for (int c = 2; c <= kMaxSyntheticClasses; ++c)
    CHECK(synthetic_event_center_hz(c) / synthetic_event_center_hz(c - 1) ==
          doctest::Approx(1.4).epsilon(1e-12));
  CHECK(synthetic_event_center_hz(kMaxSyntheticClasses) < 20000.0);
  CHECK_THROWS_AS(synthetic_event_center_hz(0), Error);
  CHECK_THROWS_AS(synthetic_event_center_hz(13), Error);
}

TEST_CASE("event generation is deterministic per class and seed") {
  AudioSegment a = generate_synthetic_event(3, 99);
  AudioSegment b = generate_synthetic_event(3, 99);
  AudioSegment c = generate_synthetic_event(3, 100);
  AudioSegment d = generate_synthetic_event(4, 99);
  REQUIRE(a.samples.size() == std::size_t(kSegmentSamples));
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
  CHECK(a.samples != d.samples);
}

TEST_CASE("event energy concentrates near the class center frequency") {
  for (int c : {1, 2, 5, 8}) {
    AudioSegment seg = generate_synthetic_event(c, 7);
    const double fc = synthetic_event_center_hz(c);
    double in_band = band_energy(seg, fc / 1.4, fc * 1.4);
    double off_band = band_energy(seg, fc * 2.3, fc * 2.7);
    CHECK(in_band > 20.0 * off_band);
  }
}

TEST_CASE("events carry burst structure with quiet gaps") {
  AudioSegment seg = generate_synthetic_event(2, 13);
  int quiet = 0;
  for (float v : seg.samples) quiet += std::abs(v) < 1e-6f;
  CHECK(quiet > kSegmentSamples / 8);
  double peak = 0.0;
  for (float v : seg.samples) peak = std::max(peak, double(std::abs(v)));
  CHECK(peak > 0.5);
}

TEST_CASE("speech generation is deterministic and gender separated") {
  AudioSegment a = generate_synthetic_speech(Gender::kMale, 5);
  AudioSegment b = generate_synthetic_speech(Gender::kMale, 5);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != generate_synthetic_speech(Gender::kFemale, 5).samples);
}

TEST_CASE("estimated pitch falls in the configured gender bands") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    double male = estimate_pitch_hz(generate_synthetic_speech(Gender::kMale, seed));
    CHECK(male >= kMaleF0Lo - 6.0);
    CHECK(male <= kMaleF0Hi + 6.0);
    double female =
        estimate_pitch_hz(generate_synthetic_speech(Gender::kFemale, seed));
    CHECK(female >= kFemaleF0Lo - 11.0);
    CHECK(female <= kFemaleF0Hi + 11.0);
  }
}

TEST_CASE("pitch estimator recovers a pure tone") {
  AudioSegment tone;
  tone.samples.resize(kSegmentSamples);
  for (int i = 0; i < kSegmentSamples; ++i)
    tone.samples[i] = float(std::sin(2.0 * std::numbers::pi * 200.0 * i / kSampleRate));
  CHECK(estimate_pitch_hz(tone) == doctest::Approx(200.0).epsilon(0.02));
}

}  // namespace
}  // namespace rdal
