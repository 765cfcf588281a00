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
#include <random>
#include <vector>

#include "rdal/common.hpp"

namespace rdal {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDt = 1.0 / double(kSampleRate);

// Raised-cosine burst train: period 1/rate, fraction `duty` active, 10 ms
// attack/release ramps.
double burst_envelope(double t, double rate, double duty, double phase01) {
  const double period = 1.0 / rate;
  double pos = std::fmod(t + phase01 * period, period);
  const double active = duty * period;
  const double ramp = std::min(0.010, active / 4.0);
  if (pos >= active) return 0.0;
  if (pos < ramp) return 0.5 - 0.5 * std::cos(std::numbers::pi * pos / ramp);
  if (pos > active - ramp)
    return 0.5 - 0.5 * std::cos(std::numbers::pi * (active - pos) / ramp);
  return 1.0;
}

}  // namespace

double synthetic_event_center_hz(int class_id) {
  if (class_id < 1 || class_id > kMaxSyntheticClasses)
    throw Error("synthetic event class_id out of range: " + std::to_string(class_id));
  // Geometric spacing keeps neighboring classes ~40% apart in frequency;
  // class 12 tops out near 14 kHz, well under Nyquist.
  return 350.0 * std::pow(1.4, class_id - 1);
}

AudioSegment generate_synthetic_event(int class_id, std::uint64_t rng_seed) {
  const double fc = synthetic_event_center_hz(class_id);  // validates class_id
  auto rng = make_rng(rng_seed, "synth-event", std::uint64_t(class_id));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double burst_rate = 1.5 + 0.9 * class_id + 0.4 * unit(rng);
  const double duty = 0.3 + 0.35 * unit(rng);
  const double burst_phase = unit(rng);

  struct Comp {
    double freq, amp, phase;
  };
  std::vector<Comp> comps;
  if (class_id % 2 == 1) {
    // Band-limited noise: random sinusoids across [fc/1.3, fc*1.3].
    const double lo = fc / 1.3, hi = std::min(fc * 1.3, 20000.0);
    for (int k = 0; k < 48; ++k) {
      comps.push_back({lo + (hi - lo) * unit(rng), 0.5 + 0.5 * unit(rng),
                       kTwoPi * unit(rng)});
    }
  } else {
    // Harmonic tone stack at fc with mild detuning.
    for (int h = 1; h <= 6; ++h) {
      const double f = fc * h * (1.0 + 0.002 * (unit(rng) - 0.5));
      if (f > 20000.0) break;
      comps.push_back({f, 1.0 / std::pow(h, 0.7), kTwoPi * unit(rng)});
    }
    // Narrow noise skirt around fc.
    for (int k = 0; k < 12; ++k) {
      comps.push_back({fc * (0.92 + 0.16 * unit(rng)), 0.15 + 0.1 * unit(rng),
                       kTwoPi * unit(rng)});
    }
  }

  AudioSegment seg;
  seg.samples.resize(kSegmentSamples);
  for (int i = 0; i < kSegmentSamples; ++i) {
    const double t = i * kDt;
    double v = 0.0;
    for (const Comp& c : comps) v += c.amp * std::sin(kTwoPi * c.freq * t + c.phase);
    seg.samples[i] = float(v * burst_envelope(t, burst_rate, duty, burst_phase));
  }
  return seg;
}

AudioSegment generate_synthetic_speech(Gender gender, std::uint64_t rng_seed) {
  auto rng = make_rng(rng_seed, "synth-speech",
                      gender == Gender::kMale ? 1u : 2u);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double f0_lo = gender == Gender::kMale ? kMaleF0Lo : kFemaleF0Lo;
  const double f0_hi = gender == Gender::kMale ? kMaleF0Hi : kFemaleF0Hi;
  const double f0 = f0_lo + (f0_hi - f0_lo) * unit(rng);

  // Two movable formants plus a fixed third; female vocal tract scaled up.
  const double tract = gender == Gender::kMale ? 1.0 : 1.15;
  const double formants[3] = {(450.0 + 250.0 * unit(rng)) * tract,
                              (1150.0 + 650.0 * unit(rng)) * tract,
                              2500.0 * tract};
  const double bws[3] = {90.0, 140.0, 220.0};
  auto formant_gain = [&](double f) {
    double g = 0.04;
    for (int j = 0; j < 3; ++j) {
      const double d = (f - formants[j]) / bws[j];
      g += (j == 0 ? 1.0 : (j == 1 ? 0.7 : 0.35)) * std::exp(-0.5 * d * d);
    }
    return g;
  };

  const double vib_rate = 4.5 + 1.5 * unit(rng);
  const double vib_depth = 0.015 + 0.01 * unit(rng);
  const double vib_phase = kTwoPi * unit(rng);
  const double syll_rate = 2.5 + 2.0 * unit(rng);
  const double syll_duty = 0.55 + 0.2 * unit(rng);
  const double syll_phase = unit(rng);

  const int n_harm = std::min(int(4000.0 / f0), 40);
  std::vector<double> amp(n_harm + 1), phase(n_harm + 1);
  for (int h = 1; h <= n_harm; ++h) {
    amp[h] = formant_gain(h * f0) / std::pow(h, 0.4);
    phase[h] = kTwoPi * unit(rng);
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  AudioSegment seg;
  seg.samples.resize(kSegmentSamples);
  double f0_integral = 0.0;
  for (int i = 0; i < kSegmentSamples; ++i) {
    const double t = i * kDt;
    const double f0_t = f0 * (1.0 + vib_depth * std::sin(kTwoPi * vib_rate * t + vib_phase));
    f0_integral += f0_t * kDt;
    double v = 0.0;
    for (int h = 1; h <= n_harm; ++h)
      v += amp[h] * std::sin(kTwoPi * h * f0_integral + phase[h]);
    const double env = burst_envelope(t, syll_rate, syll_duty, syll_phase);
    // Breath-noise floor keeps unvoiced gaps from being exact silence.
    seg.samples[i] = float(v * env + 0.02 * gauss(rng));
  }
  return seg;
}

double estimate_pitch_hz(const AudioSegment& segment) {
  const auto& x = segment.samples;
  const int lag_min = kSampleRate / 300;  // 147
  const int lag_max = kSampleRate / 80;   // 551
  double best = 0.0;
  int best_lag = lag_min;
  for (int lag = lag_min; lag <= lag_max; ++lag) {
    double acc = 0.0;
    for (int i = 0; i + lag < int(x.size()); ++i)
      acc += double(x[i]) * double(x[i + lag]);
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  return double(kSampleRate) / double(best_lag);
}

}  // namespace rdal
