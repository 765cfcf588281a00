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

#ifndef RDAL_AUDIO_HPP_
#define RDAL_AUDIO_HPP_

#include <optional>
#include <vector>

namespace rdal {

constexpr int kSampleRate = 44100;
constexpr int kSegmentSamples = 44100;  // one second

// Dry/wet gain for speech in a mixture: -5 dB.
constexpr double kSpeechAttenuationDb = -5.0;
double speech_mix_gain();  // 10^(-5/20)

// One-second mono segment at 44.1 kHz.
struct AudioSegment {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  bool valid_length() const { return samples.size() == kSegmentSamples; }
};

// Zero-mean, unit population-variance copy of `x`. Throws
// DegenerateInputError on zero variance; silence must not slip into
// training as an epsilon-scaled segment.
std::vector<float> normalize(const std::vector<float>& x);
AudioSegment normalize(const AudioSegment& segment);

// The `count` most energetic non-overlapping one-second windows of
// `recording`, scanned at a 100 ms stride, in non-increasing energy order;
// each returned window is normalized. Recordings shorter than one second
// yield a single segment, normalized then zero-padded at the end.
// Throws DegenerateInputError when no window has positive variance.
std::vector<AudioSegment> extract_energetic_segments(
    const std::vector<float>& recording, int count);

// event + gain * speech, both already normalized. Absent speech returns
// the event unchanged. The mixture is intentionally not re-normalized.
AudioSegment mix(const AudioSegment& event,
                 const std::optional<AudioSegment>& speech);

}  // namespace rdal

#endif  // RDAL_AUDIO_HPP_
