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

#include "rdal/audio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rdal/common.hpp"

namespace rdal {

namespace {
constexpr int kEnergyStride = 4410;  // 100 ms scan hop
}

double speech_mix_gain() { return std::pow(10.0, kSpeechAttenuationDb / 20.0); }

std::vector<float> normalize(const std::vector<float>& x) {
  if (x.empty()) throw DegenerateInputError("normalize: empty input");
  double sum = 0.0;
  for (float v : x) {
    if (!std::isfinite(v)) throw Error("normalize: non-finite sample");
    sum += v;
  }
  const double mean = sum / double(x.size());
  double ss = 0.0;
  for (float v : x) {
    const double d = double(v) - mean;
    ss += d * d;
  }
  const double var = std::max(ss / double(x.size()), 0.0);
  if (var == 0.0)
    throw DegenerateInputError("normalize: zero-variance segment");
  const double inv_std = 1.0 / std::sqrt(var);
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = float((double(x[i]) - mean) * inv_std);
  return out;
}

AudioSegment normalize(const AudioSegment& segment) {
  AudioSegment out;
  out.sample_rate = segment.sample_rate;
  out.samples = normalize(segment.samples);
  return out;
}

std::vector<AudioSegment> extract_energetic_segments(
    const std::vector<float>& recording, int count) {
  if (recording.empty())
    throw Error("extract_energetic_segments: empty recording");
  if (count < 1) throw Error("extract_energetic_segments: count must be >= 1");

  // Short recording: normalize whole, then pad with zeros at the end.
  if (recording.size() < std::size_t(kSegmentSamples)) {
    std::vector<float> norm = normalize(recording);
    norm.resize(kSegmentSamples, 0.0f);
    AudioSegment seg;
    seg.samples = std::move(norm);
    return {seg};
  }

  // Candidate windows on the stride grid, plus the tail-aligned window so
  // the final samples are reachable.
  std::vector<std::size_t> starts;
  const std::size_t last_start = recording.size() - kSegmentSamples;
  for (std::size_t s = 0; s <= last_start; s += kEnergyStride) starts.push_back(s);
  if (starts.back() != last_start) starts.push_back(last_start);

  for (float v : recording)
    if (!std::isfinite(v))
      throw Error("extract_energetic_segments: non-finite sample");

  // Energies are summed per window rather than via prefix sums so that
  // windows with identical content get bitwise identical energies and the
  // earliest-start tie break is meaningful.
  struct Cand {
    std::size_t start;
    double energy;
  };
  std::vector<Cand> cands;
  cands.reserve(starts.size());
  const double n = double(kSegmentSamples);
  for (std::size_t s : starts) {
    double energy = 0.0, sum = 0.0;
    for (int i = 0; i < kSegmentSamples; ++i) {
      const double v = recording[s + i];
      energy += v * v;
      sum += v;
    }
    const double var = energy / n - (sum / n) * (sum / n);
    if (var > 0.0) cands.push_back({s, energy});
  }
  if (cands.empty())
    throw DegenerateInputError(
        "extract_energetic_segments: no window with positive variance");

  // Stable sort keeps the earliest window on energy ties.
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& a, const Cand& b) { return a.energy > b.energy; });

  // Greedy pick: best first, drop overlapping candidates.
  std::vector<AudioSegment> out;
  std::vector<std::size_t> taken;
  for (const Cand& c : cands) {
    if (int(out.size()) == count) break;
    bool overlaps = false;
    for (std::size_t t : taken) {
      const std::size_t lo = std::max(t, c.start);
      const std::size_t hi = std::min(t, c.start) + kSegmentSamples;
      if (lo < hi) {
        overlaps = true;
        break;
      }
    }
    if (overlaps) continue;
    taken.push_back(c.start);
    AudioSegment seg;
    seg.samples.assign(recording.begin() + c.start,
                       recording.begin() + c.start + kSegmentSamples);
    seg.samples = normalize(seg.samples);
    out.push_back(std::move(seg));
  }
  return out;
}

AudioSegment mix(const AudioSegment& event,
                 const std::optional<AudioSegment>& speech) {
  if (!event.valid_length()) throw ShapeError("mix: event segment length mismatch");
  if (!speech.has_value()) return event;
  if (!speech->valid_length() || speech->samples.size() != event.samples.size())
    throw ShapeError("mix: speech segment length mismatch");
  const float gain = float(speech_mix_gain());
  AudioSegment out;
  out.sample_rate = event.sample_rate;
  out.samples.resize(event.samples.size());
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] = event.samples[i] + gain * speech->samples[i];
  return out;
}

}  // namespace rdal
