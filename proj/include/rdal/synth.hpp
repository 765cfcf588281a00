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

#ifndef RDAL_SYNTH_HPP_
#define RDAL_SYNTH_HPP_

#include <cstdint>

#include "rdal/audio.hpp"

namespace rdal {

enum class Gender { kMale, kFemale };

inline const char* gender_name(Gender g) {
  return g == Gender::kMale ? "male" : "female";
}

constexpr int kMaxSyntheticClasses = 12;

// Gender-dependent fundamental frequency bands. Disjoint so a pitch
// estimate separates the two populations.
constexpr double kMaleF0Lo = 100.0, kMaleF0Hi = 150.0;
constexpr double kFemaleF0Lo = 180.0, kFemaleF0Hi = 250.0;

// One-second sound event, deterministic per (class_id, seed). Classes carry
// distinct spectral bands and temporal textures: odd ids are band-limited
// noise bursts, even ids harmonic tone bursts, with geometrically spaced
// center frequencies.
AudioSegment generate_synthetic_event(int class_id, std::uint64_t rng_seed);

// One-second speech-like signal: a harmonic pulse train with a
// gender-dependent fundamental, formant-shaped harmonic amplitudes,
// syllabic amplitude modulation, and a breath-noise floor.
AudioSegment generate_synthetic_speech(Gender gender, std::uint64_t rng_seed);

// Event band center for class `class_id`; exposed so tests can check the
// configured separation margin.
double synthetic_event_center_hz(int class_id);

// Autocorrelation pitch estimate over the 80-300 Hz lag range. Returns the
// fundamental in Hz. Used to verify gender bands.
double estimate_pitch_hz(const AudioSegment& segment);

}  // namespace rdal

#endif  // RDAL_SYNTH_HPP_
