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

#ifndef RDAL_WAV_HPP_
#define RDAL_WAV_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

namespace rdal {

struct WavData {
  std::vector<float> samples;  // mono
  int sample_rate = 0;
};

// Reads mono PCM16 or IEEE float32 WAV. Multi-channel input is rejected.
WavData read_wav(const std::filesystem::path& path);

// Writes mono IEEE float32 WAV (format tag 3). Lossless for float samples,
// which normalized segments require: their range exceeds [-1, 1).
void write_wav_float32(const std::filesystem::path& path,
                       const std::vector<float>& samples, int sample_rate);

// Writes mono PCM16 WAV, clipping to [-1, 1). Used by tests that exercise
// the real-corpus ingestion path.
void write_wav_pcm16(const std::filesystem::path& path,
                     const std::vector<float>& samples, int sample_rate);

}  // namespace rdal

#endif  // RDAL_WAV_HPP_
