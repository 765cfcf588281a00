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

#ifndef RDAL_FEATURES_HPP_
#define RDAL_FEATURES_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "rdal/audio.hpp"

namespace rdal {

constexpr int kStftWindow = 1411;
constexpr int kStftHop = 441;
constexpr int kStftBins = kStftWindow / 2 + 1;  // 706
constexpr int kNumFrames = kSegmentSamples / kStftHop + 1;  // 101
constexpr int kMelBands = 64;
constexpr double kLogFloor = 1e-10;

// Row-major (rows x cols) float matrix; rows are frequency bins or mel
// bands, columns are time frames.
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;

  float& at(int r, int c) { return values[std::size_t(r) * cols + c]; }
  float at(int r, int c) const { return values[std::size_t(r) * cols + c]; }
};

using MagnitudeSpectrogram = FeatureMatrix;  // kStftBins x frames
using LogMelFeature = FeatureMatrix;         // kMelBands x frames

struct FrontendConfig {
  // Mel projection input: power spectrogram by default, plain magnitude
  // when set.
  bool mel_on_magnitude = false;

  std::string tag() const { return mel_on_magnitude ? "melmag" : "melpow"; }
};

// Hamming-windowed STFT magnitude with reflect center padding chosen so a
// one-second segment always yields kNumFrames frames.
MagnitudeSpectrogram stft_magnitude(const AudioSegment& segment);

LogMelFeature log_mel(const MagnitudeSpectrogram& spec,
                      const FrontendConfig& config = {});

LogMelFeature featurize(const AudioSegment& segment,
                        const FrontendConfig& config = {});

// Triangular mel weights, row-major kMelBands x kStftBins, HTK mel scale
// over 0..22050 Hz, unnormalized.
std::vector<double> mel_filterbank();

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// -- Disk cache ---------------------------------------------------------------

// One file per example, written atomically; `tag` should identify both the
// corpus revision and the frontend settings.
struct FeatureCache {
  std::filesystem::path dir;
  std::string tag;

  std::filesystem::path entry_path(int example_id) const;
  bool load(int example_id, FeatureMatrix* out) const;
  void store(int example_id, const FeatureMatrix& feature) const;
};

void save_feature(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix load_feature(const std::filesystem::path& path);

}  // namespace rdal

#endif  // RDAL_FEATURES_HPP_
